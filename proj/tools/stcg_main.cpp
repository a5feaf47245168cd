// stcg: single entry point for data generation, training, evaluation,
// causal queries and the sandbox service. Run `stcg --help` for the list.

#include "stcg/checks.hpp"
#include "stcg/config.hpp"
#include "stcg/ctg.hpp"
#include "stcg/generator.hpp"
#include "stcg/harness.hpp"
#include "stcg/rng.hpp"
#include "stcg/scenario_io.hpp"
#include "stcg/service.hpp"
#include "stcg/surrogate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace stcg;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config_path;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out = "out";
    int jobs = 0;
    bool quiet = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string write_out(const Globals& g, const std::string& name, const std::string& text) {
    fs::create_directories(g.out);
    const auto path = (fs::path(g.out) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError("cannot write '" + path + "'");
    out << text;
    return path;
}

config::AppConfig effective(const Globals& g, const std::string& cmd) {
    std::string path = g.config_path;
    if (path.empty())
        if (const char* env = std::getenv(config::kConfigEnv)) path = env;
    auto sets = g.sets;
    if (g.seed_given) sets.push_back("seed=" + std::to_string(g.seed));
    if (g.jobs > 0) sets.push_back("jobs=" + std::to_string(g.jobs));
    auto c = config::load(path, sets);
    const auto doc = config::to_json(c).dump();
    if (!g.quiet)
        std::cerr << "# stcg " << cmd << " config=" << (path.empty() ? "<defaults>" : path)
                  << " hash=" << harness::fnv1a_hex(doc) << " seed=" << c.seed << " jobs=" << c.jobs << '\n'
                  << "# effective-config " << doc << '\n';
    return c;
}

harness::Dataset dataset_for(const config::AppConfig& c, const std::string& data_path) {
    if (!data_path.empty()) return harness::dataset_from_jsonl(read_file(data_path), c.seed);
    std::cerr << "# generating dataset n=" << c.dataset_n << " seed=" << c.seed << '\n';
    return harness::generate_dataset(c.seed, c.dataset_n, c.pipeline, c.jobs);
}

model::Model load_model(const std::string& path) {
    if (path.empty()) throw CliError("no model given: pass --model <checkpoint> (produce one with `stcg train`)");
    auto ck = num::load_checkpoint(path);
    if (ck.kind != "delay_model")
        throw CliError("'" + path + "' holds a '" + ck.kind + "' checkpoint, expected a delay_model");
    return model::Model::from_checkpoint(ck);
}

graph::Scenario scenario_for(const config::AppConfig& c, const std::string& path, std::size_t index) {
    if (path.empty()) {
        Rng rng(c.seed, streams::kDataset << 32);
        return harness::sample_scenario("sc-0000", c.pipeline.registries, c.pipeline.gen, c.pipeline.physics, rng);
    }
    auto all = graph::read_scenarios(read_file(path));
    if (index >= all.size())
        throw CliError("'" + path + "' holds " + std::to_string(all.size()) + " scenarios; --index " +
                       std::to_string(index) + " is out of range");
    auto v = graph::validate(all[index]);
    if (!v.empty()) throw CliError("scenario fails validation:\n" + graph::format_violations(v));
    return all[index];
}

graph::InterventionVector w_for(const graph::Scenario& s, const std::string& w_json) {
    if (w_json.empty()) return s.current_intervention();
    json j = json::parse(w_json.front() == '@' ? read_file(w_json.substr(1)) : w_json);
    return graph::intervention_from_json(j, "w");
}

model::Arch arch_of(const std::string& s) {
    auto a = model::arch_from(s);
    if (!a) throw CliError("unknown --arch '" + s + "' (ia_stgnn, st_gnn, gcn_lstm, flat)");
    return *a;
}

std::string model_id_of(const model::Model& m) {
    return m.kind() + "-" + harness::fnv1a_hex(m.params().to_json().dump()).substr(0, 8);
}

void print_epoch(const std::string& name, const model::EpochRecord& r) {
    std::fprintf(stderr, "  %-16s epoch %3d  reg %9.3f  cf %8.3f  creg %7.4f  val_mae %7.3f  %5.1fs\n", name.c_str(),
                 r.epoch, r.reg, r.cf, r.creg, r.val_mae, r.seconds);
}

ordered_json history_json(const model::EpochRecord& r) {
    return {{"epoch", r.epoch}, {"reg", r.reg},         {"cf", r.cf},          {"creg", r.creg},
            {"total", r.total}, {"val_mae", r.val_mae}, {"seconds", r.seconds}};
}

std::map<std::string, std::string> parse_assign(const std::vector<std::string>& items, const std::string& flag) {
    std::map<std::string, std::string> out;
    for (const auto& it : items) {
        auto eq = it.find('=');
        if (eq == std::string::npos || eq == 0) throw CliError(flag + " expects NAME=STATE, got '" + it + "'");
        out[it.substr(0, eq)] = it.substr(eq + 1);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stcg: intervention-aware spatio-temporal causal graph toolkit (synthetic data only)"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, std::string("JSON config file (default: $") + config::kConfigEnv + ")");
    app.add_option("--set", g.sets, "override one config key, e.g. --set train.epochs=5");
    auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads");
    app.add_flag("--quiet", g.quiet, "suppress the effective-config header");

    std::function<int()> action;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic labeled dataset");
    std::size_t gen_n = 0;
    gen->add_option("-n,--count", gen_n, "number of scenarios (default: config dataset_n)");
    gen->callback([&] {
        action = [&] {
            if (gen_n > 0) g.sets.push_back("dataset_n=" + std::to_string(gen_n));
            auto c = effective(g, "gen-data");
            auto d = harness::generate_dataset(c.seed, c.dataset_n, c.pipeline, c.jobs);
            const auto text = harness::dataset_to_jsonl(d);
            auto p = write_out(g, "dataset.jsonl", text);
            std::vector<graph::Scenario> test;
            for (auto i : d.indices(harness::Split::Test)) test.push_back(d.items[i].scenario);
            write_out(g, "scenarios.jsonl", graph::write_scenarios(test));
            std::size_t tagged = 0;
            double ymin = 1e300, ymax = -1e300, ysum = 0;
            for (const auto& it : d.items) {
                ymin = std::min(ymin, it.y);
                ymax = std::max(ymax, it.y);
                ysum += it.y;
                for (const auto& cd : it.candidates) tagged += cd.equivalent;
            }
            ordered_json summary{{"n", d.items.size()},
                                 {"seed", c.seed},
                                 {"hash", d.hash()},
                                 {"split_hash",
                                  {{"train", d.split_hash(harness::Split::Train)},
                                   {"val", d.split_hash(harness::Split::Val)},
                                   {"test", d.split_hash(harness::Split::Test)}}},
                                 {"y_min", ymin},
                                 {"y_max", ymax},
                                 {"y_mean", ysum / d.items.size()},
                                 {"equivalence_tagged", tagged}};
            write_out(g, "dataset.json", summary.dump(2) + "\n");
            std::cout << "wrote " << p << " (" << d.items.size() << " scenarios)\n"
                      << "dataset hash " << d.hash() << "\n"
                      << "split train " << d.indices(harness::Split::Train).size() << " val "
                      << d.indices(harness::Split::Val).size() << " test " << d.indices(harness::Split::Test).size()
                      << "  test hash " << d.split_hash(harness::Split::Test) << "\n"
                      << std::fixed << std::setprecision(2) << "labels min " << ymin << " mean "
                      << ysum / d.items.size() << " max " << ymax << " days; equivalence-tagged pairs " << tagged
                      << '\n';
            return 0;
        };
    });

    // labels
    auto* labels = app.add_subcommand("labels", "physics label grid (4 munitions x 4 angles x 7 stacks)");
    labels->callback([&] {
        action = [&] {
            auto c = effective(g, "labels");
            auto rows = physics::batch_labels(physics::default_grid(c.pipeline.physics), c.pipeline.physics);
            const auto tsv = physics::labels_to_tsv(rows);
            auto p = write_out(g, "labels.tsv", tsv);
            double rsum = 0;
            std::size_t reached = 0;
            for (const auto& r : rows) {
                rsum += r.rd;
                reached += r.rd > 0.5;
            }
            std::cout << "wrote " << p << " (" << rows.size() << " rows, hash " << harness::fnv1a_hex(tsv) << ")\n"
                      << std::fixed << std::setprecision(4) << "mean rd " << rsum / rows.size() << ", rows with rd > 0.5: "
                      << reached << '\n';
            return 0;
        };
    });

    // train-surrogate
    auto* tsur = app.add_subcommand("train-surrogate", "fit the monotone rd surrogate on the label grid");
    std::string sur_labels;
    tsur->add_option("--labels", sur_labels, "labels.tsv (default: regenerate the grid)");
    tsur->callback([&] {
        action = [&] {
            auto c = effective(g, "train-surrogate");
            auto rows = sur_labels.empty()
                            ? physics::batch_labels(physics::default_grid(c.pipeline.physics), c.pipeline.physics)
                            : physics::labels_from_tsv(read_file(sur_labels));
            auto t0 = std::chrono::steady_clock::now();
            auto res = surrogate::train_surrogate(rows, c.surrogate, c.pipeline.physics);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            auto viol = surrogate::monotonicity_violations(res.model, rows, c.pipeline.physics, c.surrogate, 10000,
                                                           c.seed + 1);
            auto ck = res.model.to_checkpoint("surrogate-" + std::to_string(c.seed));
            auto p = write_out(g, "surrogate.ckpt.json", num::checkpoint_to_text(ck));
            ordered_json m{{"train_rows", res.history.train_rows}, {"heldout_rows", res.history.heldout_rows},
                           {"train_mae", res.history.train_mae},   {"heldout_mae", res.history.heldout_mae},
                           {"mu", c.surrogate.mu},                 {"probe_pairs", viol.pairs},
                           {"violations", viol.violations},        {"violation_rate", viol.rate()},
                           {"seconds", secs}};
            write_out(g, "surrogate.json", m.dump(2) + "\n");
            std::cout << "wrote " << p << "\n"
                      << std::fixed << std::setprecision(4) << "train MAE " << res.history.train_mae
                      << "  held-out MAE " << res.history.heldout_mae << " (" << res.history.heldout_rows
                      << " rows)\nmonotonicity violations " << viol.violations << "/" << viol.pairs << " = "
                      << viol.rate() << " (mu " << c.surrogate.mu << ")  " << std::setprecision(1) << secs << "s\n";
            return 0;
        };
    });

    // train
    auto* tr = app.add_subcommand("train", "train one delay model");
    std::string tr_data, tr_arch = "ia_stgnn";
    tr->add_option("--data", tr_data, "dataset.jsonl (default: generate from config)");
    tr->add_option("--arch", tr_arch, "ia_stgnn | st_gnn | gcn_lstm | flat")->capture_default_str();
    tr->callback([&] {
        action = [&] {
            auto c = effective(g, "train");
            auto d = dataset_for(c, tr_data);
            auto mcfg = c.model;
            mcfg.arch = arch_of(tr_arch);
            auto res = model::train(mcfg, c.train, harness::samples(d, harness::Split::Train),
                                    harness::samples(d, harness::Split::Val),
                                    [&](const model::EpochRecord& r) { print_epoch(tr_arch, r); });
            const auto id = model_id_of(res.model);
            auto ck = res.model.to_checkpoint(id);
            ck.extra = {{"dataset_hash", d.hash()},
                        {"train", c.train.to_json()},
                        {"best_epoch", res.best_epoch},
                        {"best_val_mae", res.best_val_mae}};
            auto p = write_out(g, "model.ckpt.json", num::checkpoint_to_text(ck));
            std::string hist;
            for (const auto& r : res.history) hist += history_json(r).dump() + "\n";
            write_out(g, "train_history.jsonl", hist);
            std::cout << "wrote " << p << " (model id " << id << ")\n"
                      << "best epoch " << res.best_epoch << "  val MAE " << std::fixed << std::setprecision(3)
                      << res.best_val_mae << "  " << std::setprecision(1) << res.seconds << "s\n";
            return 0;
        };
    });

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a trained delay model");
    std::string ev_model, ev_data, ev_split = "test";
    ev->add_option("--model", ev_model, "model checkpoint from `stcg train`");
    ev->add_option("--data", ev_data, "dataset.jsonl (default: generate from config)");
    ev->add_option("--split", ev_split, "train | val | test")->capture_default_str();
    ev->callback([&] {
        action = [&] {
            auto c = effective(g, "eval");
            auto m = load_model(ev_model);
            harness::Split split = harness::Split::Test;
            if (ev_split == "train") split = harness::Split::Train;
            else if (ev_split == "val") split = harness::Split::Val;
            else if (ev_split != "test") throw CliError("--split must be train, val or test");
            auto d = dataset_for(c, ev_data);
            auto f = harness::predictor_of(m);
            std::vector<harness::MetricsReport> rows{
                harness::evaluate(m.kind(), f, d, split, c.pipeline, c.jobs),
                harness::evaluate("oracle", harness::oracle_predictor(c.pipeline), d, split, c.pipeline, c.jobs)};
            auto dir = harness::weapon_direction(f, d, split, c.pipeline, true, 1.0, c.jobs);
            std::cout << harness::format_table(rows) << std::fixed << std::setprecision(3)
                      << "weapon-upgrade direction agreement " << dir.rate() << " (" << dir.agree << "/" << dir.pairs
                      << " decisive pairs)\n";
            ordered_json j{{"model_id", num::load_checkpoint(ev_model).model_id},
                           {"dataset_hash", d.hash()},
                           {"rows", ordered_json::array()},
                           {"direction", {{"pairs", dir.pairs}, {"agree", dir.agree}, {"rate", dir.rate()}}}};
            for (const auto& r : rows) j["rows"].push_back(harness::to_json(r));
            write_out(g, "eval.json", j.dump(2) + "\n");
            std::string tsv = "model\tn\tmae\trmse\ttop5_acc\tcf_spread\tcf_within_band\n";
            for (const auto& r : rows) {
                std::ostringstream os;
                os << std::setprecision(17) << r.model << '\t' << r.n << '\t' << r.mae << '\t' << r.rmse << '\t'
                   << r.top5_acc << '\t' << r.cf_spread << '\t' << r.cf_within_band << '\n';
                tsv += os.str();
            }
            write_out(g, "eval.tsv", tsv);
            return 0;
        };
    });

    // ablate
    auto* ab = app.add_subcommand("ablate", "train and compare ia_stgnn against its ablations");
    std::string ab_data;
    bool ab_no_l0 = false;
    ab->add_option("--data", ab_data, "dataset.jsonl (default: generate from config)");
    ab->add_flag("--no-lambda0", ab_no_l0, "skip the lambda = 0 stability run");
    ab->callback([&] {
        action = [&] {
            auto c = effective(g, "ablate");
            auto d = dataset_for(c, ab_data);
            harness::AblationOptions opt;
            opt.include_lambda0 = !ab_no_l0;
            opt.jobs = c.jobs;
            opt.on_epoch = print_epoch;
            auto res = harness::run_ablations(d, c.model, c.train, c.pipeline, opt);
            std::cout << harness::format_table(res.rows);
            auto mae = [&](const std::string& n) {
                for (const auto& r : res.rows)
                    if (r.model == n) return r.mae;
                return std::nan("");
            };
            const double ia = mae("ia_stgnn"), blind = std::min(mae("st_gnn"), mae("gcn_lstm")), flat = mae("flat");
            std::cout << std::fixed << std::setprecision(1) << "ia_stgnn vs best blind: "
                      << 100.0 * (blind - ia) / blind << "% lower MAE; vs flat: " << 100.0 * (flat - ia) / flat
                      << "% lower MAE; total " << res.seconds << "s\n";
            ordered_json j{{"dataset_hash", d.hash()}, {"seconds", res.seconds}, {"rows", ordered_json::array()}};
            for (const auto& r : res.rows) j["rows"].push_back(harness::to_json(r));
            write_out(g, "ablation.json", j.dump(2) + "\n");
            std::string tsv = "model\tn\tmae\trmse\ttop5_acc\tcf_spread\tcf_within_band\ttrain_seconds\n";
            for (const auto& r : res.rows) {
                std::ostringstream os;
                os << std::setprecision(17) << r.model << '\t' << r.n << '\t' << r.mae << '\t' << r.rmse << '\t'
                   << r.top5_acc << '\t' << r.cf_spread << '\t' << r.cf_within_band << '\t' << r.train_seconds
                   << '\n';
                tsv += os.str();
            }
            write_out(g, "ablation.tsv", tsv);
            return 0;
        };
    });

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op and the full model loss");
    gc->callback([&] {
        action = [&] {
            auto c = effective(g, "gradcheck");
            auto reports = checks::gradcheck_ops(c.seed);
            for (auto a : {model::Arch::IaStgnn, model::Arch::StGnn, model::Arch::GcnLstm, model::Arch::Flat})
                reports.push_back(checks::gradcheck_model_loss(a, c.seed));
            double worst = 0;
            bool ok = true;
            ordered_json j = ordered_json::array();
            for (const auto& r : reports) {
                std::printf("%-20s max rel %.3e  (%zu elements)%s\n", r.name.c_str(), r.report.max_rel_error,
                            r.report.checked, r.report.passed ? "" : "  FAIL");
                worst = std::max(worst, r.report.max_rel_error);
                ok = ok && r.report.passed;
                j.push_back({{"name", r.name},
                             {"max_rel_error", r.report.max_rel_error},
                             {"checked", r.report.checked},
                             {"passed", r.report.passed}});
            }
            write_out(g, "gradcheck.json", j.dump(2) + "\n");
            std::printf("max rel. error %.3e (tolerance 1e-4): %s\n", worst, ok ? "ok" : "FAILED");
            return ok ? 0 : 1;
        };
    });

    // ctg
    auto* ctg_cmd = app.add_subcommand("ctg", "exact queries on a causal graph file");
    ctg_cmd->require_subcommand(1);
    std::string ctg_file, q_target = "Y", q_treat = "W", q_out = "Y", q_med = "M", q_w1, q_w0, q_state, q_records;
    std::vector<std::string> q_given, q_do;
    auto graph_arg = [&](CLI::App* sc) { sc->add_option("graph", ctg_file, "CTG text file")->required(); };
    auto load_graph = [&] { return ctg::read_ctg(read_file(ctg_file)); };

    auto* cq = ctg_cmd->add_subcommand("query", "P(target | evidence) on the graph after do()");
    graph_arg(cq);
    cq->add_option("--target", q_target)->capture_default_str();
    cq->add_option("--given", q_given, "evidence NAME=STATE");
    cq->add_option("--do", q_do, "intervention NAME=STATE");
    cq->callback([&] {
        action = [&] {
            auto gph = load_graph();
            auto doa = parse_assign(q_do, "--do");
            if (!doa.empty()) gph = ctg::intervene(gph, doa);
            auto dist = ctg::joint_query(gph, q_target, parse_assign(q_given, "--given"));
            const auto& states = gph.node(q_target).states;
            ordered_json j;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                std::printf("P(%s=%s) = %.12g\n", q_target.c_str(), states[i].c_str(), dist[i]);
                j[states[i]] = dist[i];
            }
            write_out(g, "ctg.json", j.dump(2) + "\n");
            return 0;
        };
    });

    auto* ce = ctg_cmd->add_subcommand("effect", "E[outcome | do(treatment=w1)] - E[outcome | do(treatment=w0)]");
    graph_arg(ce);
    ce->add_option("--treatment", q_treat)->capture_default_str();
    ce->add_option("--outcome", q_out)->capture_default_str();
    ce->add_option("--w1", q_w1, "treated state (default: last state)");
    ce->add_option("--w0", q_w0, "reference state (default: first state)");
    ce->callback([&] {
        action = [&] {
            auto gph = load_graph();
            const auto& st = gph.node(q_treat).states;
            const auto w1 = q_w1.empty() ? st.back() : q_w1, w0 = q_w0.empty() ? st.front() : q_w0;
            const double v = ctg::causal_effect(gph, q_treat, w1, w0, q_out);
            std::printf("%.10g\n", v);
            write_out(g, "ctg.json",
                      ordered_json{{"effect", v}, {"treatment", q_treat}, {"w1", w1}, {"w0", w0}, {"outcome", q_out}}
                              .dump(2) +
                          "\n");
            return 0;
        };
    });

    auto* cte = ctg_cmd->add_subcommand("te", "mediated total effect through one mediator");
    graph_arg(cte);
    cte->add_option("--treatment", q_treat)->capture_default_str();
    cte->add_option("--mediator", q_med)->capture_default_str();
    cte->add_option("--outcome", q_out)->capture_default_str();
    cte->add_option("--state", q_state, "treatment state (default: last state)");
    cte->callback([&] {
        action = [&] {
            auto gph = load_graph();
            const auto s = q_state.empty() ? gph.node(q_treat).states.back() : q_state;
            auto te = ctg::mediated_total_effect(gph, q_treat, q_med, q_out, s);
            for (const auto& w : te.warnings) std::cerr << "warning: " << w << '\n';
            std::printf("%.10g\n", te.value);
            write_out(g, "ctg.json", ordered_json{{"te", te.value}, {"warnings", te.warnings}}.dump(2) + "\n");
            return 0;
        };
    });

    auto* cgap = ctg_cmd->add_subcommand("gap", "E[outcome | do(treatment=s)] next to E[outcome | treatment=s]");
    graph_arg(cgap);
    cgap->add_option("--treatment", q_treat)->capture_default_str();
    cgap->add_option("--outcome", q_out)->capture_default_str();
    cgap->add_option("--state", q_state, "treatment state (default: last state)");
    cgap->callback([&] {
        action = [&] {
            auto gph = load_graph();
            const auto s = q_state.empty() ? gph.node(q_treat).states.back() : q_state;
            auto r = ctg::do_vs_observe_gap(gph, q_treat, s, q_out);
            std::printf("p_do %.10g\np_obs %.10g\n", r.p_do, r.p_obs);
            write_out(g, "ctg.json", ordered_json{{"p_do", r.p_do}, {"p_obs", r.p_obs}}.dump(2) + "\n");
            return 0;
        };
    });

    auto* cl = ctg_cmd->add_subcommand("learn", "refit CPTs from records (JSON Lines of {node: state})");
    graph_arg(cl);
    cl->add_option("--records", q_records, "records file")->required();
    cl->callback([&] {
        action = [&] {
            auto gph = load_graph();
            std::vector<ctg::Assignment> recs;
            std::istringstream in(read_file(q_records));
            for (std::string line; std::getline(in, line);)
                if (!line.empty()) recs.push_back(json::parse(line).get<ctg::Assignment>());
            auto learned = ctg::learn_cpts(gph.nodes(), recs);
            const auto text = ctg::write_ctg(learned);
            write_out(g, "learned.ctg", text);
            std::cout << text;
            return 0;
        };
    });

    // sdi
    auto* sd = app.add_subcommand("sdi", "recovery stages, critical path and SDI");
    std::string sd_scen, sd_w;
    std::size_t sd_index = 0;
    std::vector<std::string> sd_rd;
    sd->add_option("--scenario", sd_scen, "scenario JSONL (default: dataset item 0 under the seed)");
    sd->add_option("--index", sd_index, "line in the scenario file");
    sd->add_option("--w", sd_w, "intervention JSON (or @file); default: the scenario's own");
    sd->add_option("--rd", sd_rd, "skip the scenario and set damage directly: ROLE=rd");
    sd->callback([&] {
        action = [&] {
            auto c = effective(g, "sdi");
            std::map<graph::ModuleRole, double> rd;
            if (!sd_rd.empty()) {
                for (const auto& [k, v] : parse_assign(sd_rd, "--rd")) {
                    auto r = graph::module_role_from(k);
                    if (!r) throw CliError("unknown module role '" + k + "'");
                    rd[*r] = std::stod(v);
                }
            } else {
                auto s = scenario_for(c, sd_scen, sd_index);
                rd = harness::ground_truth(s, w_for(s, sd_w), c.pipeline.physics, c.pipeline.delay, c.pipeline.gen).rd;
            }
            auto durs = delay::stage_durations(rd, c.pipeline.delay.stages);
            auto plan = delay::recovery_delay(durs);
            const double v = delay::sdi(durs, c.pipeline.delay.sdi);
            ordered_json stages = ordered_json::array();
            for (const auto& d : durs) {
                std::printf("%-22s %8.3f days\n", d.id.c_str(), d.days);
                stages.push_back({{"id", d.id}, {"days", d.days}});
            }
            std::string cp;
            for (const auto& id : plan.critical_path) cp += (cp.empty() ? "" : " -> ") + id;
            std::printf("critical path: %s\ntotal delay %.3f days (label %.3f)\nSDI %.6f\n", cp.c_str(),
                        plan.total_delay, delay::clamp_label(plan.total_delay, c.pipeline.delay), v);
            write_out(g, "sdi.json",
                      ordered_json{{"stages", stages},
                                   {"critical_path", plan.critical_path},
                                   {"total_delay", plan.total_delay},
                                   {"sdi", v}}
                              .dump(2) +
                          "\n");
            return 0;
        };
    });

    // grid
    auto* gr = app.add_subcommand("grid", "weapon x path x structure sensitivity grid");
    std::string gr_model, gr_scen;
    std::size_t gr_index = 0;
    gr->add_option("--model", gr_model, "model checkpoint");
    gr->add_option("--scenario", gr_scen, "scenario JSONL (default: dataset item 0 under the seed)");
    gr->add_option("--index", gr_index, "line in the scenario file");
    gr->callback([&] {
        action = [&] {
            auto c = effective(g, "grid");
            auto m = load_model(gr_model);
            auto s = scenario_for(c, gr_scen, gr_index);
            auto stacks = physics::default_stacks(c.pipeline.physics);
            harness::GridAxes axes;
            for (const auto& mu : s.registries.munitions) axes.weapons.push_back(mu.id);
            for (const auto& p : s.registries.paths) axes.paths.push_back(p.id);
            for (const auto& st : stacks) axes.structures.push_back(st.id);
            auto grid = harness::sensitivity_grid(harness::predictor_of(m), s, axes, stacks);
            for (std::size_t p = 0; p < axes.paths.size(); ++p) {
                std::printf("path %s (y_hat days; rows weapon, columns structure)\n%-12s",
                            s.registries.path(axes.paths[p])->name.c_str(), "");
                for (const auto& st : stacks) std::printf(" %9.9s", st.name.c_str());
                std::printf("\n");
                for (std::size_t w = 0; w < axes.weapons.size(); ++w) {
                    std::printf("%-12s", s.registries.munition(axes.weapons[w])->name.c_str());
                    for (std::size_t k = 0; k < axes.structures.size(); ++k) std::printf(" %9.2f", grid.at(w, p, k));
                    std::printf("\n");
                }
            }
            write_out(g, "grid.json", harness::to_json(grid).dump(2) + "\n");
            return 0;
        };
    });

    // recommend
    auto* rc = app.add_subcommand("recommend", "rank candidate interventions on one scenario");
    std::string rc_model, rc_scen, rc_cands, rc_obj = "max_delay";
    std::size_t rc_index = 0, rc_top = 5;
    rc->add_option("--model", rc_model, "model checkpoint");
    rc->add_option("--scenario", rc_scen, "scenario JSONL (default: dataset item 0 under the seed)");
    rc->add_option("--index", rc_index, "line in the scenario file");
    rc->add_option("--candidates", rc_cands,
                   "JSON array of {id, w} (default: every weapon x path x sync mode on the scenario's W)");
    rc->add_option("--objective", rc_obj, "max_delay | max_sdi")->capture_default_str();
    rc->add_option("--top-k", rc_top, "rows to keep (0 = all)")->capture_default_str();
    rc->callback([&] {
        action = [&] {
            auto c = effective(g, "recommend");
            auto m = load_model(rc_model);
            auto s = scenario_for(c, rc_scen, rc_index);
            auto obj = harness::objective_from(rc_obj);
            if (!obj) throw CliError("--objective must be max_delay or max_sdi");
            std::vector<harness::Candidate> cands;
            if (!rc_cands.empty()) {
                auto j = json::parse(read_file(rc_cands));
                for (std::size_t i = 0; i < j.size(); ++i)
                    cands.push_back({j[i].value("id", static_cast<int>(i)),
                                     graph::intervention_from_json(j[i].at("w"), "candidates[" + std::to_string(i) +
                                                                                     "].w")});
            } else {
                int id = 0;
                for (const auto& mu : s.registries.munitions)
                    for (const auto& p : s.registries.paths)
                        for (auto sm : {graph::SyncMode::Synchronized, graph::SyncMode::Staggered}) {
                            auto w = s.current_intervention();
                            w.weapon_class = mu.id;
                            w.path_strategy = p.id;
                            w.sync_mode = sm;
                            cands.push_back({id++, w});
                        }
            }
            auto ranked = harness::recommend(m, s, cands, *obj, rc_top, c.pipeline);
            std::printf("%-4s %-4s %-10s %-12s %-12s %10s %10s\n", "rank", "id", "weapon", "path", "sync", "score",
                        "y_hat");
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto& r = ranked[i];
                std::printf("%-4zu %-4d %-10s %-12s %-12s %10.4f %10.2f\n", i + 1, r.id,
                            s.registries.munition(r.w.weapon_class)->name.c_str(),
                            s.registries.path(r.w.path_strategy)->name.c_str(), graph::to_string(r.w.sync_mode),
                            r.score, r.y_hat);
            }
            write_out(g, "recommend.json",
                      ordered_json{{"objective", rc_obj}, {"ranked", harness::to_json(ranked)}}.dump(2) + "\n");
            return 0;
        };
    });

    // serve
    auto* sv = app.add_subcommand("serve", "run the counterfactual sandbox HTTP service");
    std::string sv_model, sv_host, sv_journal;
    int sv_port = -1;
    sv->add_option("--model", sv_model, "model checkpoint (prediction endpoints answer 409 without one)");
    sv->add_option("--host", sv_host, "listen address (default: config service.host)");
    sv->add_option("--port", sv_port, "listen port, 0 = any free port (default: config service.port)");
    sv->add_option("--journal-dir", sv_journal, "append one JSONL journal per session here");
    sv->callback([&] {
        action = [&] {
            auto c = effective(g, "serve");
            std::optional<model::Model> m;
            std::string mid;
            if (!sv_model.empty()) {
                auto ck = num::load_checkpoint(sv_model);
                m = model::Model::from_checkpoint(ck);
                mid = ck.model_id;
            }
            service::ServiceOptions opt;
            opt.seed = c.seed;
            opt.journal_dir = sv_journal.empty() ? c.service.journal_dir : sv_journal;
            service::Service svc(c.pipeline, std::move(m), mid, opt);
            service::HttpServer http(svc, c.service.threads);
            const auto host = sv_host.empty() ? c.service.host : sv_host;
            const int port = http.bind(host, sv_port >= 0 ? sv_port : c.service.port);
            if (port < 0) throw CliError("cannot bind " + host + ":" + std::to_string(sv_port));
            std::cout << "listening on http://" << host << ":" << port << " model "
                      << (mid.empty() ? "<none>" : mid) << std::endl;
            http.listen();
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    g.seed_given = seed_opt->count() > 0;
    try {
        return action();
    } catch (const std::exception& e) {
        std::cerr << "stcg: error: " << e.what() << '\n';
        return 1;
    }
}
