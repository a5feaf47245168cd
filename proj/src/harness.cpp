#include "stcg/harness.hpp"

#include "stcg/rng.hpp"
#include "stcg/scenario_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <thread>

namespace stcg::harness {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

std::string Dataset::hash() const { return fnv1a_hex(dataset_to_jsonl(*this)); }

std::string Dataset::split_hash(Split s) const {
    std::string ids;
    for (auto i : indices(s)) ids += items[i].scenario.id + '\n';
    return fnv1a_hex(ids);
}

// -- generation ----------------------------------------------------------------

namespace {

std::vector<CfCandidate> make_candidates(const graph::Scenario& s, double y_true, const PipelineConfig& cfg,
                                         Rng& rng) {
    const auto& reg = s.registries;
    const auto& w = s.current_intervention();
    std::vector<CfCandidate> out;
    const char* kinds[] = {"weapon", "window", "sync", "path", "priority", "decoy"};
    const int n = std::clamp(cfg.gen.cf_candidates, 0, 6);
    for (int k = 0; k < n; ++k) {
        CfCandidate c;
        c.kind = kinds[k];
        c.w = w;
        switch (k) {
        case 0:
            if (reg.munitions.size() > 1) {
                auto pick = rng.uniform_int(0, static_cast<int>(reg.munitions.size()) - 2);
                std::vector<int> others;
                for (const auto& m : reg.munitions)
                    if (m.id != w.weapon_class) others.push_back(m.id);
                c.w.weapon_class = others[static_cast<std::size_t>(pick)];
            }
            break;
        case 1: c.w.release_window = rng.uniform(0.0, reg.window_horizon_h); break;
        case 2:
            c.w.sync_mode = w.sync_mode == graph::SyncMode::Synchronized ? graph::SyncMode::Staggered
                                                                            : graph::SyncMode::Synchronized;
            break;
        case 3:
            if (reg.paths.size() > 1) {
                auto pick = rng.uniform_int(0, static_cast<int>(reg.paths.size()) - 2);
                std::vector<int> others;
                for (const auto& p : reg.paths)
                    if (p.id != w.path_strategy) others.push_back(p.id);
                c.w.path_strategy = others[static_cast<std::size_t>(pick)];
            }
            break;
        case 4:
            for (int tries = 0; tries < 8 && c.w.target_priority == w.target_priority; ++tries)
                rng.shuffle(c.w.target_priority);
            break;
        case 5: c.w.decoy = !w.decoy; break;
        }
        c.y_true = ground_truth(s, c.w, cfg.physics, cfg.delay, cfg.gen).y;
        c.equivalent = std::abs(c.y_true - y_true) < cfg.gen.equivalence_tol_days;
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace

Dataset generate_dataset(std::uint64_t seed, std::size_t n, const PipelineConfig& cfg, int jobs) {
    if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");
    if (cfg.registries.munitions.empty()) throw std::invalid_argument("generate_dataset: munitions registry is empty");
    if (cfg.registries.paths.empty()) throw std::invalid_argument("generate_dataset: paths registry is empty");
    if (cfg.registries.targets.empty()) throw std::invalid_argument("generate_dataset: targets registry is empty");
    cfg.delay.sdi.validate();
    Dataset d;
    d.seed = seed;
    d.items.resize(n);
    const int width = std::max<int>(4, static_cast<int>(std::to_string(n - 1).size()));
    parallel_for(n, jobs, [&](std::size_t i) {
        Rng rng(seed, (streams::kDataset << 32) + i);
        std::string num = std::to_string(i);
        std::string id = "sc-" + std::string(static_cast<std::size_t>(std::max(0, width - int(num.size()))), '0') + num;
        auto& it = d.items[i];
        it.scenario = sample_scenario(id, cfg.registries, cfg.gen, cfg.physics, rng);
        auto gt = ground_truth(it.scenario, it.scenario.current_intervention(), cfg.physics, cfg.delay, cfg.gen);
        it.y_true = gt.y;
        it.sdi = gt.sdi;
        it.y = delay::clamp_label(gt.plan.total_delay + rng.normal(0.0, cfg.delay.noise_sigma), cfg.delay);
        it.candidates = make_candidates(it.scenario, it.y_true, cfg, rng);
    });
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng split_rng(seed, streams::kSplit);
    split_rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_frac * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_frac * static_cast<double>(n)));
    d.split.assign(n, Split::Test);
    for (std::size_t k = 0; k < n; ++k)
        d.split[order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    return d;
}

std::string dataset_to_jsonl(const Dataset& d) {
    std::string out;
    for (std::size_t i = 0; i < d.items.size(); ++i) {
        const auto& it = d.items[i];
        ordered_json j;
        j["split"] = to_string(d.split[i]);
        j["y"] = it.y;
        j["y_true"] = it.y_true;
        j["sdi"] = it.sdi;
        ordered_json cands = ordered_json::array();
        for (const auto& c : it.candidates)
            cands.push_back(ordered_json{{"kind", c.kind},
                                         {"w", graph::intervention_to_json(c.w)},
                                         {"y_true", c.y_true},
                                         {"equivalent", c.equivalent}});
        j["candidates"] = std::move(cands);
        j["scenario"] = graph::scenario_to_json(it.scenario);
        out += j.dump();
        out += '\n';
    }
    return out;
}

Dataset dataset_from_jsonl(const std::string& text, std::uint64_t seed) {
    Dataset d;
    d.seed = seed;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw graph::ParseError(ln, "", std::string("malformed JSON: ") + e.what());
        }
        try {
            DatasetItem it;
            const auto sp = j.at("split").get<std::string>();
            if (sp == "train")
                d.split.push_back(Split::Train);
            else if (sp == "val")
                d.split.push_back(Split::Val);
            else if (sp == "test")
                d.split.push_back(Split::Test);
            else
                throw graph::ParseError(ln, "split", "unknown split '" + sp + "'");
            it.y = j.at("y").get<double>();
            it.y_true = j.at("y_true").get<double>();
            it.sdi = j.at("sdi").get<double>();
            int k = 0;
            for (const auto& c : j.at("candidates")) {
                CfCandidate cc;
                cc.kind = c.at("kind").get<std::string>();
                cc.w = graph::intervention_from_json(c.at("w"), "candidates[" + std::to_string(k) + "].w", ln);
                cc.y_true = c.at("y_true").get<double>();
                cc.equivalent = c.at("equivalent").get<bool>();
                it.candidates.push_back(std::move(cc));
                ++k;
            }
            it.scenario = graph::scenario_from_json(j.at("scenario"), ln);
            d.items.push_back(std::move(it));
        } catch (const json::exception& e) {
            throw graph::ParseError(ln, "", e.what());
        }
    }
    return d;
}

std::vector<model::TrainSample> samples(const Dataset& d, Split s) {
    std::vector<model::TrainSample> out;
    for (auto i : d.indices(s)) {
        const auto& it = d.items[i];
        model::TrainSample ts;
        ts.scenario = &it.scenario;
        ts.y = it.y;
        for (const auto& c : it.candidates) {
            ts.cf_candidates.push_back(c.w);
            if (c.equivalent) ts.cf_tagged.push_back(c.w);
        }
        out.push_back(std::move(ts));
    }
    return out;
}

// -- metrics -------------------------------------------------------------------

BatchPredictor predictor_of(const model::Model& m) {
    return [&m](const graph::Scenario& s, const std::vector<graph::InterventionVector>& ws) {
        return m.predict_many(s, ws);
    };
}

BatchPredictor oracle_predictor(const PipelineConfig& cfg) {
    return [cfg](const graph::Scenario& s, const std::vector<graph::InterventionVector>& ws) {
        std::vector<double> out;
        for (const auto& w : ws) out.push_back(ground_truth(s, w, cfg.physics, cfg.delay, cfg.gen).y);
        return out;
    };
}

BatchPredictor constant_predictor(double value) {
    return [value](const graph::Scenario&, const std::vector<graph::InterventionVector>& ws) {
        return std::vector<double>(ws.size(), value);
    };
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

MetricsReport evaluate(const std::string& name, const BatchPredictor& f, const Dataset& d, Split s,
                       const PipelineConfig& cfg, int jobs) {
    const auto idx = d.indices(s);
    if (idx.empty()) throw std::invalid_argument(std::string("evaluate: split '") + to_string(s) + "' is empty");
    std::vector<double> yhat(idx.size());
    std::vector<std::vector<double>> spreads(idx.size());
    parallel_for(idx.size(), jobs, [&](std::size_t k) {
        const auto& it = d.items[idx[k]];
        std::vector<graph::InterventionVector> ws{it.scenario.current_intervention()};
        for (const auto& c : it.candidates)
            if (c.equivalent) ws.push_back(c.w);
        auto p = f(it.scenario, ws);
        yhat[k] = p[0];
        for (std::size_t j = 1; j < p.size(); ++j) spreads[k].push_back(std::abs(p[j] - p[0]) / p[0]);
    });
    MetricsReport r;
    r.model = name;
    r.n = idx.size();
    r.split_hash = d.split_hash(s);
    double se = 0.0, ae = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const double e = yhat[k] - d.items[idx[k]].y;
        ae += std::abs(e);
        se += e * e;
    }
    r.mae = ae / static_cast<double>(r.n);
    r.rmse = std::sqrt(se / static_cast<double>(r.n));

    std::vector<std::size_t> by_y(idx.size());
    for (std::size_t k = 0; k < by_y.size(); ++k) by_y[k] = k;
    std::stable_sort(by_y.begin(), by_y.end(),
                     [&](auto a, auto b) { return d.items[idx[a]].y > d.items[idx[b]].y; });
    const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.top_fraction * r.n)));
    std::size_t hits = 0;
    for (std::size_t k = 0; k < top; ++k) {
        const double y = d.items[idx[by_y[k]]].y;
        if (std::abs(yhat[by_y[k]] - y) / y <= cfg.top_rel_tol) ++hits;
    }
    r.top5_acc = static_cast<double>(hits) / static_cast<double>(top);

    std::vector<double> all;
    for (const auto& v : spreads) all.insert(all.end(), v.begin(), v.end());
    r.cf_pairs = all.size();
    r.cf_spread = median(all);
    r.cf_within_band =
        all.empty() ? 0.0
                    : static_cast<double>(std::count_if(all.begin(), all.end(),
                                                        [&](double x) { return x <= cfg.cf_band; })) /
                          static_cast<double>(all.size());
    return r;
}

DirectionReport weapon_direction(const BatchPredictor& f, const Dataset& d, Split s, const PipelineConfig& cfg,
                                 bool upgrade, double min_gap, int jobs) {
    const auto idx = d.indices(s);
    std::vector<int> decisive(idx.size(), 0), agree(idx.size(), 0);
    parallel_for(idx.size(), jobs, [&](std::size_t k) {
        const auto& sc = d.items[idx[k]].scenario;
        const auto w = sc.current_intervention();
        auto order = munitions_by_strength(sc.registries);
        auto pos = std::find(order.begin(), order.end(), w.weapon_class);
        if (pos == order.end()) return;
        if (upgrade ? pos + 1 == order.end() : pos == order.begin()) return;
        auto alt = w;
        alt.weapon_class = upgrade ? *(pos + 1) : *(pos - 1);
        const double dy = ground_truth(sc, alt, cfg.physics, cfg.delay, cfg.gen).y -
                          ground_truth(sc, w, cfg.physics, cfg.delay, cfg.gen).y;
        if (std::abs(dy) < min_gap) return;
        decisive[k] = 1;
        auto p = f(sc, {w, alt});
        const double dp = p[1] - p[0];
        agree[k] = (dp > 0.0 && dy > 0.0) || (dp < 0.0 && dy < 0.0);
    });
    DirectionReport r;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        r.pairs += decisive[k];
        r.agree += agree[k];
    }
    return r;
}

ordered_json to_json(const MetricsReport& r) {
    return ordered_json{{"model", r.model},
                        {"n", r.n},
                        {"mae", r.mae},
                        {"rmse", r.rmse},
                        {"top5_acc", r.top5_acc},
                        {"cf_spread", r.cf_spread},
                        {"cf_within_band", r.cf_within_band},
                        {"cf_pairs", r.cf_pairs},
                        {"split_hash", r.split_hash},
                        {"train_seconds", r.train_seconds}};
}

std::string format_table(const std::vector<MetricsReport>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(18) << "model" << std::right << std::setw(6) << "n" << std::setw(10) << "mae"
       << std::setw(10) << "rmse" << std::setw(8) << "top5" << std::setw(11) << "cf_spread" << std::setw(9)
       << "in_band" << std::setw(9) << "train_s" << "  split\n";
    os << std::fixed;
    for (const auto& r : rows)
        os << std::left << std::setw(18) << r.model << std::right << std::setw(6) << r.n << std::setprecision(3)
           << std::setw(10) << r.mae << std::setw(10) << r.rmse << std::setw(8) << r.top5_acc << std::setprecision(4)
           << std::setw(11) << r.cf_spread << std::setprecision(3) << std::setw(9) << r.cf_within_band
           << std::setprecision(1) << std::setw(9) << r.train_seconds << "  " << r.split_hash << '\n';
    return os.str();
}

// -- ablations -------------------------------------------------------------------

AblationResult run_ablations(const Dataset& d, const model::ModelConfig& base, const model::TrainConfig& tcfg,
                             const PipelineConfig& cfg, const AblationOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    auto train_set = samples(d, Split::Train);
    auto val_set = samples(d, Split::Val);
    struct Run {
        std::string name;
        model::Arch arch;
        double lambda;
    };
    std::vector<Run> runs{{"ia_stgnn", model::Arch::IaStgnn, tcfg.lambda},
                          {"st_gnn", model::Arch::StGnn, 0.0},
                          {"gcn_lstm", model::Arch::GcnLstm, 0.0},
                          {"flat", model::Arch::Flat, tcfg.lambda}};
    if (opt.include_lambda0) runs.push_back({"ia_stgnn_lambda0", model::Arch::IaStgnn, 0.0});
    AblationResult res;
    for (const auto& r : runs) {
        auto mc = base;
        mc.arch = r.arch;
        auto tc = tcfg;
        tc.lambda = r.lambda;
        model::EpochCallback cb;
        if (opt.on_epoch) cb = [&](const model::EpochRecord& e) { opt.on_epoch(r.name, e); };
        auto tr = model::train(mc, tc, train_set, val_set, cb);
        auto rep = evaluate(r.name, predictor_of(tr.model), d, Split::Test, cfg, opt.jobs);
        rep.train_seconds = tr.seconds;
        res.rows.push_back(rep);
        res.runs.push_back(std::move(tr));
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// -- grid ------------------------------------------------------------------------

SensitivityGrid sensitivity_grid(const BatchPredictor& f, const graph::Scenario& ref, const GridAxes& axes,
                                 const std::vector<physics::StackTemplate>& structures) {
    if (axes.weapons.empty() || axes.paths.empty() || axes.structures.empty())
        throw std::invalid_argument("sensitivity_grid: every axis needs at least one value");
    for (int w : axes.weapons)
        if (!ref.registries.munition(w))
            throw std::invalid_argument("sensitivity_grid: unknown munition id " + std::to_string(w));
    for (int p : axes.paths)
        if (!ref.registries.path(p)) throw std::invalid_argument("sensitivity_grid: unknown path id " + std::to_string(p));
    SensitivityGrid g;
    g.axes = axes;
    g.reference = ref.id;
    const std::size_t W = axes.weapons.size(), P = axes.paths.size(), S = axes.structures.size();
    g.values.assign(W * P * S, 0.0);
    std::vector<graph::InterventionVector> ws;
    for (int w : axes.weapons)
        for (int p : axes.paths) {
            auto alt = ref.current_intervention();
            alt.weapon_class = w;
            alt.path_strategy = p;
            ws.push_back(alt);
        }
    for (std::size_t k = 0; k < S; ++k) {
        auto it = std::find_if(structures.begin(), structures.end(),
                               [&](const auto& st) { return st.id == axes.structures[k]; });
        if (it == structures.end())
            throw std::invalid_argument("sensitivity_grid: unknown structure id " + std::to_string(axes.structures[k]));
        auto sc = apply_structure(ref, *it);
        auto vals = f(sc, ws);
        for (std::size_t i = 0; i < W * P; ++i) g.values[i * S + k] = vals[i];
    }
    return g;
}

ordered_json to_json(const SensitivityGrid& g) {
    ordered_json v = ordered_json::array();
    for (std::size_t w = 0; w < g.axes.weapons.size(); ++w) {
        ordered_json pw = ordered_json::array();
        for (std::size_t p = 0; p < g.axes.paths.size(); ++p) {
            ordered_json ps = ordered_json::array();
            for (std::size_t s = 0; s < g.axes.structures.size(); ++s) ps.push_back(g.at(w, p, s));
            pw.push_back(std::move(ps));
        }
        v.push_back(std::move(pw));
    }
    return ordered_json{{"reference", g.reference},
                        {"axes",
                         {{"weapons", g.axes.weapons}, {"paths", g.axes.paths}, {"structures", g.axes.structures}}},
                        {"values", std::move(v)}};
}

// -- recommendation ----------------------------------------------------------------

const char* to_string(Objective o) { return o == Objective::MaxDelay ? "max_delay" : "max_sdi"; }

std::optional<Objective> objective_from(const std::string& s) {
    if (s == "max_delay") return Objective::MaxDelay;
    if (s == "max_sdi") return Objective::MaxSdi;
    return std::nullopt;
}

std::vector<Ranked> recommend(const model::Model& m, const graph::Scenario& s, const std::vector<Candidate>& cands,
                              Objective obj, std::size_t top_k, const PipelineConfig& cfg) {
    if (cands.empty()) throw std::invalid_argument("recommend: at least one candidate required");
    std::vector<graph::InterventionVector> ws;
    for (const auto& c : cands) ws.push_back(c.w);
    auto y = m.predict_many(s, ws);
    auto att = m.predict_delay(s).attention.summary(3);
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        Ranked r;
        r.id = cands[i].id;
        r.w = cands[i].w;
        r.y_hat = y[i];
        r.score = obj == Objective::MaxDelay ? y[i] : ground_truth(s, cands[i].w, cfg.physics, cfg.delay, cfg.gen).sdi;
        r.attention = att;
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (top_k > 0 && out.size() > top_k) out.resize(top_k);
    return out;
}

ordered_json to_json(const std::vector<Ranked>& r) {
    ordered_json a = ordered_json::array();
    for (std::size_t i = 0; i < r.size(); ++i) {
        ordered_json att = ordered_json::array();
        for (const auto& e : r[i].attention)
            att.push_back(ordered_json{{"src", e.src}, {"dst", e.dst}, {"weight", e.weight}});
        a.push_back(ordered_json{{"rank", i + 1},
                                 {"id", r[i].id},
                                 {"score", r[i].score},
                                 {"y_hat", r[i].y_hat},
                                 {"w", graph::intervention_to_json(r[i].w)},
                                 {"attention", std::move(att)}});
    }
    return a;
}

} // namespace stcg::harness
