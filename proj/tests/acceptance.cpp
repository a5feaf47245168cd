// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "ctg_oracle.hpp"
#include "physics_props.hpp"

#include "stcg/checks.hpp"
#include "stcg/config.hpp"
#include "stcg/ctg.hpp"
#include "stcg/delay.hpp"
#include "stcg/harness.hpp"
#include "stcg/params.hpp"
#include "stcg/physics.hpp"
#include "stcg/scenario_io.hpp"
#include "stcg/service.hpp"
#include "stcg/surrogate.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

using namespace stcg;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

ctg::CausalGraph load_ctg(const std::string& name) {
    std::ifstream in(std::string(STCG_DATA_DIR) + "/ctg/" + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ctg::read_ctg(ss.str());
}

void ctg_oracle() {
    auto t0 = Clock::now();
    Rng rng(2024, 9);
    double worst = 0;
    for (int k = 0; k < 200; ++k) {
        auto nodes = oracle::random_dag(rng);
        ctg::CausalGraph g(nodes);
        for (const auto& tn : nodes) {
            const auto& e = nodes[rng.uniform_int(0, static_cast<int>(nodes.size()) - 1)].id;
            ctg::Assignment ev;
            if (e != tn.id) ev[e] = "1";
            auto got = ctg::joint_query(g, tn.id, ev), want = oracle::joint(nodes, tn.id, ev);
            for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
            if (e == tn.id) continue;
            auto gi = ctg::joint_query(ctg::intervene(g, {{e, "0"}}), tn.id);
            auto wi = oracle::joint(nodes, tn.id, {}, {{e, "0"}});
            for (std::size_t i = 0; i < gi.size(); ++i) worst = std::max(worst, std::abs(gi[i] - wi[i]));
        }
    }
    const double s = since(t0);
    report("ctg_oracle_equivalence", worst <= 1e-12 && s < 30, fmt("200 DAGs, max |diff| %.2e, %.2fs", worst, s));

    auto gap = ctg::do_vs_observe_gap(load_ctg("confounder.ctg"), "W", "1", "Y");
    report("ctg_do_vs_observe", std::abs(gap.p_do - 0.5) < 1e-12 && std::abs(gap.p_obs - 0.74) < 1e-12,
           fmt("p_do %.6f p_obs %.6f", gap.p_do, gap.p_obs));

    double tw = 0;
    for (int k = 0; k < 100; ++k) {
        auto nodes = oracle::fully_mediated(rng);
        ctg::CausalGraph g(nodes);
        for (const char* v : {"0", "1"}) {
            const double te = ctg::mediated_total_effect(g, "W", "M", "Y", v).value;
            tw = std::max(tw, std::abs(te - ctg::expectation(ctg::intervene(g, {{"W", v}}), "Y")));
        }
    }
    report("ctg_full_mediation", tw <= 1e-12, fmt("100 graphs, max |TE - E[Y|do(W)]| %.2e", tw));
}

void gradcheck() {
    auto t0 = Clock::now();
    double worst = 0;
    std::string where;
    for (const auto& r : checks::gradcheck_ops(1))
        if (r.report.max_rel_error >= worst) worst = r.report.max_rel_error, where = r.name;
    for (auto a : {model::Arch::IaStgnn, model::Arch::StGnn, model::Arch::GcnLstm, model::Arch::Flat}) {
        auto r = checks::gradcheck_model_loss(a, 1);
        if (r.report.max_rel_error >= worst) worst = r.report.max_rel_error, where = r.name;
    }
    const double s = since(t0);
    report("gradcheck", worst <= 1e-4 && s < 120,
           fmt("max rel. error %.2e, %.1fs", worst, s) + " (worst: " + where + ")");
}

void physics_props() {
    auto sw = props::physics_sweep(10000, 5);
    report("physics_properties", sw.calls >= 10000 && sw.violations() == 0,
           fmt("%.0f calls, %.0f violations, worst conservation %.1e", static_cast<double>(sw.calls),
               static_cast<double>(sw.violations()), sw.worst_conservation));
}

void sdi_props() {
    delay::SdiConfig cfg;
    double wsum = 0;
    for (const auto& [k, v] : cfg.weights) wsum += v;
    std::vector<delay::StageDuration> full;
    for (const auto& [id, grp] : cfg.stage_group) full.push_back({id, cfg.t_window, {}});
    const bool exact = delay::sdi(full, cfg) == 1.0;
    Rng rng(31, 5);
    auto base = delay::default_delay_config();
    std::size_t bad = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<delay::StageDuration> d;
        for (const auto& st : base.stages) d.push_back({st.id, rng.uniform(0, 200), st.deps});
        cfg.elasticity = rng.uniform(-0.2, 0.2);
        const double v = delay::sdi(d, cfg);
        auto up = d;
        up[rng.uniform_int(0, static_cast<int>(up.size()) - 1)].days += rng.uniform(0, 30);
        if (delay::sdi(up, cfg) < v) ++bad;
    }
    report("sdi_properties", std::abs(wsum - 1.0) < 1e-12 && exact && bad == 0,
           fmt("weight sum %.15f, all-at-window %.0f, %.0f monotonicity violations / 1000", wsum, exact ? 1.0 : 0.0,
               static_cast<double>(bad)));
}

void surrogate_check(const config::AppConfig& c) {
    auto rows = physics::batch_labels(physics::default_grid(c.pipeline.physics), c.pipeline.physics);
    auto t0 = Clock::now();
    auto res = surrogate::train_surrogate(rows, c.surrogate, c.pipeline.physics);
    auto viol = surrogate::monotonicity_violations(res.model, rows, c.pipeline.physics, c.surrogate, 1000, c.seed + 1);
    report("surrogate_fit_monotone", res.history.heldout_mae <= 0.05 && viol.rate() <= 0.05,
           fmt("held-out MAE %.4f, violation rate %.3f (mu %.1f), %.1fs", res.history.heldout_mae, viol.rate(),
               c.surrogate.mu, since(t0)));
}

struct Trained {
    harness::Dataset data;
    model::Model ia;
};

Trained ablation(const config::AppConfig& c) {
    auto t0 = Clock::now();
    auto d = harness::generate_dataset(c.seed, c.dataset_n, c.pipeline, c.jobs);
    harness::AblationOptions opt;
    opt.include_lambda0 = true;
    opt.jobs = c.jobs;
    auto res = harness::run_ablations(d, c.model, c.train, c.pipeline, opt);
    const double s = since(t0);
    std::printf("%s", harness::format_table(res.rows).c_str());
    auto row = [&](const std::string& n) -> std::size_t {
        for (std::size_t i = 0; i < res.rows.size(); ++i)
            if (res.rows[i].model == n) return i;
        throw std::runtime_error("missing ablation row " + n);
    };
    const auto& ia = res.rows[row("ia_stgnn")];
    const auto& l0 = res.rows[row("ia_stgnn_lambda0")];
    const double blind = std::min(res.rows[row("st_gnn")].mae, res.rows[row("gcn_lstm")].mae);
    const double flat = res.rows[row("flat")].mae;
    const double gain_blind = 1.0 - ia.mae / blind, gain_flat = 1.0 - ia.mae / flat;
    report("ablation_mae", gain_blind >= 0.20 && gain_flat >= 0.30 && s < 600,
           fmt("ia MAE %.3f; %.1f%% below best blind, %.1f%% below flat; %.0fs", ia.mae, 100 * gain_blind,
               100 * gain_flat, s));
    report("counterfactual_stability", ia.cf_within_band >= 0.80 && l0.cf_spread > ia.cf_spread,
           fmt("%.1f%% pairs within band %.2f, median spread %.4f vs lambda0 %.4f", 100 * ia.cf_within_band,
               c.pipeline.cf_band, ia.cf_spread, l0.cf_spread));

    Trained out{std::move(d), res.runs[row("ia_stgnn")].model};
    auto dir = harness::weapon_direction(harness::predictor_of(out.ia), out.data, harness::Split::Test, c.pipeline,
                                         true, 1.0, c.jobs);
    report("direction_agreement", dir.rate() >= 0.90,
           fmt("%.3f over %.0f decisive pairs", dir.rate(), static_cast<double>(dir.pairs)));
    return out;
}

void determinism(const config::AppConfig& c) {
    auto d1 = harness::generate_dataset(c.seed, 300, c.pipeline, 1);
    auto d2 = harness::generate_dataset(c.seed, 300, c.pipeline, 1);
    auto grid = physics::default_grid(c.pipeline.physics);
    const auto l1 = harness::fnv1a_hex(physics::labels_to_tsv(physics::batch_labels(grid, c.pipeline.physics)));
    const auto l2 = harness::fnv1a_hex(physics::labels_to_tsv(physics::batch_labels(grid, c.pipeline.physics)));
    auto tc = c.train;
    tc.epochs = 2;
    auto run = [&] {
        auto r = model::train(c.model, tc, harness::samples(d1, harness::Split::Train),
                              harness::samples(d1, harness::Split::Val));
        return harness::fnv1a_hex(num::checkpoint_to_text(r.model.to_checkpoint("det")));
    };
    const auto m1 = run(), m2 = run();
    report("determinism", d1.hash() == d2.hash() && l1 == l2 && m1 == m2,
           "dataset " + d1.hash() + " labels " + l1 + " model " + m1);
}

void service_parity(const config::AppConfig& c, const Trained& t) {
    service::Service svc(c.pipeline, t.ia, "acceptance", {});
    service::HttpServer http(svc, 2);
    const int port = http.bind("127.0.0.1", 0);
    if (port <= 0) {
        report("service_parity", false, "could not bind a port");
        return;
    }
    std::thread th([&] { http.listen(); });
    httplib::Client cli("127.0.0.1", port);
    double worst = 0;
    std::size_t n = 0, errors = 0;
    std::vector<double> lat;
    for (auto i : t.data.indices(harness::Split::Test)) {
        if (n == 100) break;
        const auto& sc = t.data.items[i].scenario;
        auto cr = cli.Post("/session", json{{"scenario", graph::scenario_to_json(sc)}}.dump(), "application/json");
        if (!cr || cr->status != 201) {
            ++errors, ++n;
            continue;
        }
        const auto id = json::parse(cr->body)["session_id"].get<std::string>();
        auto t0 = Clock::now();
        auto pr = cli.Post("/session/" + id + "/predict", "", "application/json");
        lat.push_back(since(t0) * 1000);
        if (!pr || pr->status != 200) {
            ++errors, ++n;
            continue;
        }
        const double got = json::parse(pr->body)["y_hat_days"].get<double>();
        worst = std::max(worst, std::abs(got - t.ia.predict_delay(sc).y_hat));
        ++n;
    }
    http.stop();
    th.join();
    std::sort(lat.begin(), lat.end());
    const double med = lat.empty() ? 0 : lat[lat.size() / 2];
    report("service_parity", n == 100 && errors == 0 && worst <= 1e-9,
           fmt("%.0f scenarios over HTTP, max |diff| %.1e, %.0f errors", static_cast<double>(n), worst,
               static_cast<double>(errors)));
    std::printf("INFO  predict_latency_median       %.2f ms (soft budget 70 ms: %s)\n", med,
                med <= 70 ? "within" : "over");
}

} // namespace

int main() {
    auto c = config::defaults();
    c.finalize();
    auto t0 = Clock::now();
    ctg_oracle();
    gradcheck();
    physics_props();
    sdi_props();
    surrogate_check(c);
    determinism(c);
    auto trained = ablation(c);
    service_parity(c, trained);
    std::printf("%d criteria failed, %.0fs total\n", failures, since(t0));
    return failures == 0 ? 0 : 1;
}
