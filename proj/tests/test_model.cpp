#include "stcg/checks.hpp"
#include "stcg/harness.hpp"
#include "stcg/model.hpp"
#include "stcg/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace stcg;
using namespace stcg::model;

namespace {

graph::Scenario generated(std::uint64_t seed) {
    Rng r(seed, 1);
    return harness::sample_scenario("g", harness::default_registries(), {}, {}, r);
}

ModelConfig default_for(Arch a) {
    ModelConfig c;
    c.arch = a;
    c.intervention_width = graph::intervention_width(harness::default_registries());
    return c;
}

graph::InterventionVector other_w(const graph::Scenario& s) {
    auto w = s.current_intervention();
    w.weapon_class = (w.weapon_class + 1) % 4;
    w.path_strategy = (w.path_strategy + 1) % 3;
    w.release_window = std::fmod(w.release_window + 20.0, 48.0);
    std::reverse(w.target_priority.begin(), w.target_priority.end());
    return w;
}

} // namespace

TEST_CASE("zero-initialized FiLM is the identity") {
    Rng r(1);
    std::vector<double> c(12), w(5);
    for (auto& v : c) v = r.uniform(-1, 1);
    for (auto& v : w) v = r.uniform(-1, 1);
    Tensor ctx({3, 4}, c), wt({1, 5}, w);
    auto out = fuse_intervention(ctx, wt, Tensor::zeros({5, 4}), Tensor::zeros({1, 4}), Tensor::zeros({5, 4}),
                                 Tensor::zeros({1, 4}));
    for (std::size_t i = 0; i < 12; ++i) CHECK(out.data()[i] == c[i]);
    // Non-zero G: ctx * (1 + w G)
    std::vector<double> g(20, 0.0);
    g[0] = 1.0;
    auto o2 = fuse_intervention(ctx, wt, Tensor({5, 4}, g), Tensor::zeros({1, 4}), Tensor::zeros({5, 4}),
                                Tensor::zeros({1, 4}));
    CHECK(o2.at(1, 0) == doctest::Approx(c[4] * (1 + w[0])));
    CHECK(o2.at(1, 1) == c[5]);
}

TEST_CASE("attention respects E_t: rows sum to one, non-arcs get exactly zero") {
    auto s = generated(3);
    Model m(default_for(Arch::IaStgnn), 120);
    auto p = m.predict_delay(s);
    const auto& snap = s.graph.snapshots.back();
    auto mask = attention_mask(snap);
    const std::size_t N = snap.nodes.size();
    for (std::size_t i = 0; i < N; ++i) CHECK(mask[i * N + i] == 0);
    for (const auto& e : snap.edges) CHECK(mask[snap.index_of(e.dst) * N + snap.index_of(e.src)] == 0);
    std::map<std::tuple<int, int, int, int>, double> rows;
    for (const auto& e : p.attention.edges) {
        CHECK(mask[snap.index_of(e.dst) * N + snap.index_of(e.src)] == 0);
        rows[{e.t, e.layer, e.head, e.dst}] += e.weight;
    }
    CHECK(rows.size() == s.graph.steps() * 2 * 4 * N);
    for (const auto& [k, v] : rows) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    auto top = p.attention.summary(5);
    CHECK(top.size() == 5);
    for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].weight >= top[i].weight);
    for (const auto& e : top) CHECK(e.src != e.dst);
}

TEST_CASE("temporal block is causal") {
    Rng r(2);
    TemporalParams tp;
    tp.dilations = {1, 2};
    for (int k = 0; k < 2; ++k) {
        std::vector<double> w(3 * 4 * 4), b(4);
        for (auto& v : w) v = r.uniform(-0.5, 0.5);
        for (auto& v : b) v = r.uniform(-0.5, 0.5);
        tp.w.emplace_back(num::Shape{3, 4, 4}, w);
        tp.bias.emplace_back(num::Shape{1, 4}, b);
    }
    std::vector<double> x(2 * 6 * 4);
    for (auto& v : x) v = r.uniform(-1, 1);
    auto y0 = temporal_forward(Tensor({2, 6, 4}, x), tp);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 4; t < 6; ++t)
            for (std::size_t c = 0; c < 4; ++c) x[(b * 6 + t) * 4 + c] += 1.0;
    auto y1 = temporal_forward(Tensor({2, 6, 4}, x), tp);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t c = 0; c < 4; ++c) CHECK(y0.data()[(b * 6 + t) * 4 + c] == y1.data()[(b * 6 + t) * 4 + c]);
}

TEST_CASE("encoder ignores W; readout sees it for aware variants only") {
    auto s = generated(5);
    auto alt = other_w(s);
    for (auto a : {Arch::IaStgnn, Arch::StGnn, Arch::GcnLstm, Arch::Flat}) {
        Model m(default_for(a), 120);
        auto p = m.params().leaves(false);
        auto e0 = m.encode(p, s), e1 = m.encode(p, s.with_intervention(alt));
        auto d0 = e0.seq.defined() ? e0.seq : e0.final;
        auto d1 = e1.seq.defined() ? e1.seq : e1.final;
        CHECK(std::equal(d0.data().begin(), d0.data().end(), d1.data().begin()));
        auto ys = m.predict_many(s, {s.current_intervention(), alt});
        CHECK(ys[0] == m.predict(s, s.current_intervention()));
        CHECK(ys[1] == m.predict(s, alt));
        CHECK(ys[0] == m.predict_delay(s).y_hat);
        if (m.uses_intervention())
            CHECK(ys[0] != ys[1]);
        else
            CHECK(ys[0] == ys[1]);
        auto [yf, yc] = m.counterfactual_predict(s, s.current_intervention());
        CHECK(yf == yc);
        CHECK(yf >= 45.0);
        CHECK(yf <= 365.0);
    }
}

TEST_CASE("checkpoint round-trip reproduces predictions bit for bit") {
    auto s = generated(7);
    for (auto a : {Arch::IaStgnn, Arch::GcnLstm, Arch::Flat}) {
        Model m(default_for(a), 150);
        auto back = Model::from_checkpoint(num::checkpoint_from_text(num::checkpoint_to_text(m.to_checkpoint("x"))));
        CHECK(back.predict_delay(s).y_hat == m.predict_delay(s).y_hat);
        CHECK(back.config().arch == a);
    }
    auto ck = Model(default_for(Arch::IaStgnn), 150).to_checkpoint("x");
    ck.config["embed_dim"] = 16;
    ck.config["heads"] = 4;
    CHECK_THROWS_AS(Model::from_checkpoint(ck), ModelError);
}

TEST_CASE("input checks name the problem") {
    Model m(default_for(Arch::IaStgnn), 120);
    auto s = generated(9);
    s.graph.snapshots[0].features.data[0] = NAN;
    CHECK_THROWS_AS(m.check_inputs(s), ModelError);
    auto t = checks::toy_scenario();
    CHECK_THROWS_AS(m.check_inputs(t), ModelError); // registry width differs
    auto cfg = default_for(Arch::IaStgnn);
    cfg.embed_dim = 30;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("full loss passes gradcheck for every variant") {
    for (auto a : {Arch::IaStgnn, Arch::StGnn, Arch::GcnLstm, Arch::Flat}) {
        auto r = checks::gradcheck_model_loss(a, 2);
        INFO(r.name << " " << r.report.max_rel_error);
        CHECK(r.report.passed);
    }
}

TEST_CASE("loss components: zero-lambda equals plain MSE plus beta term") {
    auto s0 = checks::toy_scenario(3, 1);
    auto cfg = checks::toy_model_config(Arch::IaStgnn, s0.registries);
    Model m(cfg, 100);
    auto alt = s0.current_intervention();
    alt.decoy = true;
    TrainSample a{&s0, 130.0, {alt}, {alt}};
    LossComponents lc;
    auto p = m.params().leaves(false);
    auto l = loss_total(m, p, {&a}, 0.0, 0.0, false, 0.25, 1, &lc);
    const double y = m.predict(s0, s0.current_intervention());
    CHECK(lc.reg == doctest::Approx((y - 130.0) * (y - 130.0)).epsilon(1e-12));
    CHECK(l.item() == doctest::Approx(lc.reg).epsilon(1e-12));
    loss_total(m, p, {&a}, 0.5, 0.0, false, 0.25, 1, &lc);
    const double yc = m.predict(s0, alt);
    CHECK(lc.cf == doctest::Approx((y - yc) * (y - yc)).epsilon(1e-10));
    CHECK(lc.total == doctest::Approx(lc.reg + 0.5 * lc.cf).epsilon(1e-12));
    CHECK(lc.pairs == 1);
    CHECK_THROWS(loss_total(m, p, {}, 0.0, 0.0, false, 0.25, 1, nullptr));
}

TEST_CASE("short training lowers validation MAE and is deterministic") {
    harness::PipelineConfig pc;
    auto d = harness::generate_dataset(3, 120, pc);
    auto cfg = default_for(Arch::IaStgnn);
    cfg.embed_dim = 16;
    TrainConfig tc;
    tc.epochs = 4;
    auto tr = harness::samples(d, harness::Split::Train), va = harness::samples(d, harness::Split::Val);
    double mean = 0;
    for (const auto& x : tr) mean += x.y / tr.size();
    const double before = mean_absolute_error(Model(cfg, mean), va);
    auto a = train(cfg, tc, tr, va), b = train(cfg, tc, tr, va);
    CHECK(a.history.size() == 4);
    CHECK(a.best_val_mae < before);
    CHECK(a.model.params() == b.model.params());
    CHECK(a.best_val_mae == mean_absolute_error(a.model, va));
}
