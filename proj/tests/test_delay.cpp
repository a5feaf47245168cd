#include "stcg/delay.hpp"
#include "stcg/rng.hpp"

#include <doctest.h>

#include <functional>
#include <map>

using namespace stcg::delay;
using stcg::graph::ModuleRole;

namespace {

// Longest path by enumerating every source-to-sink path.
double brute_longest(const std::vector<StageDuration>& d) {
    std::map<std::string, const StageDuration*> by;
    for (const auto& s : d) by[s.id] = &s;
    std::function<double(const std::string&)> best = [&](const std::string& id) {
        double m = 0;
        for (const auto& dep : by[id]->deps) m = std::max(m, best(dep));
        return m + by[id]->days;
    };
    double out = 0;
    for (const auto& s : d) out = std::max(out, best(s.id));
    return out;
}

} // namespace

TEST_CASE("stage durations follow base * (1 + sensitivity * rd)") {
    auto cfg = default_delay_config();
    std::map<ModuleRole, double> rd{{ModuleRole::MainControl, 0.5},
                                    {ModuleRole::Ventilation, 0.0},
                                    {ModuleRole::Power, 1.0},
                                    {ModuleRole::Centrifuge, 0.0}};
    auto d = stage_durations(rd, cfg.stages);
    REQUIRE(d.size() == 4);
    CHECK(d[0].days == doctest::Approx(20 * 1.75));
    CHECK(d[1].days == doctest::Approx(25));
    CHECK(d[2].days == doctest::Approx(30 * 2.5));
    CHECK(d[3].days == doctest::Approx(40));
    auto plan = recovery_delay(d);
    CHECK(plan.total_delay == doctest::Approx(35 + 75 + 40));
    CHECK(plan.critical_path == std::vector<std::string>{"StructuralClearing", "ElectricalRewiring", "CentrifugeReconfig"});
}

TEST_CASE("uniform rd 0.5 on the defaults, and a missing driver is an error") {
    auto cfg = default_delay_config();
    std::map<ModuleRole, double> rd{{ModuleRole::MainControl, 0.5},
                                    {ModuleRole::Ventilation, 0.5},
                                    {ModuleRole::Power, 0.5},
                                    {ModuleRole::Centrifuge, 0.5}};
    auto d = stage_durations(rd, cfg.stages);
    const double want[] = {35, 43.75, 52.5, 70};
    for (int i = 0; i < 4; ++i) CHECK(d[i].days == doctest::Approx(want[i]).epsilon(1e-14));
    rd.erase(ModuleRole::Ventilation);
    try {
        stage_durations(rd, cfg.stages);
        FAIL("expected DelayError");
    } catch (const DelayError& e) {
        CHECK(std::string(e.what()).find("VentilationRebuild") != std::string::npos);
    }
}

TEST_CASE("critical path equals brute-force path enumeration on random DAGs") {
    stcg::Rng rng(8);
    for (int k = 0; k < 300; ++k) {
        const int n = rng.uniform_int(1, 7);
        std::vector<StageDuration> d;
        for (int i = 0; i < n; ++i) {
            StageDuration s{"S" + std::to_string(i), rng.uniform(0, 50), {}};
            for (int j = 0; j < i; ++j)
                if (rng.bernoulli(0.4)) s.deps.push_back("S" + std::to_string(j));
            d.push_back(s);
        }
        rng.shuffle(d);
        auto plan = recovery_delay(d);
        CHECK(plan.total_delay == doctest::Approx(brute_longest(d)).epsilon(1e-13));
        double along = 0;
        for (const auto& id : plan.critical_path)
            for (const auto& s : d)
                if (s.id == id) along += s.days;
        CHECK(along == doctest::Approx(plan.total_delay).epsilon(1e-13));
    }
}

TEST_CASE("cycles and unknown dependencies are rejected") {
    CHECK_THROWS_AS(recovery_delay({{"A", 1, {"B"}}, {"B", 1, {"A"}}}), DelayError);
    CHECK_THROWS_AS(recovery_delay({{"A", 1, {"Z"}}}), DelayError);
}

TEST_CASE("SDI: weights sum to one; all stages at the window gives exactly 1") {
    SdiConfig cfg;
    double s = 0;
    for (const auto& [k, v] : cfg.weights) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    std::vector<StageDuration> d;
    for (const auto& [id, grp] : cfg.stage_group) d.push_back({id, cfg.t_window, {}});
    CHECK(sdi(d, cfg) == 1.0);
    cfg.elasticity = 0.1;
    CHECK(sdi(d, cfg) == doctest::Approx(1.1));
    cfg.weights["power"] = 0.5;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("SDI is non-decreasing in each stage duration and in elasticity") {
    stcg::Rng rng(12);
    SdiConfig cfg;
    auto base = default_delay_config();
    std::size_t bad = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<StageDuration> d;
        for (const auto& st : base.stages) d.push_back({st.id, rng.uniform(0, 200), st.deps});
        cfg.elasticity = rng.uniform(-0.2, 0.2);
        const double v = sdi(d, cfg);
        auto up = d;
        up[rng.uniform_int(0, 3)].days += rng.uniform(0, 30);
        if (sdi(up, cfg) < v) ++bad;
        auto c2 = cfg;
        c2.elasticity = std::min(0.2, cfg.elasticity + 0.05);
        if (sdi(d, c2) < v) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("label clamp") {
    DelayConfig c;
    CHECK(clamp_label(10, c) == 45);
    CHECK(clamp_label(400, c) == 365);
    CHECK(clamp_label(100, c) == 100);
}
