#include "stcg/checks.hpp"
#include "stcg/generator.hpp"
#include "stcg/graph.hpp"
#include "stcg/rng.hpp"
#include "stcg/scenario_io.hpp"

#include <doctest.h>

#include <cmath>

using namespace stcg;
using namespace stcg::graph;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& needle) {
    for (const auto& x : v)
        if (x.rule.find(needle) != std::string::npos || x.element.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("toy and generated scenarios validate") {
    CHECK(validate(checks::toy_scenario()).empty());
    Rng r(3, 1);
    for (int i = 0; i < 20; ++i) {
        auto s = harness::sample_scenario("s" + std::to_string(i), harness::default_registries(), {}, {}, r);
        INFO(format_violations(validate(s)));
        CHECK(validate(s).empty());
    }
}

TEST_CASE("validation catches each structural rule") {
    auto base = checks::toy_scenario();

    auto s = base;
    s.graph.snapshots[1].t = 1;
    CHECK(has_rule(validate(s), "strictly increasing"));

    s = base;
    s.graph.snapshots[0].edges.push_back({1, 99, EdgeKind::Coordination, 1.0});
    CHECK(has_rule(validate(s), "endpoint"));

    s = base;
    s.graph.snapshots[2].edges.push_back({1, 21, EdgeKind::StructuralCoupling, 1.0});
    CHECK(has_rule(validate(s), "mirrored"));

    s = base;
    s.graph.snapshots[1].nodes[0].kind = NodeKind::PathRelay;
    CHECK(has_rule(validate(s), "kind changed"));

    s = base;
    s.graph.snapshots[0].features.data[3] = NAN;
    CHECK(has_rule(validate(s), "non-finite"));

    s = base;
    s.graph.snapshots[0].interventions.target_priority = {11, 11};
    CHECK(has_rule(validate(s), "permutation"));

    s = base;
    for (auto& sn : s.graph.snapshots) sn.interventions.weapon_class = 42;
    CHECK(has_rule(validate(s), "unknown munition"));

    s = base;
    s.graph.snapshots.clear();
    CHECK(has_rule(validate(s), "T >= 1"));
}

TEST_CASE("encode_intervention layout") {
    auto s = checks::toy_scenario();
    auto w = s.current_intervention();
    auto v = encode_intervention(w, s.registries);
    REQUIRE(v.size() == intervention_width(s.registries));
    // 4 munitions, window, 2 sync, 1 path, 2 targets, decoy
    REQUIRE(v.size() == 4 + 1 + 2 + 1 + 2 + 1);
    CHECK(v[1] == 1.0);
    CHECK(v[0] + v[2] + v[3] == 0.0);
    CHECK(v[4] == doctest::Approx(12.0 / 48.0));
    CHECK(v[5] == 1.0);
    CHECK(v[6] == 0.0);
    CHECK(v[8] == 0.0);
    CHECK(v[9] == 0.5);
    CHECK(v[10] == 0.0);
    w.weapon_class = 17;
    CHECK_THROWS_AS(encode_intervention(w, s.registries), EncodingError);
}

TEST_CASE("release_step maps the window onto snapshot indices") {
    auto reg = checks::toy_scenario().registries;
    InterventionVector w;
    w.release_window = 0;
    CHECK(release_step(w, reg, 4) == 0);
    w.release_window = 12;
    CHECK(release_step(w, reg, 4) == 1);
    w.release_window = 47.9;
    CHECK(release_step(w, reg, 4) == 3);
    w.release_window = 200;
    CHECK(release_step(w, reg, 4) == 3);
}

TEST_CASE("scenario text round-trips exactly") {
    Rng r(5, 1);
    std::vector<Scenario> v;
    for (int i = 0; i < 5; ++i)
        v.push_back(harness::sample_scenario("s" + std::to_string(i), harness::default_registries(), {}, {}, r));
    auto text = write_scenarios(v);
    CHECK(read_scenarios(text) == v);
    CHECK(write_scenarios(read_scenarios(text)) == text);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("scenario reader reports the line and field path") {
    auto good = write_scenario(checks::toy_scenario());
    auto j = nlohmann::json::parse(good);
    j.erase("schema_version");
    try {
        read_scenarios(good + j.dump() + "\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.field() == "schema_version");
    }
    j = nlohmann::json::parse(good);
    j["snapshots"][1]["interventions"]["sync_mode"] = "sometimes";
    try {
        read_scenario(j.dump());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field().find("sync_mode") != std::string::npos);
    }
    j = nlohmann::json::parse(good);
    j["bogus"] = 1;
    CHECK_THROWS_AS(read_scenario(j.dump()), ParseError);
}

TEST_CASE("with_intervention replaces W in every snapshot only") {
    auto s = checks::toy_scenario();
    auto w = s.current_intervention();
    w.decoy = true;
    auto t = s.with_intervention(w);
    for (std::size_t i = 0; i < t.graph.steps(); ++i) {
        CHECK(t.graph.snapshots[i].interventions == w);
        CHECK(t.graph.snapshots[i].features == s.graph.snapshots[i].features);
    }
}
