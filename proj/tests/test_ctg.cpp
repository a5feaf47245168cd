#include "ctg_oracle.hpp"

#include "stcg/ctg.hpp"
#include "stcg/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace stcg::ctg;

namespace {

CausalGraph load(const std::string& name) {
    std::ifstream in(std::string(STCG_DATA_DIR) + "/ctg/" + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return read_ctg(ss.str());
}

} // namespace

TEST_CASE("bundled chain: do(W=1) - do(W=0) on Y is 0.49") {
    auto g = load("chain.ctg");
    // 0.1*0.1 + 0.9*0.8 = 0.73 ; 0.8*0.1 + 0.2*0.8 = 0.24
    CHECK(causal_effect(g, "W", "1", "0", "Y") == doctest::Approx(0.49).epsilon(1e-14));
    CHECK(mediated_total_effect(g, "W", "M", "Y", "1").value == doctest::Approx(0.73).epsilon(1e-14));
}

TEST_CASE("bundled confounder: p_do 0.5, p_obs 0.74") {
    auto r = do_vs_observe_gap(load("confounder.ctg"), "W", "1", "Y");
    CHECK(std::abs(r.p_do - 0.5) < 1e-12);
    CHECK(std::abs(r.p_obs - 0.74) < 1e-12);
}

TEST_CASE("random DAGs agree with brute-force enumeration") {
    stcg::Rng rng(17, 9);
    for (int k = 0; k < 60; ++k) {
        auto nodes = oracle::random_dag(rng);
        CausalGraph g(nodes);
        const auto& t = nodes[rng.uniform_int(0, static_cast<int>(nodes.size()) - 1)].id;
        const auto& e = nodes[rng.uniform_int(0, static_cast<int>(nodes.size()) - 1)].id;
        Assignment ev;
        if (e != t) ev[e] = rng.bernoulli(0.5) ? "1" : "0";
        auto got = joint_query(g, t, ev), want = oracle::joint(nodes, t, ev);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
        auto gi = joint_query(intervene(g, {{e, "1"}}), t);
        auto wi = oracle::joint(nodes, t, {}, {{e, "1"}});
        for (std::size_t i = 0; i < gi.size(); ++i) CHECK(std::abs(gi[i] - wi[i]) < 1e-12);
        const double ce = causal_effect(g, e, "1", "0", t);
        CHECK(std::abs(ce - (oracle::expect(nodes, t, {}, {{e, "1"}}) - oracle::expect(nodes, t, {}, {{e, "0"}}))) <
              1e-12);
    }
}

TEST_CASE("fully mediated graphs: TE equals E[Y | do(W)]") {
    stcg::Rng rng(23, 9);
    for (int k = 0; k < 40; ++k) {
        auto nodes = oracle::fully_mediated(rng);
        CausalGraph g(nodes);
        for (const char* s : {"0", "1"}) {
            auto te = mediated_total_effect(g, "W", "M", "Y", s);
            CHECK(te.warnings.empty());
            CHECK(std::abs(te.value - expectation(intervene(g, {{"W", s}}), "Y")) < 1e-12);
            CHECK(std::abs(te.value - oracle::te(nodes, "W", "M", "Y", s)) < 1e-12);
        }
    }
}

TEST_CASE("confounded mediator: TE differs from E[Y | do(W)]") {
    // U -> M, U -> Y, W -> M -> Y
    stcg::Rng rng(1);
    std::vector<CtgNode> nodes{oracle::make_node("U", {}, 1, rng), oracle::make_node("W", {}, 1, rng)};
    nodes.push_back({"M", Category::DamageResponse, {"0", "1"}, {"W", "U"}, {{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}, {0.05, 0.95}}});
    nodes.push_back({"Y", Category::RecoveryDelay, {"0", "1"}, {"M", "U"}, {{0.9, 0.1}, {0.3, 0.7}, {0.5, 0.5}, {0.1, 0.9}}});
    CausalGraph g(nodes);
    const double te = mediated_total_effect(g, "W", "M", "Y", "1").value;
    const double ydo = expectation(intervene(g, {{"W", "1"}}), "Y");
    CHECK(std::abs(te - oracle::te(nodes, "W", "M", "Y", "1")) < 1e-12);
    CHECK(std::abs(te - ydo) > 1e-3);
}

TEST_CASE("zero-probability evidence and bad graphs are reported") {
    std::vector<CtgNode> nodes{{"A", Category::PlatformMission, {"0", "1"}, {}, {{1.0, 0.0}}},
                               {"B", Category::RecoveryDelay, {"0", "1"}, {"A"}, {{0.5, 0.5}, {0.5, 0.5}}}};
    CausalGraph g(nodes);
    CHECK_THROWS_AS(joint_query(g, "B", {{"A", "1"}}), ZeroProbabilityEvidence);
    auto cyc = nodes;
    cyc[0].parents = {"B"};
    cyc[0].cpt = {{0.5, 0.5}, {0.5, 0.5}};
    CHECK_THROWS_AS(CausalGraph{cyc}, CtgError);
    auto badrow = nodes;
    badrow[1].cpt[0] = {0.7, 0.7};
    CHECK_THROWS_AS(CausalGraph{badrow}, CtgError);
}

TEST_CASE("CTG text round-trips") {
    stcg::Rng rng(4);
    for (int k = 0; k < 10; ++k) {
        CausalGraph g(oracle::random_dag(rng));
        CHECK(read_ctg(write_ctg(g)) == g);
    }
    CHECK_THROWS_AS(read_ctg("node A\n  states 0\nend\n"), CtgError);
}

TEST_CASE("learn_cpts is Laplace-smoothed counting") {
    auto g = load("chain.ctg");
    std::vector<Assignment> recs;
    for (int i = 0; i < 3; ++i) recs.push_back({{"W", "1"}, {"M", "1"}, {"Y", "0"}});
    recs.push_back({{"W", "1"}, {"M", "0"}, {"Y", "0"}});
    recs.push_back({{"W", "0"}, {"M", "0"}, {"Y", "1"}});
    auto l = learn_cpts(g.nodes(), recs, 1.0);
    // W: (1+1)/(5+2), (4+1)/(5+2)
    CHECK(l.node("W").cpt[0][0] == doctest::Approx(2.0 / 7.0));
    // M | W=1: counts 1,3 -> (2/6, 4/6)
    CHECK(l.node("M").cpt[1][1] == doctest::Approx(4.0 / 6.0));
    // M | W=0: counts 1,0 -> (2/3, 1/3)
    CHECK(l.node("M").cpt[0][0] == doctest::Approx(2.0 / 3.0));
}
