#include "stcg/generator.hpp"
#include "stcg/rng.hpp"
#include "stcg/scenario_io.hpp"
#include "stcg/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace stcg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

model::Model small_model() {
    model::ModelConfig c;
    c.embed_dim = 16;
    c.intervention_width = graph::intervention_width(harness::default_registries());
    return model::Model(c, 120);
}

const model::Model& shared_model() {
    static const model::Model m = small_model();
    return m;
}

service::Service make(const std::string& journal = "") {
    service::ServiceOptions o;
    o.journal_dir = journal;
    return service::Service(harness::PipelineConfig{}, shared_model(), "test-model", o);
}

json body(const service::Response& r) { return json::parse(r.body); }

std::string open_session(const service::Service& s, std::uint64_t seed = 3) {
    auto r = s.handle("POST", "/session", json{{"template_seed", seed}}.dump());
    REQUIRE(r.status == 201);
    return body(r).at("session_id").get<std::string>();
}

graph::Scenario scenario_of(const service::Service& s, const std::string& id) {
    return graph::scenario_from_json(body(s.handle("GET", "/session/" + id + "/scenario", "")));
}

} // namespace

TEST_CASE("healthz and schema") {
    auto s = make();
    auto h = body(s.handle("GET", "/healthz", ""));
    CHECK(h["status"] == "ok");
    CHECK(h["model_id"] == "test-model");
    CHECK(h["model_loaded"] == true);
    auto sc = body(s.handle("GET", "/schema", ""));
    CHECK(sc["endpoints"].size() == 11);
}

TEST_CASE("predict matches the library and is pure") {
    auto s = make();
    auto id = open_session(s);
    auto sc = scenario_of(s, id);
    auto a = s.handle("POST", "/session/" + id + "/predict", "");
    auto b = s.handle("POST", "/session/" + id + "/predict", "");
    REQUIRE(a.status == 200);
    CHECK(a.body == b.body);
    auto j = body(a);
    CHECK(j["y_hat_days"].get<double>() == shared_model().predict_delay(sc).y_hat);
    harness::PipelineConfig cfg;
    CHECK(j["sdi"].get<double>() == harness::ground_truth(sc, sc.current_intervention(), cfg.physics, cfg.delay, cfg.gen).sdi);
    CHECK(j["attention_summary"].size() == 8);
}

TEST_CASE("counterfactual identity and library parity") {
    auto s = make();
    auto id = open_session(s);
    auto sc = scenario_of(s, id);
    auto w = sc.current_intervention();
    auto r = body(s.handle("POST", "/session/" + id + "/counterfactual",
                           json{{"alt_w", graph::intervention_to_json(w)}}.dump()));
    CHECK(r["delta"].get<double>() == 0.0);
    w.weapon_class = (w.weapon_class + 2) % 4;
    w.decoy = !w.decoy;
    r = body(s.handle("POST", "/session/" + id + "/counterfactual", json{{"alt_w", graph::intervention_to_json(w)}}.dump()));
    auto [yf, yc] = shared_model().counterfactual_predict(sc, w);
    CHECK(r["y_factual"].get<double>() == yf);
    CHECK(r["y_counterfactual"].get<double>() == yc);
    CHECK(r["delta"].get<double>() == yc - yf);
}

TEST_CASE("intervention updates, history and isolation") {
    auto s = make();
    auto a = open_session(s, 3), b = open_session(s, 3);
    auto before_b = s.handle("POST", "/session/" + b + "/predict", "").body;
    auto sc = scenario_of(s, a);
    auto w = sc.current_intervention();
    w.weapon_class = (w.weapon_class + 1) % 4;
    auto r = s.handle("PUT", "/session/" + a + "/intervention", json{{"w", graph::intervention_to_json(w)}}.dump());
    CHECK(r.status == 200);
    CHECK(scenario_of(s, a).current_intervention() == w);
    auto pa = body(s.handle("POST", "/session/" + a + "/predict", ""));
    CHECK(pa["y_hat_days"].get<double>() == shared_model().predict(sc, w));
    CHECK(s.handle("POST", "/session/" + b + "/predict", "").body == before_b);
    CHECK(scenario_of(s, b).current_intervention() == sc.current_intervention());
    // a: create, PUT, predict ; b: create, predict, predict  (GETs are not recorded)
    CHECK(s.history(a).size() == 3);
    CHECK(s.history(b).size() == 3);
    auto h = s.history(a);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i].seq == i + 1);
    CHECK(h[1].method == "PUT");
}

TEST_CASE("error codes carry a field locus") {
    auto s = make();
    auto id = open_session(s);
    CHECK(s.handle("POST", "/session/nope/predict", "").status == 404);
    CHECK(s.handle("GET", "/unknown", "").status == 404);
    auto bad = s.handle("POST", "/session/" + id + "/counterfactual", "{}");
    CHECK(bad.status == 400);
    CHECK(body(bad)["field"] == "alt_w");
    auto w = graph::intervention_to_json(scenario_of(s, id).current_intervention());
    w["sync_mode"] = "whenever";
    bad = s.handle("PUT", "/session/" + id + "/intervention", json{{"w", w}}.dump());
    CHECK(bad.status == 400);
    CHECK(body(bad)["field"].get<std::string>().find("sync_mode") != std::string::npos);
    CHECK(s.handle("PUT", "/session/" + id + "/intervention", "{not json").status == 400);
    // well-formed but references an unknown munition
    w["sync_mode"] = "Synchronized";
    w["weapon_class"] = 99;
    CHECK(s.handle("PUT", "/session/" + id + "/intervention", json{{"w", w}}.dump()).status == 422);
    auto sc = graph::scenario_to_json(scenario_of(s, id));
    sc["snapshots"][0]["edges"].push_back({{"src", 1}, {"dst", 999}, {"kind", "Coordination"}, {"weight", 1.0}});
    auto r = s.handle("PUT", "/session/" + id + "/scenario", sc.dump());
    CHECK(r.status == 422);
    CHECK(s.handle("POST", "/session/" + id + "/recommend", json{{"candidates", json::array()}}.dump()).status == 400);

    service::Service bare(harness::PipelineConfig{}, std::nullopt, "");
    auto id2 = open_session(bare);
    CHECK(bare.handle("POST", "/session/" + id2 + "/predict", "").status == 409);
    CHECK(bare.handle("GET", "/session/" + id2 + "/scenario", "").status == 200);
}

TEST_CASE("sensitivity, recommend and attention endpoints") {
    auto s = make();
    auto id = open_session(s);
    auto sc = scenario_of(s, id);
    auto g = body(s.handle("POST", "/session/" + id + "/sensitivity",
                           json{{"axes", {{"weapons", {0, 3}}, {"structures", {1}}}}}.dump()));
    harness::GridAxes ax{{0, 3}, {0, 1, 2}, {1}};
    auto want = harness::sensitivity_grid(harness::predictor_of(shared_model()), sc, ax,
                                          physics::default_stacks(physics::PhysicsConfig{}));
    CHECK(json(harness::to_json(want)) == g);
    CHECK(s.handle("POST", "/session/" + id + "/sensitivity", json{{"axes", {{"colour", {1}}}}}.dump()).status == 400);

    auto w = sc.current_intervention();
    auto w2 = w;
    w2.weapon_class = (w.weapon_class + 1) % 4;
    json cands = json::array({{{"id", 4}, {"w", graph::intervention_to_json(w)}},
                              {{"id", 2}, {"w", graph::intervention_to_json(w2)}}});
    auto rr = body(s.handle("POST", "/session/" + id + "/recommend",
                            json{{"candidates", cands}, {"objective", "max_delay"}}.dump()));
    auto lib = harness::recommend(shared_model(), sc, {{4, w}, {2, w2}}, harness::Objective::MaxDelay, 0,
                                  harness::PipelineConfig{});
    CHECK(json(harness::to_json(lib)) == rr["ranked"]);

    auto att = body(s.handle("GET", "/session/" + id + "/attention", ""));
    std::map<std::string, double> sums;
    std::size_t n = 0;
    for (auto it = att["edges"].begin(); it != att["edges"].end(); ++it) {
        const auto dst = it.key().substr(it.key().find("->") + 2);
        for (const auto& e : it.value()) {
            sums[std::to_string(e["t"].get<int>()) + "/" + std::to_string(e["layer"].get<int>()) + "/" +
                 std::to_string(e["head"].get<int>()) + "/" + dst] += e["weight"].get<double>();
            ++n;
        }
    }
    CHECK(n > 0);
    for (const auto& [k, v] : sums) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("journal replay rebuilds the same history") {
    const auto dir = (fs::temp_directory_path() / "stcg_journal_test").string();
    fs::remove_all(dir);
    std::string id;
    std::vector<service::HistoryEntry> original;
    {
        auto s = make(dir);
        id = open_session(s, 4);
        auto w = scenario_of(s, id).current_intervention();
        s.handle("POST", "/session/" + id + "/predict", "");
        w.release_window = 40;
        s.handle("PUT", "/session/" + id + "/intervention", json{{"w", graph::intervention_to_json(w)}}.dump());
        s.handle("POST", "/session/" + id + "/predict", "");
        s.handle("POST", "/session/" + id + "/counterfactual", "{}"); // a 400 is journaled too
        original = s.history(id);
    }
    std::ifstream in(fs::path(dir) / (id + ".jsonl"));
    std::stringstream ss;
    ss << in.rdbuf();
    auto fresh = make();
    auto nid = service::replay_journal(fresh, ss.str());
    auto replayed = fresh.history(nid);
    REQUIRE(replayed.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        CHECK(replayed[i].status == original[i].status);
        if (i == 0) continue; // creation echoes the session id
        CHECK(replayed[i].response == original[i].response);
    }
    fs::remove_all(dir);
}

TEST_CASE("concurrent requests: per-session serialization keeps history exact") {
    auto s = make();
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) ids.push_back(open_session(s, 10 + i));
    std::vector<std::thread> th;
    for (int t = 0; t < 6; ++t)
        th.emplace_back([&, t] {
            for (int k = 0; k < 5; ++k) s.handle("POST", "/session/" + ids[t % 3] + "/predict", "");
        });
    for (auto& x : th) x.join();
    for (const auto& id : ids) CHECK(s.history(id).size() == 1 + 10);
}

TEST_CASE("HTTP front-end returns the library bodies") {
    auto s = make();
    service::HttpServer http(s, 2);
    const int port = http.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread t([&] { http.listen(); });
    httplib::Client cli("127.0.0.1", port);
    auto c = cli.Post("/session", json{{"template_seed", 8}}.dump(), "application/json");
    REQUIRE(c);
    CHECK(c->status == 201);
    auto id = json::parse(c->body)["session_id"].get<std::string>();
    auto p = cli.Post("/session/" + id + "/predict", "", "application/json");
    REQUIRE(p);
    CHECK(p->status == 200);
    CHECK(p->body == s.handle("POST", "/session/" + id + "/predict", "").body);
    auto nf = cli.Get("/session/zzz/scenario");
    REQUIRE(nf);
    CHECK(nf->status == 404);
    http.stop();
    t.join();
}
