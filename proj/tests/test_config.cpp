#include "stcg/config.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace stcg::config;

TEST_CASE("defaults round-trip through JSON") {
    auto d = defaults();
    auto j = nlohmann::json(to_json(d));
    auto back = from_json(j);
    CHECK(nlohmann::json(to_json(back)) == j);
    CHECK(back.pipeline.registries == d.pipeline.registries);
    CHECK(back.model.intervention_width == d.model.intervention_width);
}

TEST_CASE("layering: file over defaults, assignments over file") {
    const auto path = (std::filesystem::temp_directory_path() / "stcg_cfg_test.json").string();
    {
        std::ofstream out(path);
        out << R"({"seed": 11, "train": {"epochs": 5, "lambda": 0.2}, "surrogate": {"mu": 0}})";
    }
    auto c = load(path, {"train.epochs=9", "service.host=0.0.0.0", "model.dilations=[1,2]"});
    CHECK(c.seed == 11);
    CHECK(c.train.epochs == 9);
    CHECK(c.train.lambda == 0.2);
    CHECK(c.surrogate.mu == 0.0);
    CHECK(c.service.host == "0.0.0.0");
    CHECK(c.model.dilations == std::vector<int>{1, 2});
    // the master seed reaches every component
    CHECK(c.model.seed == 11);
    CHECK(c.train.seed == 11);
    CHECK(c.surrogate.seed == 11);
    CHECK(c.train.batch_size == defaults().train.batch_size);
    std::filesystem::remove(path);
}

TEST_CASE("unknown keys, bad values and bad files are rejected") {
    auto doc = nlohmann::json(to_json(defaults()));
    CHECK_THROWS_AS(overlay(doc, nlohmann::json{{"train", {{"epoch", 3}}}}), ConfigError);
    try {
        apply_assignment(doc, "model.nope=1");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("model.nope") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_assignment(doc, "novalue"), ConfigError);
    CHECK_THROWS(load("", {"train.epochs=0"}));
    CHECK_THROWS(load("", {"model.heads=3"}));
    CHECK_THROWS_AS(load("/nonexistent/stcg.json", {}), ConfigError);
}
