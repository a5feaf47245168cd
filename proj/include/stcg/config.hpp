#pragma once

// One configuration document for every subcommand, layered as
//   built-in defaults <- JSON config file <- --set key.path=value overrides.
// Keys unknown to the defaults are rejected with their path. A single master
// `seed` feeds every component; components draw from their own RNG streams.

#include "stcg/harness.hpp"
#include "stcg/model.hpp"
#include "stcg/surrogate.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stcg::config {

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string journal_dir; // empty = in-memory sessions only
    int threads = 4;
};

struct AppConfig {
    std::uint64_t seed = 7;
    std::size_t dataset_n = 2000;
    int jobs = 1;
    harness::PipelineConfig pipeline;
    model::ModelConfig model;
    model::TrainConfig train;
    surrogate::SurrogateConfig surrogate;
    ServiceConfig service;

    /// Pushes the master seed and registry-derived widths into the components.
    void finalize();
};

/// Environment variable consulted when --config is absent.
inline constexpr const char* kConfigEnv = "STCG_CONFIG";

AppConfig defaults();
nlohmann::ordered_json to_json(const AppConfig& c);
AppConfig from_json(const nlohmann::json& j);

/// Recursively overlays `patch` onto `base`; every key must already exist in base.
void overlay(nlohmann::json& base, const nlohmann::json& patch, const std::string& at = "");

/// "a.b.c=value"; value parsed as JSON, otherwise taken as a string.
void apply_assignment(nlohmann::json& doc, const std::string& assignment);

AppConfig load(const std::string& path, const std::vector<std::string>& assignments);

} // namespace stcg::config
