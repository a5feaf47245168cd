#pragma once

// Dataset generation, metrics, ablations, sensitivity grids and strategy
// ranking.
//
// Dataset file: JSON Lines, one item per line:
//   {"split":"train|val|test","y":..,"y_true":..,"sdi":..,
//    "candidates":[{"kind":"weapon","w":{..},"y_true":..,"equivalent":true}, ..],
//    "scenario":{..scenario line..}}
// The dataset hash is FNV-1a 64 over exactly these bytes.

#include "stcg/generator.hpp"
#include "stcg/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace stcg::harness {

struct PipelineConfig {
    physics::PhysicsConfig physics;
    delay::DelayConfig delay = delay::default_delay_config();
    GeneratorConfig gen;
    graph::Registries registries = default_registries();
    double train_frac = 0.7;
    double val_frac = 0.15;
    double top_fraction = 0.05; // tail share used by top-k accuracy
    double top_rel_tol = 0.15;  // relative error counted as a hit
    double cf_band = 0.12;      // relative spread counted as stable
};

struct CfCandidate {
    std::string kind; // weapon | window | sync | path | priority | decoy
    graph::InterventionVector w;
    double y_true = 0.0;
    bool equivalent = false; // |y_true - factual y_true| < equivalence_tol_days
};

struct DatasetItem {
    graph::Scenario scenario;
    double y = 0.0;      // observed label (noise + clamp)
    double y_true = 0.0; // noiseless
    double sdi = 0.0;
    std::vector<CfCandidate> candidates;
};

enum class Split { Train, Val, Test };
const char* to_string(Split s);

struct Dataset {
    std::uint64_t seed = 0;
    std::vector<DatasetItem> items;
    std::vector<Split> split;

    [[nodiscard]] std::vector<std::size_t> indices(Split s) const;
    [[nodiscard]] std::string hash() const;
    /// Hash of the ordered scenario ids in one split.
    [[nodiscard]] std::string split_hash(Split s) const;
};

std::string fnv1a_hex(std::string_view bytes);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results must be written by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Item i draws from Rng(seed, (kDataset << 32) + i); splits from Rng(seed, kSplit).
Dataset generate_dataset(std::uint64_t seed, std::size_t n, const PipelineConfig& cfg, int jobs = 1);

std::string dataset_to_jsonl(const Dataset& d);
Dataset dataset_from_jsonl(const std::string& text, std::uint64_t seed = 0);

/// Training views into `d` (pointers stay valid while `d` lives).
std::vector<model::TrainSample> samples(const Dataset& d, Split s);

// -- metrics -------------------------------------------------------------------

using Predictor = std::function<double(const graph::Scenario&, const graph::InterventionVector&)>;
/// Batch form: one scenario, several interventions (lets models reuse the encoder).
using BatchPredictor =
    std::function<std::vector<double>(const graph::Scenario&, const std::vector<graph::InterventionVector>&)>;

BatchPredictor predictor_of(const model::Model& m);
/// Generator recomputation, noiseless.
BatchPredictor oracle_predictor(const PipelineConfig& cfg);
BatchPredictor constant_predictor(double value);

struct MetricsReport {
    std::string model;
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double top5_acc = 0.0;
    double cf_spread = 0.0;      // median relative spread over tagged pairs
    double cf_within_band = 0.0; // fraction of tagged pairs with spread <= cf_band
    std::size_t cf_pairs = 0;
    std::string split_hash;
    double train_seconds = 0.0;
};

MetricsReport evaluate(const std::string& name, const BatchPredictor& f, const Dataset& d, Split s,
                       const PipelineConfig& cfg, int jobs = 1);

struct DirectionReport {
    std::size_t pairs = 0; // decisive pairs (|generator dY| >= min_gap)
    std::size_t agree = 0;
    [[nodiscard]] double rate() const { return pairs ? static_cast<double>(agree) / pairs : 0.0; }
};

/// Factual W against the next-stronger munition (or next-weaker when `upgrade` is false).
DirectionReport weapon_direction(const BatchPredictor& f, const Dataset& d, Split s, const PipelineConfig& cfg,
                                 bool upgrade = true, double min_gap = 1.0, int jobs = 1);

nlohmann::ordered_json to_json(const MetricsReport& r);
std::string format_table(const std::vector<MetricsReport>& rows);

// -- ablations -------------------------------------------------------------------

struct AblationOptions {
    bool include_lambda0 = true; // extra IA-STGNN row trained with lambda = 0
    int jobs = 1;
    std::function<void(const std::string& model, const model::EpochRecord&)> on_epoch;
};

struct AblationResult {
    std::vector<MetricsReport> rows;
    std::vector<model::TrainResult> runs; // parallel to rows
    double seconds = 0.0;
};

AblationResult run_ablations(const Dataset& d, const model::ModelConfig& base, const model::TrainConfig& tcfg,
                             const PipelineConfig& cfg, const AblationOptions& opt = {});

// -- sensitivity grid ------------------------------------------------------------

struct GridAxes {
    std::vector<int> weapons;    // munition ids
    std::vector<int> paths;      // path ids
    std::vector<int> structures; // stack template ids
};

struct SensitivityGrid {
    GridAxes axes;
    std::string reference; // scenario id
    std::vector<double> values; // [weapon][path][structure], row-major

    [[nodiscard]] double at(std::size_t w, std::size_t p, std::size_t s) const {
        return values[(w * axes.paths.size() + p) * axes.structures.size() + s];
    }
};

/// Entry = prediction under W with (weapon, path) swapped on the reference
/// scenario re-cast with that structure template. Throws std::invalid_argument on an empty axis or unknown id.
SensitivityGrid sensitivity_grid(const BatchPredictor& f, const graph::Scenario& ref, const GridAxes& axes,
                                 const std::vector<physics::StackTemplate>& structures);

nlohmann::ordered_json to_json(const SensitivityGrid& g);

// -- recommendation ---------------------------------------------------------------

enum class Objective { MaxDelay, MaxSdi };
const char* to_string(Objective o);
std::optional<Objective> objective_from(const std::string& s);

struct Candidate {
    int id = 0;
    graph::InterventionVector w;
};

struct Ranked {
    int id = 0;
    graph::InterventionVector w;
    double score = 0.0;
    double y_hat = 0.0;
    std::vector<model::AttentionEdge> attention; // top edges of the encoder
};

/// MaxDelay scores by the model's y_hat; MaxSdi scores by the generator's SDI
/// (the model has no SDI head). Descending score, ties by candidate id.
std::vector<Ranked> recommend(const model::Model& m, const graph::Scenario& s, const std::vector<Candidate>& cands,
                              Objective obj, std::size_t top_k, const PipelineConfig& cfg);

nlohmann::ordered_json to_json(const std::vector<Ranked>& r);

} // namespace stcg::harness
