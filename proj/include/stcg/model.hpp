#pragma once

// Intervention-aware spatio-temporal delay model and its ablations.
//
// ia_stgnn : GAT (multi-head, masked to E_t plus self-loops) per snapshot ->
//            causal dilated TCN over TargetModule and PathRelay embeddings.
//            Readout at W's release step: FiLM fusion of the encoded W (plus
//            each module's own priority rank) on the module contexts, the
//            chosen path's relay contexts alongside, node-wise layer,
//            mean-pool per group, bounded head.
// st_gnn   : same encoder, intervention-blind readout (final step, all relays, no fusion).
// gcn_lstm : mean-aggregation graph convolution + LSTM cell, blind readout.
// flat     : MLP on [mean scaled features over nodes and steps ++ encoded W].
//
// The encoder never sees W, so one encoder pass serves every alternative W.
//
// All variants emit y = y_min + (y_max - y_min) * sigmoid(z).

#include "stcg/graph.hpp"
#include "stcg/params.hpp"
#include "stcg/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stcg::model {

using num::Tensor;
using Leaves = std::vector<Tensor>;

enum class Arch { IaStgnn, StGnn, GcnLstm, Flat };
const char* to_string(Arch a);
std::optional<Arch> arch_from(const std::string& s);

struct ModelConfig {
    Arch arch = Arch::IaStgnn;
    int heads = 4;
    int embed_dim = 32;
    int gat_layers = 2;
    int temporal_kernel = 3;
    std::vector<int> dilations{1, 2, 4};
    int flat_hidden = 64;
    double y_min = 45.0;
    double y_max = 365.0;
    std::size_t feature_width = graph::kFeatureWidth;
    std::size_t intervention_width = 0;
    std::uint64_t seed = 7;

    /// Throws std::invalid_argument on embed_dim % heads != 0 and similar.
    void validate() const;
    [[nodiscard]] int receptive_field() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

struct TrainConfig {
    double lr = 3e-3;
    bool cosine = true;     // cosine decay from lr to lr_floor * lr over the run
    double lr_floor = 0.1;
    int epochs = 30;
    int batch_size = 32;
    double lambda = 0.1;
    double beta = 0.01;
    bool literal_cf = false;  // penalize every candidate alternative, not only tagged ones
    double creg_noise = 0.25; // std-dev of the non-causal feature resampling
    std::uint64_t seed = 7;
    double time_budget_s = 0.0; // 0 = no limit; stops after the epoch that crosses it

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct AttentionEdge {
    int t = 0;
    int layer = 0;
    int head = 0;
    int src = 0; // node ids
    int dst = 0;
    double weight = 0.0;
};

/// Every unmasked (src, dst) pair, self-loops included, for every step/layer/head.
struct AttentionMap {
    int layers = 0;
    int heads = 0;
    std::vector<AttentionEdge> edges;

    /// Mean over heads at the final step and last layer, self-loops dropped,
    /// sorted by weight descending then (src, dst).
    [[nodiscard]] std::vector<AttentionEdge> summary(std::size_t k) const;
};

struct Prediction {
    double y_hat = 0.0;
    AttentionMap attention;
};

class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// mask[i*N+j] = 1 when node j has no arc into node i; the diagonal is always open.
std::vector<std::uint8_t> attention_mask(const graph::GraphSnapshot& s);
/// Scaled feature matrix [N, d] as a constant tensor.
Tensor feature_tensor(const graph::GraphSnapshot& s);

struct GatParams {
    Tensor w, a_src, a_dst, bias; // [in, E], [H, E/H], [H, E/H], [1, E]
};
struct GatOutput {
    Tensor embeddings;              // [N, E]
    std::vector<Tensor> attention;  // one [H*N, N] per layer
};
/// Layer l>0 adds a residual connection from its input.
GatOutput gat_forward(const Tensor& x, std::span<const std::uint8_t> mask, const std::vector<GatParams>& layers);

struct TemporalParams {
    std::vector<Tensor> w;    // [K, E, E] per dilation
    std::vector<Tensor> bias; // [1, E]
    std::vector<int> dilations;
};
/// seq: [B, T, E] -> [B, T, E]; relu(conv + b) + input per block.
Tensor temporal_forward(const Tensor& seq, const TemporalParams& p);

/// context [M, E], w [1, m] -> context * (1 + w G + gb) + (w H + hb).
Tensor fuse_intervention(const Tensor& context, const Tensor& w, const Tensor& G, const Tensor& gb, const Tensor& H,
                         const Tensor& hb);

struct Encoded {
    const graph::Scenario* scenario = nullptr;
    Tensor seq;   // [M + R, T, E]: TargetModules (registry order) then relays (path registry order)
    Tensor final; // [M + R, E] for gcn_lstm; [1, d] pooled features for flat
    std::size_t targets = 0;
    std::vector<std::vector<std::size_t>> path_rows; // per registry path, rows of its relays
    std::vector<std::vector<Tensor>> attention;      // [t][layer] -> [H*N, N]
};

class Model {
  public:
    Model() = default;
    /// label_mean sets the head bias so the untrained output starts near it.
    Model(ModelConfig cfg, double label_mean);

    [[nodiscard]] const ModelConfig& config() const { return cfg_; }
    [[nodiscard]] const num::ParamStore& params() const { return params_; }
    [[nodiscard]] num::ParamStore& params() { return params_; }
    [[nodiscard]] std::string kind() const { return to_string(cfg_.arch); }
    [[nodiscard]] bool uses_intervention() const { return cfg_.arch == Arch::IaStgnn || cfg_.arch == Arch::Flat; }

    /// Throws ModelError when the scenario fails validation or widths differ.
    void check_inputs(const graph::Scenario& s) const;
    /// Registry-level checks for an alternative W on an already validated scenario.
    void check_intervention(const graph::Scenario& s, const graph::InterventionVector& w) const;

    [[nodiscard]] Encoded encode(const Leaves& p, const graph::Scenario& s) const;
    /// [1,1] bounded prediction of Y for one intervention.
    [[nodiscard]] Tensor readout(const Leaves& p, const Encoded& e, const graph::InterventionVector& w) const;
    /// Attention entropy + drift under resampled non-causal features, [1]. Zero for attention-free variants.
    [[nodiscard]] Tensor causal_reg(const Leaves& p, const graph::Scenario& s, const Encoded& e, double noise,
                                    std::uint64_t noise_seed) const;

    [[nodiscard]] Prediction predict_delay(const graph::Scenario& s) const;
    [[nodiscard]] double predict(const graph::Scenario& s, const graph::InterventionVector& w) const;
    /// One encoder pass shared across all interventions.
    [[nodiscard]] std::vector<double> predict_many(const graph::Scenario& s,
                                                   const std::vector<graph::InterventionVector>& ws) const;
    /// (y_factual, y_counterfactual) with G and X fixed, only W swapped.
    [[nodiscard]] std::pair<double, double> counterfactual_predict(const graph::Scenario& s,
                                                                   const graph::InterventionVector& alt) const;

    [[nodiscard]] num::Checkpoint to_checkpoint(const std::string& model_id) const;
    static Model from_checkpoint(const num::Checkpoint& ck);

  private:
    void build(double label_mean);
    void index();
    [[nodiscard]] AttentionMap attention_map(const graph::Scenario& s, const Encoded& e) const;
    [[nodiscard]] std::vector<GatParams> gat_params(const Leaves& p) const;

    ModelConfig cfg_;
    num::ParamStore params_;
    struct Layout {
        std::vector<std::size_t> gat_w, gat_as, gat_ad, gat_b;
        std::vector<std::size_t> tcn_w, tcn_b;
        std::size_t fuse_g = 0, fuse_gb = 0, fuse_h = 0, fuse_hb = 0, fuse_gr = 0, fuse_hr = 0;
        std::vector<std::size_t> gcn_w, gcn_b;
        std::size_t lstm_wx = 0, lstm_wh = 0, lstm_b = 0;
        std::vector<std::size_t> flat_w, flat_b;
        std::size_t u1 = 0, c1 = 0, u2 = 0, c2 = 0, u3 = 0, c3 = 0;
    } L_;
};

// -- training ------------------------------------------------------------------

struct TrainSample {
    const graph::Scenario* scenario = nullptr;
    double y = 0.0;
    std::vector<graph::InterventionVector> cf_tagged;     // generator-certified equal-effect alternatives
    std::vector<graph::InterventionVector> cf_candidates; // every alternative examined (literal mode)
};

struct LossComponents {
    double reg = 0.0;  // mean squared error, days^2
    double cf = 0.0;   // mean over pairs of squared prediction gap
    double creg = 0.0; // mean attention entropy + drift
    double total = 0.0;
    std::size_t pairs = 0;
};

/// Differentiable batch loss; cf pairs are (factual W, alternative) on the same scenario.
/// Throws std::invalid_argument on an empty batch.
Tensor loss_total(const Model& m, const Leaves& p, const std::vector<const TrainSample*>& batch, double lambda,
                  double beta, bool literal_cf, double creg_noise, std::uint64_t noise_seed, LossComponents* out);

struct EpochRecord {
    int epoch = 0;
    double reg = 0.0, cf = 0.0, creg = 0.0, total = 0.0; // means over batches
    double val_mae = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    Model model; // parameters of the best validation epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_mae = 0.0;
    double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Deterministic given the configs. Throws ModelError with epoch/batch locus on a non-finite loss or gradient.
TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const EpochCallback& on_epoch = {});

double mean_absolute_error(const Model& m, const std::vector<TrainSample>& set);

} // namespace stcg::model
