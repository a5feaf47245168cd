#pragma once

// Learned stand-in for the penetration model: (munition, angle, stack) -> rd.
//
// Inputs (width 8): impact_energy, penetration_class, 1/cos(angle),
// concrete_thickness, granite_thickness, cavity_thickness, module_depth,
// resistance_above (sum of impedance * thickness above the module). Inputs
// are standardized with training-set statistics stored in the checkpoint.
//
// Network: 8 -> 64 relu -> 64 relu -> residual block (64 -> 64 relu -> 64, added)
// -> 1 -> sigmoid.
//
// Loss: mean squared error + mu * mean(max(0, r(x + extra resistance) - r(x))^2)
// over probe pairs resampled every epoch.

#include "stcg/params.hpp"
#include "stcg/physics.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace stcg::surrogate {

inline constexpr std::size_t kInputWidth = 8;
inline constexpr std::size_t kResistanceColumn = 7;

class SurrogateError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct SurrogateConfig {
    int hidden = 64;
    int epochs = 3000;
    double lr = 3e-3;
    double mu = 1.0;
    int probe_pairs = 64;       // per epoch, for the hinge term
    double delta_min = 0.5;     // extra resistance range for probes
    double delta_max = 3.0;
    double train_frac = 0.8;
    double violation_tol = 1e-4; // increase larger than this counts as a violation
    std::uint64_t seed = 7;

    void validate() const;
};

std::vector<double> features(const physics::Munition& m, const physics::LayerStack& stack, double angle_deg,
                             double module_depth);
std::vector<double> features(const physics::LabelRow& row, const physics::PhysicsConfig& cfg);

class SurrogateModel {
  public:
    SurrogateModel() = default;
    SurrogateModel(int hidden, std::uint64_t seed);

    /// Throws SurrogateError when x.size() != kInputWidth.
    [[nodiscard]] double predict_rd(std::span<const double> x) const;
    [[nodiscard]] std::vector<double> predict_rd_batch(const std::vector<std::vector<double>>& xs) const;

    [[nodiscard]] const num::ParamStore& params() const { return params_; }
    [[nodiscard]] num::ParamStore& params() { return params_; }
    std::vector<double> mean, stddev; // input standardization

    /// Forward on raw (unstandardized) rows [n, kInputWidth] -> [n, 1].
    [[nodiscard]] num::Tensor forward(const std::vector<num::Tensor>& p, const num::Tensor& x) const;

    [[nodiscard]] num::Checkpoint to_checkpoint(const std::string& model_id) const;
    static SurrogateModel from_checkpoint(const num::Checkpoint& ck);

  private:
    int hidden_ = 64;
    num::ParamStore params_;
};

struct SurrogateHistory {
    std::vector<double> loss, mse, hinge; // per epoch
    double train_mae = 0.0;
    double heldout_mae = 0.0;
    std::size_t train_rows = 0;
    std::size_t heldout_rows = 0;
};

struct SurrogateResult {
    SurrogateModel model;
    SurrogateHistory history;
    std::vector<std::size_t> heldout; // row indices
};

/// Throws SurrogateError on fewer than 100 rows or constant labels.
SurrogateResult train_surrogate(const std::vector<physics::LabelRow>& rows, const SurrogateConfig& cfg,
                                const physics::PhysicsConfig& pcfg);

struct ViolationReport {
    std::size_t pairs = 0;
    std::size_t violations = 0;
    [[nodiscard]] double rate() const { return pairs ? static_cast<double>(violations) / pairs : 0.0; }
};

/// Probe pairs: a random row's features and the same with resistance_above
/// raised by U(delta_min, delta_max); drawn from Rng(seed, kProbe).
ViolationReport monotonicity_violations(const SurrogateModel& m, const std::vector<physics::LabelRow>& rows,
                                        const physics::PhysicsConfig& pcfg, const SurrogateConfig& cfg,
                                        std::size_t pairs, std::uint64_t seed);

} // namespace stcg::surrogate
