#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace stcg::num {

class ParamStore;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};

class NonFiniteGradient : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update over parallel lists of parameter buffers.
/// Throws NonFiniteGradient before touching anything if a gradient is NaN/inf.
void adam_step(std::span<std::vector<double>*> params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& cfg);

void adam_step(ParamStore& params, std::span<const std::vector<double>> grads, AdamState& state,
               const AdamConfig& cfg);

} // namespace stcg::num
