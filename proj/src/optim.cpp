#include "stcg/optim.hpp"

#include "stcg/params.hpp"

#include <cmath>
#include <string>

namespace stcg::num {

void adam_step(std::span<std::vector<double>*> params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " params but " +
                                    std::to_string(grads.size()) + " gradients");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->size() != grads[i].size())
            throw std::invalid_argument("adam_step: size mismatch at parameter " + std::to_string(i));
        for (double gv : grads[i])
            if (!std::isfinite(gv))
                throw NonFiniteGradient("adam_step: non-finite gradient in parameter " + std::to_string(i));
    }
    if (state.m.size() != params.size()) {
        state.m.clear();
        state.v.clear();
        for (auto* p : params) {
            state.m.emplace_back(p->size(), 0.0);
            state.v.emplace_back(p->size(), 0.0);
        }
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& gr = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gr[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gr[j] * gr[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void adam_step(ParamStore& params, std::span<const std::vector<double>> grads, AdamState& state,
               const AdamConfig& cfg) {
    std::vector<std::vector<double>*> ptrs;
    ptrs.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) ptrs.push_back(&params[i].value);
    adam_step(std::span<std::vector<double>*>(ptrs), grads, state, cfg);
}

} // namespace stcg::num
