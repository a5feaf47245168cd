#pragma once

#include "stcg/tensor.hpp"

#include <functional>
#include <vector>

namespace stcg::num {

struct GradcheckReport {
    /// max over all input elements of |autodiff - fd| / max(1, |autodiff|, |fd|)
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_element = 0;
    std::size_t checked = 0;
    bool passed = false;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of a scalar function with central
/// differences of step h. Inputs are copied; the originals are untouched.
GradcheckReport gradcheck(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-4,
                          double tol = 1e-4);

} // namespace stcg::num
