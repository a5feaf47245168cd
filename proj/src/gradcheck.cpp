#include "stcg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stcg::num {

GradcheckReport gradcheck(const ScalarFn& f, const std::vector<Tensor>& inputs, double h, double tol) {
    std::vector<Tensor> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.emplace_back(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
    Tensor out = f(leaves);
    backward(out);

    auto eval_with = [&](std::size_t which, std::size_t elem, double delta) {
        std::vector<Tensor> probe;
        probe.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            std::vector<double> v(inputs[i].data().begin(), inputs[i].data().end());
            if (i == which) v[elem] += delta;
            probe.emplace_back(inputs[i].shape(), std::move(v), false);
        }
        return f(probe).item();
    };

    GradcheckReport rep;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        auto gr = leaves[i].grad();
        for (std::size_t e = 0; e < leaves[i].numel(); ++e) {
            double ad = gr.empty() ? 0.0 : gr[e];
            double fd = (eval_with(i, e, h) - eval_with(i, e, -h)) / (2.0 * h);
            double abs_err = std::fabs(ad - fd);
            double rel = abs_err / std::max({1.0, std::fabs(ad), std::fabs(fd)});
            if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
            if (rel > rep.max_rel_error || rep.checked == 0) {
                rep.max_rel_error = std::max(rep.max_rel_error, rel);
                if (rel >= rep.max_rel_error) {
                    rep.worst_input = i;
                    rep.worst_element = e;
                }
            }
            rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
            ++rep.checked;
        }
    }
    rep.passed = rep.max_rel_error < tol;
    return rep;
}

} // namespace stcg::num
