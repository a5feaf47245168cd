#include "stcg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace stcg::num {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

std::size_t numel_of(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

namespace {

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const std::string& why) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

inline bool wants(const Node& n) { return n.requires_grad; }

inline std::vector<double>& g(Node& n) { return n.grad; }

// Extent of the axis plus the products of the dims before and after it.
struct AxisSplit {
    std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

enum class Bcast { Same, Row, Scalar };

Bcast classify(std::string_view op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Bcast::Same;
    if (b.numel() == 1) return Bcast::Scalar;
    if (a.rank() == 2 && b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == a.dim(1)) return Bcast::Row;
    shape_fail(op, a.shape(), b.shape());
}

inline std::size_t bidx(Bcast k, std::size_t i, std::size_t cols) {
    switch (k) {
    case Bcast::Same: return i;
    case Bcast::Row: return i % cols;
    case Bcast::Scalar: return 0;
    }
    return 0;
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, std::string_view op, F f, DF df) {
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return make_result(a.shape(), std::move(out), {a},
                       [df](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t i = 0; i < self.value.size(); ++i)
                               g(p)[i] += self.grad[i] * df(p.value[i], self.value[i]);
                       },
                       op);
}

} // namespace

// -- Tensor --------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel_of(shape) != data.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (rank() != 2) throw ShapeError("at(r,c): tensor has shape " + shape_str(shape()));
    return node_->value.at(r * dim(1) + c);
}

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor make_result(Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
                   std::function<void(Node&)> backward_rule, std::string_view op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->is_leaf = false;
    n->op = op;
    for (const auto& p : parents) {
        n->requires_grad = n->requires_grad || p.requires_grad();
    }
    if (n->requires_grad) {
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(backward_rule);
    }
    return Tensor(std::move(n));
}

// -- tape ------------------------------------------------------------------

namespace {

std::vector<Node*> topo_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order; // parents before children
}

void run_backward(Node* root, std::span<const double> seed) {
    if (!root->requires_grad) return;
    auto order = topo_order(root);
    for (Node* n : order) {
        if (!n->is_leaf) {
            n->grad.assign(n->value.size(), 0.0);
        } else if (n->grad.size() != n->value.size()) {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    for (std::size_t i = 0; i < seed.size(); ++i) root->grad[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->is_leaf && n->backward) n->backward(*n);
    }
}

} // namespace

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()) +
                         " (pass an explicit seed)");
    const double one = 1.0;
    run_backward(loss.node().get(), std::span<const double>(&one, 1));
}

void backward(const Tensor& output, std::span<const double> seed) {
    if (seed.size() != output.numel())
        throw ShapeError("backward: seed size " + std::to_string(seed.size()) + " for output " +
                         shape_str(output.shape()));
    run_backward(output.node().get(), seed);
}

// -- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    auto k = classify("add", a, b);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::size_t cols = a.rank() == 2 ? a.dim(1) : 1;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[bidx(k, i, cols)];
    return make_result(a.shape(), std::move(out), {a, b},
                       [k, cols](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               if (wants(pa)) g(pa)[i] += self.grad[i];
                               if (wants(pb)) g(pb)[bidx(k, i, cols)] += self.grad[i];
                           }
                       },
                       "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    auto k = classify("sub", a, b);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::size_t cols = a.rank() == 2 ? a.dim(1) : 1;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[bidx(k, i, cols)];
    return make_result(a.shape(), std::move(out), {a, b},
                       [k, cols](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               if (wants(pa)) g(pa)[i] += self.grad[i];
                               if (wants(pb)) g(pb)[bidx(k, i, cols)] -= self.grad[i];
                           }
                       },
                       "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    auto k = classify("mul", a, b);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::size_t cols = a.rank() == 2 ? a.dim(1) : 1;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[bidx(k, i, cols)];
    return make_result(a.shape(), std::move(out), {a, b},
                       [k, cols](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               std::size_t j = bidx(k, i, cols);
                               if (wants(pa)) g(pa)[i] += self.grad[i] * pb.value[j];
                               if (wants(pb)) g(pb)[j] += self.grad[i] * pa.value[i];
                           }
                       },
                       "mul");
}

Tensor scale(const Tensor& a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary(a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
                 [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
    return unary(a, "tanh", [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, "sigmoid",
                 [](double x) {
                     if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                     double e = std::exp(x);
                     return e / (1.0 + e);
                 },
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
    return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
    return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
    return unary(a, "abs", [](double x) { return std::fabs(x); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor masked_fill(const Tensor& a, std::span<const std::uint8_t> mask, double value) {
    if (mask.size() != a.numel())
        throw ShapeError("masked_fill: mask of " + std::to_string(mask.size()) + " entries for shape " +
                         shape_str(a.shape()));
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    std::vector<double> out = a.node()->value;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (m[i]) out[i] = value;
    return make_result(a.shape(), std::move(out), {a},
                       [m = std::move(m)](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                               if (!m[i]) g(p)[i] += self.grad[i];
                       },
                       "masked_fill");
}

// -- structural --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail("matmul", a.shape(), b.shape());
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return make_result({n, m}, std::move(out), {a, b},
                       [n, k, m](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           const double* go = self.grad.data();
                           if (wants(pa)) {
                               // dA = dC * B^T
                               for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                       const double* brow = pb.value.data() + p * m;
                                       const double* grow = go + i * m;
                                       double acc = 0.0;
                                       for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                                       g(pa)[i * k + p] += acc;
                                   }
                           }
                           if (wants(pb)) {
                               // dB = A^T * dC
                               for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                       double aip = pa.value[i * k + p];
                                       if (aip == 0.0) continue;
                                       double* gb = g(pb).data() + p * m;
                                       const double* grow = go + i * m;
                                       for (std::size_t j = 0; j < m; ++j) gb[j] += aip * grow[j];
                                   }
                           }
                       },
                       "matmul");
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) shape_fail("transpose", a.shape(), "is not rank 2");
    const std::size_t r = a.dim(0), c = a.dim(1);
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    return make_result({c, r}, std::move(out), {a},
                       [r, c](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) g(p)[i * c + j] += self.grad[j * r + i];
                       },
                       "transpose");
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel()) shape_fail("reshape", a.shape(), shape);
    return make_result(std::move(shape), a.node()->value, {a},
                       [](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t i = 0; i < self.grad.size(); ++i) g(p)[i] += self.grad[i];
                       },
                       "reshape");
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = parts[0].shape();
    if (axis >= ref.size()) shape_fail("concat", ref, "has no axis " + std::to_string(axis));
    Shape out_shape = ref;
    out_shape[axis] = 0;
    std::vector<std::size_t> extents;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != ref.size()) shape_fail("concat", ref, s);
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != ref[i]) shape_fail("concat", ref, s);
        out_shape[axis] += s[axis];
        extents.push_back(s[axis]);
    }
    auto sp = split_axis(out_shape, axis);
    std::vector<double> out(numel_of(out_shape));
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& v = parts[pi].node()->value;
        const std::size_t e = extents[pi];
        for (std::size_t o = 0; o < sp.outer; ++o)
            std::copy_n(v.data() + o * e * sp.inner, e * sp.inner,
                        out.data() + (o * sp.n + offset) * sp.inner);
        offset += e;
    }
    return make_result(out_shape, std::move(out), parts,
                       [sp, extents](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                               Node& p = *self.parents[pi];
                               const std::size_t e = extents[pi];
                               if (wants(p)) {
                                   for (std::size_t o = 0; o < sp.outer; ++o) {
                                       const double* src = self.grad.data() + (o * sp.n + off) * sp.inner;
                                       double* dst = g(p).data() + o * e * sp.inner;
                                       for (std::size_t i = 0; i < e * sp.inner; ++i) dst[i] += src[i];
                                   }
                               }
                               off += e;
                           }
                       },
                       "concat");
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
    if (axis >= a.rank() || start + length > a.dim(axis) || length == 0)
        shape_fail("slice", a.shape(),
                   "cannot take [" + std::to_string(start) + ", +" + std::to_string(length) + ") on axis " +
                       std::to_string(axis));
    auto sp = split_axis(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape[axis] = length;
    const auto& av = a.node()->value;
    std::vector<double> out(numel_of(out_shape));
    for (std::size_t o = 0; o < sp.outer; ++o)
        std::copy_n(av.data() + (o * sp.n + start) * sp.inner, length * sp.inner,
                    out.data() + o * length * sp.inner);
    return make_result(out_shape, std::move(out), {a},
                       [sp, start, length](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                               const double* src = self.grad.data() + o * length * sp.inner;
                               double* dst = g(p).data() + (o * sp.n + start) * sp.inner;
                               for (std::size_t i = 0; i < length * sp.inner; ++i) dst[i] += src[i];
                           }
                       },
                       "slice");
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
    if (a.rank() < 1) shape_fail("gather_rows", a.shape(), "has no rows");
    const std::size_t rows = a.dim(0);
    const std::size_t width = a.numel() / std::max<std::size_t>(rows, 1);
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    for (auto i : idx)
        if (i >= rows) shape_fail("gather_rows", a.shape(), "has no row " + std::to_string(i));
    Shape out_shape = a.shape();
    out_shape[0] = idx.size();
    const auto& av = a.node()->value;
    std::vector<double> out(idx.size() * width);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(av.data() + idx[r] * width, width, out.data() + r * width);
    return make_result(out_shape, std::move(out), {a},
                       [idx = std::move(idx), width](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t c = 0; c < width; ++c)
                                   g(p)[idx[r] * width + c] += self.grad[r * width + c];
                       },
                       "gather_rows");
}

// -- reductions ----------------------------------------------------------------

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result({1}, {s}, {a},
                       [](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (auto& x : g(p)) x += self.grad[0];
                       },
                       "sum");
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a, std::size_t axis) {
    if (axis >= a.rank()) shape_fail("sum", a.shape(), "has no axis " + std::to_string(axis));
    auto sp = split_axis(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape[axis] = 1;
    const auto& av = a.node()->value;
    std::vector<double> out(sp.outer * sp.inner, 0.0);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.n; ++j)
            for (std::size_t i = 0; i < sp.inner; ++i)
                out[o * sp.inner + i] += av[(o * sp.n + j) * sp.inner + i];
    return make_result(out_shape, std::move(out), {a},
                       [sp](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t o = 0; o < sp.outer; ++o)
                               for (std::size_t j = 0; j < sp.n; ++j)
                                   for (std::size_t i = 0; i < sp.inner; ++i)
                                       g(p)[(o * sp.n + j) * sp.inner + i] += self.grad[o * sp.inner + i];
                       },
                       "sum_axis");
}

Tensor mean(const Tensor& a, std::size_t axis) {
    if (axis >= a.rank() || a.dim(axis) == 0) shape_fail("mean", a.shape(), "cannot reduce axis");
    return scale(sum(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    if (axis >= a.rank()) shape_fail("softmax", a.shape(), "has no axis " + std::to_string(axis));
    auto sp = split_axis(a.shape(), axis);
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < sp.inner; ++i) {
            auto at = [&](std::size_t j) { return (o * sp.n + j) * sp.inner + i; };
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < sp.n; ++j) mx = std::max(mx, av[at(j)]);
            double z = 0.0;
            for (std::size_t j = 0; j < sp.n; ++j) {
                out[at(j)] = std::exp(av[at(j)] - mx);
                z += out[at(j)];
            }
            for (std::size_t j = 0; j < sp.n; ++j) out[at(j)] /= z;
        }
    return make_result(a.shape(), std::move(out), {a},
                       [sp](Node& self) {
                           Node& p = *self.parents[0];
                           if (!wants(p)) return;
                           for (std::size_t o = 0; o < sp.outer; ++o)
                               for (std::size_t i = 0; i < sp.inner; ++i) {
                                   auto at = [&](std::size_t j) { return (o * sp.n + j) * sp.inner + i; };
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < sp.n; ++j) dot += self.grad[at(j)] * self.value[at(j)];
                                   for (std::size_t j = 0; j < sp.n; ++j)
                                       g(p)[at(j)] += self.value[at(j)] * (self.grad[at(j)] - dot);
                               }
                       },
                       "softmax");
}

Tensor dilated_conv1d(const Tensor& x, const Tensor& w, std::size_t dilation) {
    if (x.rank() != 3 || w.rank() != 3 || x.dim(2) != w.dim(1) || dilation == 0)
        shape_fail("dilated_conv1d", x.shape(), w.shape());
    const std::size_t B = x.dim(0), T = x.dim(1), Ci = x.dim(2);
    const std::size_t K = w.dim(0), Co = w.dim(2);
    const auto& xv = x.node()->value;
    const auto& wv = w.node()->value;
    std::vector<double> out(B * T * Co, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
            double* orow = out.data() + (b * T + t) * Co;
            for (std::size_t k = 0; k < K; ++k) {
                if (k * dilation > t) break;
                const double* xrow = xv.data() + (b * T + t - k * dilation) * Ci;
                for (std::size_t c = 0; c < Ci; ++c) {
                    double xc = xrow[c];
                    if (xc == 0.0) continue;
                    const double* wrow = wv.data() + (k * Ci + c) * Co;
                    for (std::size_t o = 0; o < Co; ++o) orow[o] += xc * wrow[o];
                }
            }
        }
    return make_result({B, T, Co}, std::move(out), {x, w},
                       [=](Node& self) {
                           Node& px = *self.parents[0];
                           Node& pw = *self.parents[1];
                           for (std::size_t b = 0; b < B; ++b)
                               for (std::size_t t = 0; t < T; ++t) {
                                   const double* grow = self.grad.data() + (b * T + t) * Co;
                                   for (std::size_t k = 0; k < K; ++k) {
                                       if (k * dilation > t) break;
                                       std::size_t src = (b * T + t - k * dilation) * Ci;
                                       for (std::size_t c = 0; c < Ci; ++c) {
                                           const double* wrow = pw.value.data() + (k * Ci + c) * Co;
                                           if (wants(px)) {
                                               double acc = 0.0;
                                               for (std::size_t o = 0; o < Co; ++o) acc += grow[o] * wrow[o];
                                               g(px)[src + c] += acc;
                                           }
                                           if (wants(pw)) {
                                               double xc = px.value[src + c];
                                               double* gw = g(pw).data() + (k * Ci + c) * Co;
                                               for (std::size_t o = 0; o < Co; ++o) gw[o] += xc * grow[o];
                                           }
                                       }
                                   }
                               }
                       },
                       "dilated_conv1d");
}

Tensor gat_scores(const Tensor& wh, const Tensor& a_src, const Tensor& a_dst, std::span<const std::uint8_t> mask,
                  double slope) {
    if (wh.rank() != 2 || a_src.rank() != 2 || a_src.shape() != a_dst.shape() ||
        a_src.dim(0) * a_src.dim(1) != wh.dim(1))
        shape_fail("gat_scores", wh.shape(), a_src.shape());
    const std::size_t N = wh.dim(0), H = a_src.dim(0), F = a_src.dim(1), C = H * F;
    if (mask.size() != N * N) shape_fail("gat_scores", wh.shape(), "needs an N*N mask, got " + std::to_string(mask.size()));
    const auto& W = wh.node()->value;
    const auto& as = a_src.node()->value;
    const auto& ad = a_dst.node()->value;
    // per-head node scores
    std::vector<double> ss(H * N, 0.0), sd(H * N, 0.0);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < N; ++i) {
            double a = 0.0, b = 0.0;
            for (std::size_t f = 0; f < F; ++f) {
                a += W[i * C + h * F + f] * as[h * F + f];
                b += W[i * C + h * F + f] * ad[h * F + f];
            }
            ss[h * N + i] = a;
            sd[h * N + i] = b;
        }
    std::vector<double> alpha(H * N * N, 0.0);
    std::vector<std::uint8_t> pos(H * N * N, 0); // pre-activation sign, for backward
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < N; ++i) {
            double* row = alpha.data() + (h * N + i) * N;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < N; ++j) {
                if (mask[i * N + j]) continue;
                double pre = sd[h * N + i] + ss[h * N + j];
                pos[(h * N + i) * N + j] = pre > 0.0;
                row[j] = pre > 0.0 ? pre : slope * pre;
                mx = std::max(mx, row[j]);
            }
            if (mx == -std::numeric_limits<double>::infinity())
                shape_fail("gat_scores", wh.shape(), "destination " + std::to_string(i) + " has no unmasked source");
            double z = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                if (mask[i * N + j]) continue;
                row[j] = std::exp(row[j] - mx);
                z += row[j];
            }
            for (std::size_t j = 0; j < N; ++j)
                if (!mask[i * N + j]) row[j] /= z;
        }
    std::vector<std::uint8_t> mcopy(mask.begin(), mask.end());
    return make_result(
        {H * N, N}, std::move(alpha), {wh, a_src, a_dst},
        [=, pos = std::move(pos), mcopy = std::move(mcopy)](Node& self) {
            Node& pw = *self.parents[0];
            Node& ps = *self.parents[1];
            Node& pd = *self.parents[2];
            const auto& A = self.value;
            const auto& G = self.grad;
            std::vector<double> gss(H * N, 0.0), gsd(H * N, 0.0);
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t i = 0; i < N; ++i) {
                    const std::size_t r = (h * N + i) * N;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < N; ++j) dot += A[r + j] * G[r + j];
                    for (std::size_t j = 0; j < N; ++j) {
                        if (mcopy[i * N + j]) continue;
                        double de = A[r + j] * (G[r + j] - dot);
                        double dp = pos[r + j] ? de : slope * de;
                        gsd[h * N + i] += dp;
                        gss[h * N + j] += dp;
                    }
                }
            const auto& Wv = pw.value;
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t i = 0; i < N; ++i) {
                    const double a = gss[h * N + i], b = gsd[h * N + i];
                    for (std::size_t f = 0; f < F; ++f) {
                        const std::size_t c = i * C + h * F + f;
                        if (wants(pw)) g(pw)[c] += a * ps.value[h * F + f] + b * pd.value[h * F + f];
                        if (wants(ps)) g(ps)[h * F + f] += a * Wv[c];
                        if (wants(pd)) g(pd)[h * F + f] += b * Wv[c];
                    }
                }
        },
        "gat_scores");
}

Tensor gat_aggregate(const Tensor& alpha, const Tensor& wh) {
    if (alpha.rank() != 2 || wh.rank() != 2 || alpha.dim(1) != wh.dim(0) || wh.dim(0) == 0 ||
        alpha.dim(0) % wh.dim(0) != 0)
        shape_fail("gat_aggregate", alpha.shape(), wh.shape());
    const std::size_t N = wh.dim(0), H = alpha.dim(0) / N, C = wh.dim(1);
    if (H == 0 || C % H != 0) shape_fail("gat_aggregate", alpha.shape(), wh.shape());
    const std::size_t F = C / H;
    const auto& A = alpha.node()->value;
    const auto& W = wh.node()->value;
    std::vector<double> out(N * C, 0.0);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                const double a = A[(h * N + i) * N + j];
                if (a == 0.0) continue;
                for (std::size_t f = 0; f < F; ++f) out[i * C + h * F + f] += a * W[j * C + h * F + f];
            }
    return make_result({N, C}, std::move(out), {alpha, wh},
                       [=](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pw = *self.parents[1];
                           const auto& G = self.grad;
                           for (std::size_t h = 0; h < H; ++h)
                               for (std::size_t i = 0; i < N; ++i)
                                   for (std::size_t j = 0; j < N; ++j) {
                                       const std::size_t ai = (h * N + i) * N + j;
                                       double acc = 0.0;
                                       for (std::size_t f = 0; f < F; ++f) {
                                           const double gi = G[i * C + h * F + f];
                                           acc += gi * pw.value[j * C + h * F + f];
                                           if (wants(pw)) g(pw)[j * C + h * F + f] += pa.value[ai] * gi;
                                       }
                                       if (wants(pa)) g(pa)[ai] += acc;
                                   }
                       },
                       "gat_aggregate");
}

} // namespace stcg::num
