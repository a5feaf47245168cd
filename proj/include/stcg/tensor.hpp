#pragma once

// Dense row-major tensors with a dynamic reverse-mode tape.
//
// A Tensor is a shared handle to an immutable node. Ops return new nodes that
// remember their parents and a local gradient rule; backward() walks the
// recorded graph once in reverse topological order. Leaf gradients
// accumulate across calls until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stcg::num {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& s);
std::size_t numel_of(const Shape& s);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads self.grad and accumulates into the grads of parents that need it.
    std::function<void(Node& self)> backward;
    std::string_view op = "leaf";
};

class Tensor {
  public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    [[nodiscard]] bool defined() const { return node_ != nullptr; }
    [[nodiscard]] const Shape& shape() const { return node_->shape; }
    [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
    [[nodiscard]] std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    [[nodiscard]] std::size_t numel() const { return node_->value.size(); }
    [[nodiscard]] std::span<const double> data() const { return node_->value; }
    [[nodiscard]] double item() const;
    [[nodiscard]] double at(std::size_t i) const { return node_->value.at(i); }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const;
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    /// Empty span when no gradient has been accumulated.
    [[nodiscard]] std::span<const double> grad() const { return node_->grad; }
    void zero_grad();
    /// Value copy with no history.
    [[nodiscard]] Tensor detach() const;

    [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    std::shared_ptr<Node> node_;

    friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                              std::function<void(Node&)>, std::string_view);
};

/// Builds a non-leaf node. Custom ops (and tests of the tape itself) use this.
Tensor make_result(Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
                   std::function<void(Node&)> backward, std::string_view op);

/// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
void backward(const Tensor& loss);
/// Backward with an explicit seed gradient for a non-scalar output.
void backward(const Tensor& output, std::span<const double> seed);

// -- elementwise / broadcasting ------------------------------------------
// Binary ops accept identical shapes, a [1,C] row against an [N,C] matrix,
// or a one-element right operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
/// Entries where mask != 0 are replaced by `value`; no gradient flows there.
Tensor masked_fill(const Tensor& a, std::span<const std::uint8_t> mask, double value);

// -- structural ------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
/// Rows along axis 0, repeats allowed.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);

// -- reductions ------------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Keeps the reduced axis with extent 1.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);

/// Causal dilated convolution. x: [B,T,Cin], w: [K,Cin,Cout] -> [B,T,Cout].
/// out[b,t] = sum_k x[b, t - k*dilation] * w[k], zero for negative indices.
Tensor dilated_conv1d(const Tensor& x, const Tensor& w, std::size_t dilation);

// -- graph attention kernels ---------------------------------------------------
// Fused so a multi-head layer costs two tape nodes instead of dozens.

/// wh: [N, H*F]; a_src, a_dst: [H, F]; mask: N*N bytes, row = destination i,
/// column = source j, nonzero = no arc j->i. Returns alpha [H*N, N] with
///   alpha[h*N+i, j] = softmax_j over unmasked j of leaky_relu(a_dst[h].wh_i + a_src[h].wh_j)
/// and exact zeros at masked entries. A fully masked row is a ShapeError.
Tensor gat_scores(const Tensor& wh, const Tensor& a_src, const Tensor& a_dst, std::span<const std::uint8_t> mask,
                  double slope = 0.2);
/// alpha: [H*N, N], wh: [N, H*F] -> [N, H*F] with out[i, h*F+f] = sum_j alpha[h*N+i, j] * wh[j, h*F+f].
Tensor gat_aggregate(const Tensor& alpha, const Tensor& wh);

} // namespace stcg::num
