#pragma once

// Named parameter buffers plus the checkpoint file shared by every trainable
// model in the project.
//
// Checkpoint format (one JSON document, UTF-8):
//   { "format": "stcg-checkpoint", "version": 1, "kind": "<model kind>",
//     "model_id": "<string>", "config": {...}, "extra": {...},
//     "params": [ { "name": "...", "shape": [..], "data": [..] }, ... ] }
// Doubles are written in shortest round-trip form, so save/load is exact.

#include "stcg/tensor.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace stcg {
class Rng;
}

namespace stcg::num {

struct Param {
    std::string name;
    Shape shape;
    std::vector<double> value;

    bool operator==(const Param&) const = default;
};

class ParamStore {
  public:
    /// Returns the index of the new parameter.
    std::size_t add(std::string name, Shape shape, std::vector<double> value);
    std::size_t add_zeros(std::string name, Shape shape);
    /// Glorot-uniform init for a [fan_in, fan_out] matrix.
    std::size_t add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng);

    [[nodiscard]] std::size_t size() const { return params_.size(); }
    [[nodiscard]] std::size_t total_values() const;
    [[nodiscard]] const Param& operator[](std::size_t i) const { return params_[i]; }
    [[nodiscard]] Param& operator[](std::size_t i) { return params_[i]; }
    [[nodiscard]] std::size_t index_of(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const;

    /// Fresh leaf tensors holding copies of the current values.
    [[nodiscard]] std::vector<Tensor> leaves(bool requires_grad) const;
    /// Gradients read back from leaves() after backward (zeros where absent).
    [[nodiscard]] static std::vector<std::vector<double>> grads_of(const std::vector<Tensor>& leaves);

    [[nodiscard]] bool all_finite() const;
    bool operator==(const ParamStore&) const = default;

    [[nodiscard]] nlohmann::json to_json() const;
    static ParamStore from_json(const nlohmann::json& j);

  private:
    std::vector<Param> params_;
};

struct Checkpoint {
    std::string kind;
    std::string model_id;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json extra = nlohmann::json::object();
    ParamStore params;
};

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_text(const Checkpoint& ck);
Checkpoint checkpoint_from_text(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace stcg::num
