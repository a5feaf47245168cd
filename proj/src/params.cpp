#include "stcg/params.hpp"

#include "stcg/rng.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stcg::num {

std::size_t ParamStore::add(std::string name, Shape shape, std::vector<double> value) {
    if (contains(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    if (numel_of(shape) != value.size())
        throw ShapeError("ParamStore: parameter '" + name + "' shape " + shape_str(shape) +
                         " does not match its values");
    params_.push_back(Param{std::move(name), std::move(shape), std::move(value)});
    return params_.size() - 1;
}

std::size_t ParamStore::add_zeros(std::string name, Shape shape) {
    auto n = numel_of(shape);
    return add(std::move(name), std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t ParamStore::add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(fan_in * fan_out);
    for (auto& x : v) x = rng.uniform(-limit, limit);
    return add(std::move(name), {fan_in, fan_out}, std::move(v));
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::size_t ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw std::out_of_range("ParamStore: no parameter named '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return true;
    return false;
}

std::vector<Tensor> ParamStore::leaves(bool requires_grad) const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.emplace_back(p.shape, p.value, requires_grad);
    return out;
}

std::vector<std::vector<double>> ParamStore::grads_of(const std::vector<Tensor>& leaves) {
    std::vector<std::vector<double>> out;
    out.reserve(leaves.size());
    for (const auto& t : leaves) {
        auto gr = t.grad();
        if (gr.empty())
            out.emplace_back(t.numel(), 0.0);
        else
            out.emplace_back(gr.begin(), gr.end());
    }
    return out;
}

bool ParamStore::all_finite() const {
    for (const auto& p : params_)
        for (double v : p.value)
            if (!std::isfinite(v)) return false;
    return true;
}

nlohmann::json ParamStore::to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& p : params_) {
        arr.push_back({{"name", p.name}, {"shape", p.shape}, {"data", p.value}});
    }
    return arr;
}

ParamStore ParamStore::from_json(const nlohmann::json& j) {
    ParamStore s;
    if (!j.is_array()) throw std::runtime_error("checkpoint: 'params' must be an array");
    for (const auto& e : j) {
        s.add(e.at("name").get<std::string>(), e.at("shape").get<Shape>(), e.at("data").get<std::vector<double>>());
    }
    return s;
}

std::string checkpoint_to_text(const Checkpoint& ck) {
    nlohmann::ordered_json j;
    j["format"] = "stcg-checkpoint";
    j["version"] = kCheckpointVersion;
    j["kind"] = ck.kind;
    j["model_id"] = ck.model_id;
    j["config"] = ck.config;
    j["extra"] = ck.extra;
    j["params"] = ck.params.to_json();
    return j.dump() + "\n";
}

Checkpoint checkpoint_from_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
    }
    if (j.value("format", "") != "stcg-checkpoint") throw std::runtime_error("checkpoint: not an stcg checkpoint");
    if (j.value("version", 0) != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + j.value("version", nlohmann::json()).dump());
    Checkpoint ck;
    try {
        ck.kind = j.at("kind").get<std::string>();
        ck.model_id = j.at("model_id").get<std::string>();
        ck.config = j.at("config");
        ck.extra = j.at("extra");
        ck.params = ParamStore::from_json(j.at("params"));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << checkpoint_to_text(ck);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_text(ss.str());
}

} // namespace stcg::num
