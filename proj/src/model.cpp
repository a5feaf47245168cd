#include "stcg/model.hpp"

#include "stcg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace stcg::model {

using namespace stcg::num;
using nlohmann::json;

const char* to_string(Arch a) {
    switch (a) {
    case Arch::IaStgnn: return "ia_stgnn";
    case Arch::StGnn: return "st_gnn";
    case Arch::GcnLstm: return "gcn_lstm";
    case Arch::Flat: return "flat";
    }
    return "?";
}

std::optional<Arch> arch_from(const std::string& s) {
    for (Arch a : {Arch::IaStgnn, Arch::StGnn, Arch::GcnLstm, Arch::Flat})
        if (s == to_string(a)) return a;
    return std::nullopt;
}

// -- configs -------------------------------------------------------------------

void ModelConfig::validate() const {
    auto bad = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
    if (heads < 1) bad("heads must be >= 1");
    if (embed_dim < 1 || embed_dim % heads != 0) bad("embed_dim must be a positive multiple of heads");
    if (gat_layers < 1) bad("gat_layers must be >= 1");
    if (temporal_kernel < 1) bad("temporal_kernel must be >= 1");
    if (dilations.empty()) bad("dilations must be non-empty");
    for (int d : dilations)
        if (d < 1) bad("dilations must be >= 1");
    if (flat_hidden < 1) bad("flat_hidden must be >= 1");
    if (!(y_max > y_min)) bad("y_max must exceed y_min");
    if (feature_width == 0) bad("feature_width must be > 0");
    if (intervention_width == 0) bad("intervention_width must be > 0");
}

int ModelConfig::receptive_field() const {
    int r = 1;
    for (int d : dilations) r += (temporal_kernel - 1) * d;
    return r;
}

json ModelConfig::to_json() const {
    return json{{"arch", to_string(arch)},
                {"heads", heads},
                {"embed_dim", embed_dim},
                {"gat_layers", gat_layers},
                {"temporal_kernel", temporal_kernel},
                {"dilations", dilations},
                {"flat_hidden", flat_hidden},
                {"y_min", y_min},
                {"y_max", y_max},
                {"feature_width", feature_width},
                {"intervention_width", intervention_width},
                {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    if (j.contains("arch")) {
        auto a = arch_from(j.at("arch").get<std::string>());
        if (!a) throw std::invalid_argument("model config: unknown arch '" + j.at("arch").get<std::string>() + "'");
        c.arch = *a;
    }
    c.heads = j.value("heads", c.heads);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.gat_layers = j.value("gat_layers", c.gat_layers);
    c.temporal_kernel = j.value("temporal_kernel", c.temporal_kernel);
    c.dilations = j.value("dilations", c.dilations);
    c.flat_hidden = j.value("flat_hidden", c.flat_hidden);
    c.y_min = j.value("y_min", c.y_min);
    c.y_max = j.value("y_max", c.y_max);
    c.feature_width = j.value("feature_width", c.feature_width);
    c.intervention_width = j.value("intervention_width", c.intervention_width);
    c.seed = j.value("seed", c.seed);
    return c;
}

void TrainConfig::validate() const {
    auto bad = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
    if (!(lr > 0.0)) bad("lr must be > 0");
    if (!(lr_floor > 0.0 && lr_floor <= 1.0)) bad("lr_floor must be in (0, 1]");
    if (epochs < 1) bad("epochs must be >= 1");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (!(lambda >= 0.0)) bad("lambda must be >= 0");
    if (!(beta >= 0.0)) bad("beta must be >= 0");
    if (!(creg_noise >= 0.0)) bad("creg_noise must be >= 0");
}

json TrainConfig::to_json() const {
    return json{{"lr", lr},         {"cosine", cosine}, {"lr_floor", lr_floor}, {"epochs", epochs},         {"batch_size", batch_size},
                {"lambda", lambda}, {"beta", beta},             {"literal_cf", literal_cf},
                {"creg_noise", creg_noise}, {"seed", seed}, {"time_budget_s", time_budget_s}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.cosine = j.value("cosine", c.cosine);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lambda = j.value("lambda", c.lambda);
    c.beta = j.value("beta", c.beta);
    c.literal_cf = j.value("literal_cf", c.literal_cf);
    c.creg_noise = j.value("creg_noise", c.creg_noise);
    c.seed = j.value("seed", c.seed);
    c.time_budget_s = j.value("time_budget_s", c.time_budget_s);
    return c;
}

// -- attention map ---------------------------------------------------------------

std::vector<AttentionEdge> AttentionMap::summary(std::size_t k) const {
    if (edges.empty()) return {};
    int t_last = 0;
    for (const auto& e : edges) t_last = std::max(t_last, e.t);
    std::map<std::pair<int, int>, double> acc;
    for (const auto& e : edges)
        if (e.t == t_last && e.layer == layers - 1 && e.src != e.dst) acc[{e.src, e.dst}] += e.weight;
    std::vector<AttentionEdge> out;
    for (const auto& [key, w] : acc) out.push_back({t_last, layers - 1, -1, key.first, key.second, w / heads});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    if (out.size() > k) out.resize(k);
    return out;
}

// -- building blocks ---------------------------------------------------------------

std::vector<std::uint8_t> attention_mask(const graph::GraphSnapshot& s) {
    const std::size_t N = s.nodes.size();
    std::vector<std::uint8_t> m(N * N, 1);
    for (std::size_t i = 0; i < N; ++i) m[i * N + i] = 0;
    for (const auto& e : s.edges) {
        auto si = s.index_of(e.src), di = s.index_of(e.dst);
        if (si != graph::GraphSnapshot::npos && di != graph::GraphSnapshot::npos) m[di * N + si] = 0;
    }
    return m;
}

Tensor feature_tensor(const graph::GraphSnapshot& s) {
    const auto& X = s.features;
    std::vector<double> v(X.data.size());
    for (std::size_t r = 0; r < X.rows; ++r)
        for (std::size_t c = 0; c < X.cols; ++c)
            v[r * X.cols + c] = X(r, c) * (c < graph::kFeatureWidth ? graph::feature::kScale[c] : 1.0);
    return Tensor({X.rows, X.cols}, std::move(v));
}

GatOutput gat_forward(const Tensor& x, std::span<const std::uint8_t> mask, const std::vector<GatParams>& layers) {
    GatOutput out;
    Tensor h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& P = layers[l];
        if (h.rank() != 2 || h.dim(1) != P.w.dim(0))
            throw ModelError("gat_forward: layer " + std::to_string(l) + " expects width " +
                             std::to_string(P.w.dim(0)) + ", got " + shape_str(h.shape()));
        Tensor wh = matmul(h, P.w);
        Tensor alpha = gat_scores(wh, P.a_src, P.a_dst, mask);
        Tensor z = relu(add(gat_aggregate(alpha, wh), P.bias));
        h = l == 0 ? z : add(z, h);
        out.attention.push_back(alpha);
    }
    out.embeddings = h;
    return out;
}

Tensor temporal_forward(const Tensor& seq, const TemporalParams& p) {
    const std::size_t B = seq.dim(0), T = seq.dim(1), E = seq.dim(2);
    Tensor h = seq;
    for (std::size_t k = 0; k < p.dilations.size(); ++k) {
        Tensor c = dilated_conv1d(h, p.w[k], static_cast<std::size_t>(p.dilations[k]));
        c = reshape(relu(add(reshape(c, {B * T, E}), p.bias[k])), {B, T, E});
        h = add(c, h);
    }
    return h;
}

Tensor fuse_intervention(const Tensor& context, const Tensor& w, const Tensor& G, const Tensor& gb, const Tensor& H,
                         const Tensor& hb) {
    Tensor g = add(matmul(w, G), gb);
    Tensor h = add(matmul(w, H), hb);
    return add(mul(context, add_scalar(g, 1.0)), h);
}

// -- model -----------------------------------------------------------------------

namespace {

std::string nm(const char* base, std::size_t i, const char* field) {
    return std::string(base) + std::to_string(i) + "." + field;
}

Tensor row_tensor(const std::vector<double>& v) { return Tensor({1, v.size()}, v); }

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

Model::Model(ModelConfig cfg, double label_mean) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build(label_mean);
    index();
}

void Model::build(double label_mean) {
    Rng rng(cfg_.seed, streams::kInit);
    const std::size_t d = cfg_.feature_width, m = cfg_.intervention_width;
    const std::size_t E = static_cast<std::size_t>(cfg_.embed_dim), H = static_cast<std::size_t>(cfg_.heads);
    auto& P = params_;
    switch (cfg_.arch) {
    case Arch::IaStgnn:
    case Arch::StGnn:
        for (std::size_t l = 0; l < static_cast<std::size_t>(cfg_.gat_layers); ++l) {
            P.add_glorot(nm("gat", l, "w"), l == 0 ? d : E, E, rng);
            P.add_glorot(nm("gat", l, "a_src"), H, E / H, rng);
            P.add_glorot(nm("gat", l, "a_dst"), H, E / H, rng);
            P.add_zeros(nm("gat", l, "b"), {1, E});
        }
        for (std::size_t k = 0; k < cfg_.dilations.size(); ++k) {
            const auto K = static_cast<std::size_t>(cfg_.temporal_kernel);
            auto idx = P.add_glorot(nm("tcn", k, "w"), K * E, E, rng);
            P[idx].shape = {K, E, E};
            P.add_zeros(nm("tcn", k, "b"), {1, E});
        }
        if (cfg_.arch == Arch::IaStgnn) {
            P.add_zeros("fuse.g", {m, E});
            P.add_zeros("fuse.gb", {1, E});
            P.add_zeros("fuse.h", {m, E});
            P.add_zeros("fuse.hb", {1, E});
            P.add_zeros("fuse.gr", {1, E});
            P.add_zeros("fuse.hr", {1, E});
        }
        break;
    case Arch::GcnLstm: {
        for (std::size_t l = 0; l < static_cast<std::size_t>(cfg_.gat_layers); ++l) {
            P.add_glorot(nm("gcn", l, "w"), l == 0 ? d : E, E, rng);
            P.add_zeros(nm("gcn", l, "b"), {1, E});
        }
        P.add_glorot("lstm.wx", E, 4 * E, rng);
        P.add_glorot("lstm.wh", E, 4 * E, rng);
        std::vector<double> b(4 * E, 0.0);
        for (std::size_t i = E; i < 2 * E; ++i) b[i] = 1.0; // forget gate
        P.add("lstm.b", {1, 4 * E}, b);
        break;
    }
    case Arch::Flat: {
        const auto Hd = static_cast<std::size_t>(cfg_.flat_hidden);
        P.add_glorot("flat0.w", d + m, Hd, rng);
        P.add_zeros("flat0.b", {1, Hd});
        P.add_glorot("flat1.w", Hd, Hd, rng);
        P.add_zeros("flat1.b", {1, Hd});
        P.add_glorot("head.u3", Hd, 1, rng);
        break;
    }
    }
    if (cfg_.arch != Arch::Flat) {
        P.add_glorot("head.u1", E, E, rng);
        P.add_zeros("head.c1", {1, E});
        P.add_glorot("head.u2", 2 * E, E, rng);
        P.add_zeros("head.c2", {1, E});
        P.add_glorot("head.u3", E, 1, rng);
    }
    const double frac = std::clamp((label_mean - cfg_.y_min) / (cfg_.y_max - cfg_.y_min), 0.01, 0.99);
    P.add("head.c3", {1, 1}, {logit(frac)});
}

void Model::index() {
    auto at = [&](const std::string& n) {
        if (!params_.contains(n)) throw ModelError("model parameters lack '" + n + "'");
        return params_.index_of(n);
    };
    L_ = Layout{};
    const auto nl = static_cast<std::size_t>(cfg_.gat_layers);
    if (cfg_.arch == Arch::IaStgnn || cfg_.arch == Arch::StGnn) {
        for (std::size_t l = 0; l < nl; ++l) {
            L_.gat_w.push_back(at(nm("gat", l, "w")));
            L_.gat_as.push_back(at(nm("gat", l, "a_src")));
            L_.gat_ad.push_back(at(nm("gat", l, "a_dst")));
            L_.gat_b.push_back(at(nm("gat", l, "b")));
        }
        for (std::size_t k = 0; k < cfg_.dilations.size(); ++k) {
            L_.tcn_w.push_back(at(nm("tcn", k, "w")));
            L_.tcn_b.push_back(at(nm("tcn", k, "b")));
        }
        if (cfg_.arch == Arch::IaStgnn) {
            L_.fuse_g = at("fuse.g");
            L_.fuse_gb = at("fuse.gb");
            L_.fuse_h = at("fuse.h");
            L_.fuse_hb = at("fuse.hb");
            L_.fuse_gr = at("fuse.gr");
            L_.fuse_hr = at("fuse.hr");
        }
    } else if (cfg_.arch == Arch::GcnLstm) {
        for (std::size_t l = 0; l < nl; ++l) {
            L_.gcn_w.push_back(at(nm("gcn", l, "w")));
            L_.gcn_b.push_back(at(nm("gcn", l, "b")));
        }
        L_.lstm_wx = at("lstm.wx");
        L_.lstm_wh = at("lstm.wh");
        L_.lstm_b = at("lstm.b");
    } else {
        L_.flat_w = {at("flat0.w"), at("flat1.w")};
        L_.flat_b = {at("flat0.b"), at("flat1.b")};
    }
    if (cfg_.arch != Arch::Flat) {
        L_.u1 = at("head.u1");
        L_.c1 = at("head.c1");
        L_.u2 = at("head.u2");
        L_.c2 = at("head.c2");
    }
    L_.u3 = at("head.u3");
    L_.c3 = at("head.c3");
}

void Model::check_inputs(const graph::Scenario& s) const {
    auto v = graph::validate(s);
    if (!v.empty()) throw ModelError("invalid scenario '" + s.id + "':\n" + graph::format_violations(v));
    const auto cols = s.graph.snapshots.front().features.cols;
    if (cols != cfg_.feature_width)
        throw ModelError("feature width " + std::to_string(cols) + " does not match model width " +
                         std::to_string(cfg_.feature_width));
    const auto iw = graph::intervention_width(s.registries);
    if (iw != cfg_.intervention_width)
        throw ModelError("intervention width " + std::to_string(iw) + " does not match model width " +
                         std::to_string(cfg_.intervention_width));
}

void Model::check_intervention(const graph::Scenario& s, const graph::InterventionVector& w) const {
    const auto& reg = s.registries;
    if (!reg.munition(w.weapon_class))
        throw ModelError("intervention names unknown munition id " + std::to_string(w.weapon_class));
    if (!reg.path(w.path_strategy))
        throw ModelError("intervention names unknown path id " + std::to_string(w.path_strategy));
    if (!(w.release_window >= 0.0) || !std::isfinite(w.release_window))
        throw ModelError("intervention release_window must be finite and >= 0");
    std::vector<int> a = w.target_priority, b;
    for (const auto& t : reg.targets) b.push_back(t.node);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw ModelError("intervention target_priority must be a permutation of the registry target nodes");
}

std::vector<GatParams> Model::gat_params(const Leaves& p) const {
    std::vector<GatParams> out;
    for (std::size_t l = 0; l < L_.gat_w.size(); ++l)
        out.push_back({p[L_.gat_w[l]], p[L_.gat_as[l]], p[L_.gat_ad[l]], p[L_.gat_b[l]]});
    return out;
}

namespace {

std::vector<std::size_t> target_rows(const graph::Scenario& s, const graph::GraphSnapshot& snap) {
    std::vector<std::size_t> rows;
    for (const auto& t : s.registries.targets) {
        auto i = snap.index_of(t.node);
        if (i == graph::GraphSnapshot::npos) throw ModelError("target node " + std::to_string(t.node) + " missing");
        rows.push_back(i);
    }
    return rows;
}

Tensor normalized_adjacency(const graph::GraphSnapshot& s) {
    auto mask = attention_mask(s);
    const std::size_t N = s.nodes.size();
    std::vector<double> a(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < N; ++j) deg += mask[i * N + j] ? 0.0 : 1.0;
        for (std::size_t j = 0; j < N; ++j) a[i * N + j] = mask[i * N + j] ? 0.0 : 1.0 / deg;
    }
    return Tensor({N, N}, std::move(a));
}

} // namespace

namespace {

/// Encoder row order: targets (registry order) then each path's relays (registry order).
std::vector<std::size_t> encoder_rows(const graph::Scenario& s, const graph::GraphSnapshot& snap) {
    auto rows = target_rows(s, snap);
    for (const auto& p : s.registries.paths)
        for (int r : p.relays) {
            auto i = snap.index_of(r);
            if (i == graph::GraphSnapshot::npos) throw ModelError("relay node " + std::to_string(r) + " missing");
            rows.push_back(i);
        }
    return rows;
}

} // namespace

Encoded Model::encode(const Leaves& p, const graph::Scenario& s) const {
    Encoded enc;
    enc.scenario = &s;
    enc.targets = s.registries.targets.size();
    {
        std::size_t row = enc.targets;
        for (const auto& path : s.registries.paths) {
            std::vector<std::size_t> rows;
            for (std::size_t k = 0; k < path.relays.size(); ++k) rows.push_back(row++);
            enc.path_rows.push_back(std::move(rows));
        }
    }
    const auto& snaps = s.graph.snapshots;
    const auto E = static_cast<std::size_t>(cfg_.embed_dim);
    if (cfg_.arch == Arch::Flat) {
        std::vector<double> acc(cfg_.feature_width, 0.0);
        double cnt = 0.0;
        for (const auto& snap : snaps) {
            Tensor x = feature_tensor(snap);
            for (std::size_t r = 0; r < x.dim(0); ++r)
                for (std::size_t c = 0; c < x.dim(1); ++c) acc[c] += x.at(r, c);
            cnt += static_cast<double>(x.dim(0));
        }
        for (double& v : acc) v /= cnt;
        enc.final = row_tensor(acc);
        return enc;
    }
    if (cfg_.arch == Arch::GcnLstm) {
        Tensor h, c;
        for (const auto& snap : snaps) {
            Tensor a = normalized_adjacency(snap);
            Tensor x = feature_tensor(snap);
            for (std::size_t l = 0; l < L_.gcn_w.size(); ++l) {
                Tensor z = relu(add(matmul(a, matmul(x, p[L_.gcn_w[l]])), p[L_.gcn_b[l]]));
                x = l == 0 ? z : add(z, x);
            }
            auto rows = encoder_rows(s, snap);
            Tensor xt = gather_rows(x, rows);
            if (!h.defined()) {
                h = Tensor::zeros({rows.size(), E});
                c = Tensor::zeros({rows.size(), E});
            }
            Tensor gates = add(add(matmul(xt, p[L_.lstm_wx]), matmul(h, p[L_.lstm_wh])), p[L_.lstm_b]);
            Tensor ig = sigmoid(slice(gates, 1, 0, E));
            Tensor fg = sigmoid(slice(gates, 1, E, E));
            Tensor gg = tanh(slice(gates, 1, 2 * E, E));
            Tensor og = sigmoid(slice(gates, 1, 3 * E, E));
            c = add(mul(fg, c), mul(ig, gg));
            h = mul(og, tanh(c));
        }
        enc.final = h;
        return enc;
    }
    auto gp = gat_params(p);
    std::vector<Tensor> steps;
    for (const auto& snap : snaps) {
        auto mask = attention_mask(snap);
        auto g = gat_forward(feature_tensor(snap), mask, gp);
        auto rows = encoder_rows(s, snap);
        steps.push_back(reshape(gather_rows(g.embeddings, rows), {rows.size(), 1, E}));
        enc.attention.push_back(std::move(g.attention));
    }
    TemporalParams tp;
    for (std::size_t k = 0; k < L_.tcn_w.size(); ++k) {
        tp.w.push_back(p[L_.tcn_w[k]]);
        tp.bias.push_back(p[L_.tcn_b[k]]);
    }
    tp.dilations = cfg_.dilations;
    enc.seq = temporal_forward(concat(steps, 1), tp);
    return enc;
}

Tensor Model::readout(const Leaves& p, const Encoded& e, const graph::InterventionVector& w) const {
    const auto& reg = e.scenario->registries;
    auto w_enc = graph::encode_intervention(w, reg);
    if (w_enc.size() != cfg_.intervention_width)
        throw ModelError("encoded intervention width " + std::to_string(w_enc.size()) + ", model expects " +
                         std::to_string(cfg_.intervention_width));
    Tensor z;
    if (cfg_.arch == Arch::Flat) {
        Tensor x = concat({e.final, row_tensor(w_enc)}, 1);
        x = relu(add(matmul(x, p[L_.flat_w[0]]), p[L_.flat_b[0]]));
        x = relu(add(matmul(x, p[L_.flat_w[1]]), p[L_.flat_b[1]]));
        z = add(matmul(x, p[L_.u3]), p[L_.c3]);
        return add_scalar(scale(sigmoid(z), cfg_.y_max - cfg_.y_min), cfg_.y_min);
    }
    const auto E = static_cast<std::size_t>(cfg_.embed_dim);
    const std::size_t M = e.targets;
    const bool aware = cfg_.arch == Arch::IaStgnn;
    Tensor ctx; // [M + R, E]
    if (cfg_.arch == Arch::GcnLstm) {
        ctx = e.final;
    } else {
        const std::size_t T = e.seq.dim(1);
        const std::size_t t = aware ? graph::release_step(w, reg, T) : T - 1;
        ctx = reshape(slice(e.seq, 1, t, 1), {e.seq.dim(0), E});
    }
    Tensor tgt = slice(ctx, 0, 0, M);
    std::vector<std::size_t> relay_rows;
    if (aware) {
        for (std::size_t k = 0; k < reg.paths.size(); ++k)
            if (reg.paths[k].id == w.path_strategy) relay_rows = e.path_rows[k];
    } else {
        for (const auto& r : e.path_rows) relay_rows.insert(relay_rows.end(), r.begin(), r.end());
    }
    if (aware) {
        std::vector<double> rank(M, 0.0);
        for (std::size_t k = 0; k < M; ++k) {
            auto it = std::find(w.target_priority.begin(), w.target_priority.end(), reg.targets[k].node);
            rank[k] = static_cast<double>(it - w.target_priority.begin()) / static_cast<double>(M);
        }
        Tensor rk({M, 1}, rank);
        Tensor wt = row_tensor(w_enc);
        Tensor g = add(add(matmul(rk, p[L_.fuse_gr]), matmul(wt, p[L_.fuse_g])), p[L_.fuse_gb]);
        Tensor h = add(add(matmul(rk, p[L_.fuse_hr]), matmul(wt, p[L_.fuse_h])), p[L_.fuse_hb]);
        tgt = add(mul(tgt, add_scalar(g, 1.0)), h);
    }
    Tensor pooled_t = mean(relu(add(matmul(tgt, p[L_.u1]), p[L_.c1])), 0);
    Tensor pooled_r = Tensor::zeros({1, E});
    if (!relay_rows.empty()) {
        Tensor rel = gather_rows(ctx, relay_rows);
        if (aware) rel = fuse_intervention(rel, row_tensor(w_enc), p[L_.fuse_g], p[L_.fuse_gb], p[L_.fuse_h],
                                           p[L_.fuse_hb]);
        pooled_r = mean(relu(add(matmul(rel, p[L_.u1]), p[L_.c1])), 0);
    }
    Tensor q = relu(add(matmul(concat({pooled_t, pooled_r}, 1), p[L_.u2]), p[L_.c2]));
    z = add(matmul(q, p[L_.u3]), p[L_.c3]);
    return add_scalar(scale(sigmoid(z), cfg_.y_max - cfg_.y_min), cfg_.y_min);
}

Tensor Model::causal_reg(const Leaves& p, const graph::Scenario& s, const Encoded& e, double noise,
                         std::uint64_t noise_seed) const {
    if (e.attention.empty()) return Tensor::scalar(0.0);
    std::vector<Tensor> ents;
    for (const auto& per_layer : e.attention)
        for (const auto& a : per_layer) {
            Tensor ent = scale(sum(mul(a, log(add_scalar(a, 1e-12)))), -1.0 / static_cast<double>(a.dim(0)));
            ents.push_back(ent);
        }
    Tensor entropy = mean(concat(ents, 0));

    const auto& last = s.graph.snapshots.back();
    Tensor x = feature_tensor(last);
    std::vector<double> xv(x.data().begin(), x.data().end());
    Rng rng(noise_seed, streams::kNoise);
    const std::size_t d = x.dim(1);
    for (std::size_t r = 0; r < x.dim(0); ++r)
        for (std::size_t c : {graph::feature::kPayloadClass, graph::feature::kFuelFraction})
            if (c < d) xv[r * d + c] += rng.normal(0.0, noise);
    auto mask = attention_mask(last);
    auto g = gat_forward(Tensor(x.shape(), std::move(xv)), mask, gat_params(p));
    const auto& ref = e.attention.back();
    std::vector<Tensor> drifts;
    for (std::size_t l = 0; l < ref.size(); ++l)
        drifts.push_back(scale(sum(abs(sub(ref[l], g.attention[l]))), 1.0 / static_cast<double>(ref[l].dim(0))));
    Tensor drift = mean(concat(drifts, 0));
    return add(entropy, drift);
}

AttentionMap Model::attention_map(const graph::Scenario& s, const Encoded& e) const {
    AttentionMap am;
    if (e.attention.empty()) return am;
    am.layers = cfg_.gat_layers;
    am.heads = cfg_.heads;
    const auto H = static_cast<std::size_t>(cfg_.heads);
    for (std::size_t t = 0; t < e.attention.size(); ++t) {
        const auto& snap = s.graph.snapshots[t];
        auto mask = attention_mask(snap);
        const std::size_t N = snap.nodes.size();
        for (std::size_t l = 0; l < e.attention[t].size(); ++l) {
            const auto& a = e.attention[t][l];
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t i = 0; i < N; ++i)
                    for (std::size_t j = 0; j < N; ++j) {
                        if (mask[i * N + j]) continue;
                        am.edges.push_back({snap.t, static_cast<int>(l), static_cast<int>(h), snap.nodes[j].id,
                                            snap.nodes[i].id, a.at(h * N + i, j)});
                    }
        }
    }
    return am;
}

Prediction Model::predict_delay(const graph::Scenario& s) const {
    check_inputs(s);
    auto p = params_.leaves(false);
    auto enc = encode(p, s);
    Prediction out;
    out.y_hat = readout(p, enc, s.current_intervention()).item();
    out.attention = attention_map(s, enc);
    return out;
}

double Model::predict(const graph::Scenario& s, const graph::InterventionVector& w) const {
    return predict_many(s, {w}).front();
}

std::vector<double> Model::predict_many(const graph::Scenario& s,
                                        const std::vector<graph::InterventionVector>& ws) const {
    check_inputs(s);
    for (const auto& w : ws) check_intervention(s, w);
    auto p = params_.leaves(false);
    auto enc = encode(p, s);
    std::vector<double> out;
    for (const auto& w : ws) out.push_back(readout(p, enc, w).item());
    return out;
}

std::pair<double, double> Model::counterfactual_predict(const graph::Scenario& s,
                                                        const graph::InterventionVector& alt) const {
    auto v = predict_many(s, {s.current_intervention(), alt});
    return {v[0], v[1]};
}

num::Checkpoint Model::to_checkpoint(const std::string& model_id) const {
    num::Checkpoint ck;
    ck.kind = "delay_model";
    ck.model_id = model_id;
    ck.config = cfg_.to_json();
    ck.params = params_;
    return ck;
}

Model Model::from_checkpoint(const num::Checkpoint& ck) {
    if (ck.kind != "delay_model") throw ModelError("checkpoint kind '" + ck.kind + "' is not a delay model");
    Model m(ModelConfig::from_json(ck.config), 0.5 * (45.0 + 365.0));
    const auto& fresh = m.params_;
    if (fresh.size() != ck.params.size())
        throw ModelError("checkpoint has " + std::to_string(ck.params.size()) + " tensors, config implies " +
                         std::to_string(fresh.size()));
    for (std::size_t i = 0; i < fresh.size(); ++i)
        if (fresh[i].name != ck.params[i].name || fresh[i].shape != ck.params[i].shape)
            throw ModelError("checkpoint tensor '" + ck.params[i].name + "' " + shape_str(ck.params[i].shape) +
                             " does not match expected '" + fresh[i].name + "' " + shape_str(fresh[i].shape));
    m.params_ = ck.params;
    m.index();
    return m;
}

} // namespace stcg::model
