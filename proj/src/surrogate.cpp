#include "stcg/surrogate.hpp"

#include "stcg/optim.hpp"
#include "stcg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stcg::surrogate {

using namespace stcg::num;

void SurrogateConfig::validate() const {
    auto bad = [](const std::string& m) { throw SurrogateError("surrogate config: " + m); };
    if (hidden < 1) bad("hidden must be >= 1");
    if (epochs < 1) bad("epochs must be >= 1");
    if (!(lr > 0.0)) bad("lr must be > 0");
    if (!(mu >= 0.0)) bad("mu must be >= 0");
    if (probe_pairs < 0) bad("probe_pairs must be >= 0");
    if (!(delta_min > 0.0 && delta_max >= delta_min)) bad("need 0 < delta_min <= delta_max");
    if (!(train_frac > 0.0 && train_frac < 1.0)) bad("train_frac must be in (0, 1)");
}

std::vector<double> features(const physics::Munition& m, const physics::LayerStack& stack, double angle_deg,
                             double module_depth) {
    double thick[3] = {0.0, 0.0, 0.0};
    double resist = 0.0, top = 0.0;
    for (const auto& l : stack.layers) {
        thick[static_cast<int>(l.material)] += l.thickness;
        const double above = std::clamp(module_depth - top, 0.0, l.thickness);
        resist += l.impedance * above;
        top += l.thickness;
    }
    return {m.impact_energy,
            m.penetration_class,
            1.0 / std::cos(angle_deg * std::numbers::pi / 180.0),
            thick[static_cast<int>(physics::Material::ReinforcedConcrete)],
            thick[static_cast<int>(physics::Material::Granite)],
            thick[static_cast<int>(physics::Material::Cavity)],
            module_depth,
            resist};
}

std::vector<double> features(const physics::LabelRow& r, const physics::PhysicsConfig& cfg) {
    physics::Munition m{r.munition_id, "", 1.0, 0.0, r.impact_energy, r.penetration_class};
    physics::LayerStack st;
    if (r.concrete_thickness > 0.0)
        st.layers.push_back(physics::make_layer(physics::Material::ReinforcedConcrete, r.concrete_thickness, cfg));
    if (r.granite_thickness > 0.0)
        st.layers.push_back(physics::make_layer(physics::Material::Granite, r.granite_thickness, cfg));
    if (r.cavity_thickness > 0.0)
        st.layers.push_back(physics::make_layer(physics::Material::Cavity, r.cavity_thickness, cfg));
    return features(m, st, r.angle_deg, r.module_depth);
}

SurrogateModel::SurrogateModel(int hidden, std::uint64_t seed) : hidden_(hidden) {
    Rng rng(seed, streams::kInit);
    const auto H = static_cast<std::size_t>(hidden);
    params_.add_glorot("l0.w", kInputWidth, H, rng);
    params_.add_zeros("l0.b", {1, H});
    params_.add_glorot("l1.w", H, H, rng);
    params_.add_zeros("l1.b", {1, H});
    params_.add_glorot("res.w0", H, H, rng);
    params_.add_zeros("res.b0", {1, H});
    params_.add_glorot("res.w1", H, H, rng);
    params_.add_zeros("res.b1", {1, H});
    params_.add_glorot("out.w", H, 1, rng);
    params_.add_zeros("out.b", {1, 1});
    mean.assign(kInputWidth, 0.0);
    stddev.assign(kInputWidth, 1.0);
}

Tensor SurrogateModel::forward(const std::vector<Tensor>& p, const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != kInputWidth)
        throw SurrogateError("surrogate input width must be " + std::to_string(kInputWidth) + ", got " +
                             shape_str(x.shape()));
    std::vector<double> m(mean), inv(kInputWidth);
    for (std::size_t i = 0; i < kInputWidth; ++i) inv[i] = 1.0 / stddev[i];
    for (double& v : m) v = -v;
    Tensor z = mul(add(x, Tensor({1, kInputWidth}, m)), Tensor({1, kInputWidth}, inv));
    Tensor h = relu(add(matmul(z, p[0]), p[1]));
    h = relu(add(matmul(h, p[2]), p[3]));
    Tensor r = add(matmul(relu(add(matmul(h, p[4]), p[5])), p[6]), p[7]);
    h = add(h, r);
    return sigmoid(add(matmul(h, p[8]), p[9]));
}

double SurrogateModel::predict_rd(std::span<const double> x) const {
    if (x.size() != kInputWidth)
        throw SurrogateError("surrogate input width must be " + std::to_string(kInputWidth) + ", got " +
                             std::to_string(x.size()));
    return forward(params_.leaves(false), Tensor({1, kInputWidth}, std::vector<double>(x.begin(), x.end()))).item();
}

std::vector<double> SurrogateModel::predict_rd_batch(const std::vector<std::vector<double>>& xs) const {
    if (xs.empty()) return {};
    std::vector<double> flat;
    for (const auto& x : xs) {
        if (x.size() != kInputWidth)
            throw SurrogateError("surrogate input width must be " + std::to_string(kInputWidth) + ", got " +
                                 std::to_string(x.size()));
        flat.insert(flat.end(), x.begin(), x.end());
    }
    auto out = forward(params_.leaves(false), Tensor({xs.size(), kInputWidth}, flat));
    return {out.data().begin(), out.data().end()};
}

Checkpoint SurrogateModel::to_checkpoint(const std::string& model_id) const {
    Checkpoint ck;
    ck.kind = "surrogate";
    ck.model_id = model_id;
    ck.config = {{"hidden", hidden_}, {"input_width", kInputWidth}};
    ck.extra = {{"mean", mean}, {"stddev", stddev}};
    ck.params = params_;
    return ck;
}

SurrogateModel SurrogateModel::from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "surrogate") throw SurrogateError("checkpoint kind '" + ck.kind + "' is not a surrogate");
    SurrogateModel m(ck.config.at("hidden").get<int>(), 0);
    if (ck.params.size() != m.params_.size()) throw SurrogateError("surrogate checkpoint has wrong tensor count");
    for (std::size_t i = 0; i < m.params_.size(); ++i)
        if (ck.params[i].name != m.params_[i].name || ck.params[i].shape != m.params_[i].shape)
            throw SurrogateError("surrogate checkpoint tensor '" + ck.params[i].name + "' does not match");
    m.params_ = ck.params;
    m.mean = ck.extra.at("mean").get<std::vector<double>>();
    m.stddev = ck.extra.at("stddev").get<std::vector<double>>();
    if (m.mean.size() != kInputWidth || m.stddev.size() != kInputWidth)
        throw SurrogateError("surrogate checkpoint standardization has wrong width");
    return m;
}

namespace {

Tensor rows_tensor(const std::vector<std::vector<double>>& xs) {
    std::vector<double> flat;
    for (const auto& x : xs) flat.insert(flat.end(), x.begin(), x.end());
    return Tensor({xs.size(), kInputWidth}, std::move(flat));
}

std::vector<std::vector<double>> probes(const std::vector<std::vector<double>>& base, std::size_t n,
                                        const SurrogateConfig& cfg, Rng& rng, std::vector<std::vector<double>>& raised) {
    std::vector<std::vector<double>> out;
    raised.clear();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& x = base[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(base.size()) - 1))];
        auto y = x;
        y[kResistanceColumn] += rng.uniform(cfg.delta_min, cfg.delta_max);
        out.push_back(x);
        raised.push_back(std::move(y));
    }
    return out;
}

} // namespace

SurrogateResult train_surrogate(const std::vector<physics::LabelRow>& rows, const SurrogateConfig& cfg,
                                const physics::PhysicsConfig& pcfg) {
    cfg.validate();
    if (rows.size() < 100)
        throw SurrogateError("train_surrogate: need at least 100 rows, got " + std::to_string(rows.size()));
    const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                              [](const auto& a, const auto& b) { return a.rd < b.rd; });
    if (lo->rd == hi->rd) throw SurrogateError("train_surrogate: labels are constant (degenerate table)");

    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split(cfg.seed, streams::kSplit);
    split.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_frac * static_cast<double>(rows.size())));
    std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> ho(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    std::vector<std::vector<double>> xtr, xho;
    std::vector<double> ytr, yho;
    for (auto i : tr) {
        xtr.push_back(features(rows[i], pcfg));
        ytr.push_back(rows[i].rd);
    }
    for (auto i : ho) {
        xho.push_back(features(rows[i], pcfg));
        yho.push_back(rows[i].rd);
    }

    SurrogateResult res;
    res.heldout = ho;
    auto& m = res.model;
    m = SurrogateModel(cfg.hidden, cfg.seed);
    for (std::size_t c = 0; c < kInputWidth; ++c) {
        double s = 0.0, s2 = 0.0;
        for (const auto& x : xtr) s += x[c];
        const double mu = s / static_cast<double>(xtr.size());
        for (const auto& x : xtr) s2 += (x[c] - mu) * (x[c] - mu);
        const double sd = std::sqrt(s2 / static_cast<double>(xtr.size()));
        m.mean[c] = mu;
        m.stddev[c] = sd > 1e-12 ? sd : 1.0;
    }

    const Tensor X = rows_tensor(xtr);
    const Tensor Y({ytr.size(), 1}, ytr);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    AdamState state;
    Rng probe_rng(cfg.seed, streams::kProbe);
    for (int e = 0; e < cfg.epochs; ++e) {
        auto leaves = m.params().leaves(true);
        Tensor mse = mean(square(sub(m.forward(leaves, X), Y)));
        Tensor loss = mse;
        double hinge_v = 0.0;
        if (cfg.mu > 0.0 && cfg.probe_pairs > 0) {
            std::vector<std::vector<double>> raised;
            auto base = probes(xtr, static_cast<std::size_t>(cfg.probe_pairs), cfg, probe_rng, raised);
            Tensor gap = sub(m.forward(leaves, rows_tensor(raised)), m.forward(leaves, rows_tensor(base)));
            Tensor hinge = mean(square(relu(gap)));
            hinge_v = hinge.item();
            loss = add(loss, scale(hinge, cfg.mu));
        }
        if (!std::isfinite(loss.item()))
            throw SurrogateError("train_surrogate: non-finite loss at epoch " + std::to_string(e + 1));
        backward(loss);
        adam_step(m.params(), ParamStore::grads_of(leaves), state, acfg);
        res.history.loss.push_back(loss.item());
        res.history.mse.push_back(mse.item());
        res.history.hinge.push_back(hinge_v);
    }
    auto mae = [&](const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
        if (xs.empty()) return 0.0;
        auto p = m.predict_rd_batch(xs);
        double a = 0.0;
        for (std::size_t i = 0; i < ys.size(); ++i) a += std::abs(p[i] - ys[i]);
        return a / static_cast<double>(ys.size());
    };
    res.history.train_mae = mae(xtr, ytr);
    res.history.heldout_mae = mae(xho, yho);
    res.history.train_rows = xtr.size();
    res.history.heldout_rows = xho.size();
    return res;
}

ViolationReport monotonicity_violations(const SurrogateModel& m, const std::vector<physics::LabelRow>& rows,
                                        const physics::PhysicsConfig& pcfg, const SurrogateConfig& cfg,
                                        std::size_t pairs, std::uint64_t seed) {
    if (rows.empty()) throw SurrogateError("monotonicity_violations: no rows");
    std::vector<std::vector<double>> base;
    for (const auto& r : rows) base.push_back(features(r, pcfg));
    Rng rng(seed, streams::kProbe);
    std::vector<std::vector<double>> raised;
    auto xs = probes(base, pairs, cfg, rng, raised);
    auto a = m.predict_rd_batch(xs);
    auto b = m.predict_rd_batch(raised);
    ViolationReport rep;
    rep.pairs = pairs;
    for (std::size_t i = 0; i < pairs; ++i)
        if (b[i] - a[i] > cfg.violation_tol) ++rep.violations;
    return rep;
}

} // namespace stcg::surrogate
