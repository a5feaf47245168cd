#include "stcg/model.hpp"

#include "stcg/optim.hpp"
#include "stcg/rng.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace stcg::model {

using namespace stcg::num;

Tensor loss_total(const Model& m, const Leaves& p, const std::vector<const TrainSample*>& batch, double lambda,
                  double beta, bool literal_cf, double creg_noise, std::uint64_t noise_seed, LossComponents* out) {
    if (batch.empty()) throw std::invalid_argument("loss_total: empty batch");
    Rng noise(noise_seed, streams::kNoise);
    std::vector<Tensor> reg, cf, creg;
    for (const auto* s : batch) {
        const auto& sc = *s->scenario;
        auto enc = m.encode(p, sc);
        Tensor y0 = m.readout(p, enc, sc.current_intervention());
        reg.push_back(reshape(square(add_scalar(y0, -s->y)), {1}));
        const auto& alts = literal_cf ? s->cf_candidates : s->cf_tagged;
        if (lambda > 0.0)
            for (const auto& w : alts) {
                Tensor yk = m.readout(p, enc, w);
                cf.push_back(reshape(square(sub(y0, yk)), {1}));
            }
        if (beta > 0.0) creg.push_back(reshape(m.causal_reg(p, sc, enc, creg_noise, noise.next_u64()), {1}));
    }
    Tensor l_reg = mean(concat(reg, 0));
    Tensor total = l_reg;
    LossComponents lc;
    lc.reg = l_reg.item();
    lc.pairs = cf.size();
    if (!cf.empty()) {
        Tensor l_cf = mean(concat(cf, 0));
        lc.cf = l_cf.item();
        total = add(total, scale(l_cf, lambda));
    }
    if (!creg.empty()) {
        Tensor l_creg = mean(concat(creg, 0));
        lc.creg = l_creg.item();
        total = add(total, scale(l_creg, beta));
    }
    lc.total = total.item();
    if (out) *out = lc;
    return total;
}

double mean_absolute_error(const Model& m, const std::vector<TrainSample>& set) {
    if (set.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : set) acc += std::abs(m.predict(*s.scenario, s.scenario->current_intervention()) - s.y);
    return acc / static_cast<double>(set.size());
}

TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const EpochCallback& on_epoch) {
    tcfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    const auto t0 = std::chrono::steady_clock::now();
    const double label_mean =
        std::accumulate(train_set.begin(), train_set.end(), 0.0, [](double a, const auto& s) { return a + s.y; }) /
        static_cast<double>(train_set.size());
    Model model(mcfg, label_mean);
    for (const auto* set : {&train_set, &val_set})
        for (const auto& s : *set) {
            model.check_inputs(*s.scenario);
            for (const auto& w : s.cf_candidates) model.check_intervention(*s.scenario, w);
        }

    const bool blind = mcfg.arch == Arch::StGnn || mcfg.arch == Arch::GcnLstm;
    const double lambda = blind ? 0.0 : tcfg.lambda;
    const double beta = (mcfg.arch == Arch::IaStgnn || mcfg.arch == Arch::StGnn) ? tcfg.beta : 0.0;

    AdamConfig acfg;
    acfg.lr = tcfg.lr;
    AdamState state;
    Rng shuffle_rng(tcfg.seed, streams::kShuffle);
    Rng noise_rng(tcfg.seed, streams::kNoise);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult res;
    res.best_val_mae = std::numeric_limits<double>::infinity();
    num::ParamStore best = model.params();
    const auto B = static_cast<std::size_t>(tcfg.batch_size);
    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        const auto te = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);
        if (tcfg.cosine && tcfg.epochs > 1) {
            const double frac = static_cast<double>(epoch - 1) / static_cast<double>(tcfg.epochs - 1);
            acfg.lr = tcfg.lr * (tcfg.lr_floor + (1.0 - tcfg.lr_floor) * 0.5 * (1.0 + std::cos(M_PI * frac)));
        }
        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t nb = 0;
        for (std::size_t start = 0; start < order.size(); start += B, ++nb) {
            std::vector<const TrainSample*> batch;
            for (std::size_t k = start; k < std::min(order.size(), start + B); ++k) batch.push_back(&train_set[order[k]]);
            auto leaves = model.params().leaves(true);
            LossComponents lc;
            Tensor loss = loss_total(model, leaves, batch, lambda, beta, tcfg.literal_cf, tcfg.creg_noise,
                                     noise_rng.next_u64(), &lc);
            if (!std::isfinite(lc.total))
                throw ModelError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(nb));
            backward(loss);
            auto grads = ParamStore::grads_of(leaves);
            for (std::size_t i = 0; i < grads.size(); ++i)
                for (double g : grads[i])
                    if (!std::isfinite(g))
                        throw ModelError("non-finite gradient for '" + model.params()[i].name + "' at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(nb));
            adam_step(model.params(), grads, state, acfg);
            rec.reg += lc.reg;
            rec.cf += lc.cf;
            rec.creg += lc.creg;
            rec.total += lc.total;
        }
        rec.reg /= static_cast<double>(nb);
        rec.cf /= static_cast<double>(nb);
        rec.creg /= static_cast<double>(nb);
        rec.total /= static_cast<double>(nb);
        rec.val_mae = val_set.empty() ? mean_absolute_error(model, train_set) : mean_absolute_error(model, val_set);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - te).count();
        if (rec.val_mae < res.best_val_mae) {
            res.best_val_mae = rec.val_mae;
            res.best_epoch = epoch;
            best = model.params();
        }
        res.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (tcfg.time_budget_s > 0.0 && elapsed > tcfg.time_budget_s) break;
    }
    model.params() = best;
    res.model = model;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace stcg::model
