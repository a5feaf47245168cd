#include "stcg/delay.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stcg::delay {

namespace {

// Neumaier-compensated sum; keeps sum of the default weights at exactly 1.0.
double compensated_sum(const std::vector<double>& xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        double t = s + x;
        if (std::fabs(s) >= std::fabs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    return s + c;
}

} // namespace

void SdiConfig::validate() const {
    std::vector<double> w;
    for (const auto& [g, v] : weights) {
        if (!(v >= 0.0)) throw DelayError("sdi: weight of group '" + g + "' must be >= 0");
        w.push_back(v);
    }
    if (std::fabs(compensated_sum(w) - 1.0) > 1e-9) throw DelayError("sdi: weights must sum to 1");
    if (!(t_window > 0.0)) throw DelayError("sdi: t_window must be > 0");
    if (!(elasticity >= -0.2 && elasticity <= 0.2)) throw DelayError("sdi: elasticity must lie in [-0.2, 0.2]");
    for (const auto& [stage, group] : stage_group)
        if (!weights.count(group))
            throw DelayError("sdi: stage '" + stage + "' mapped to unknown group '" + group + "'");
}

DelayConfig default_delay_config() {
    using graph::ModuleRole;
    DelayConfig c;
    c.stages = {
        {"StructuralClearing", 20.0, {}, 1.5, ModuleRole::MainControl},
        {"VentilationRebuild", 25.0, {"StructuralClearing"}, 1.5, ModuleRole::Ventilation},
        {"ElectricalRewiring", 30.0, {"StructuralClearing"}, 1.5, ModuleRole::Power},
        {"CentrifugeReconfig", 40.0, {"VentilationRebuild", "ElectricalRewiring"}, 1.5, ModuleRole::Centrifuge},
    };
    return c;
}

std::vector<StageDuration> stage_durations(const std::map<graph::ModuleRole, double>& rd,
                                           const std::vector<RecoveryStage>& stages) {
    std::vector<StageDuration> out;
    out.reserve(stages.size());
    for (const auto& s : stages) {
        auto it = rd.find(s.driver);
        if (it == rd.end())
            throw DelayError("stage_durations: no damage for module '" + std::string(graph::to_string(s.driver)) +
                             "' driving stage '" + s.id + "'");
        out.push_back({s.id, s.base_duration * (1.0 + s.damage_sensitivity * it->second), s.deps});
    }
    return out;
}

RecoveryPlan recovery_delay(const std::vector<StageDuration>& durations) {
    const std::size_t n = durations.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i)
        if (!index.emplace(durations[i].id, i).second)
            throw DelayError("recovery_delay: duplicate stage '" + durations[i].id + "'");

    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> indeg(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& d : durations[i].deps) {
            auto it = index.find(d);
            if (it == index.end())
                throw DelayError("recovery_delay: stage '" + durations[i].id + "' depends on unknown '" + d + "'");
            children[it->second].push_back(i);
            ++indeg[i];
        }

    // Kahn's algorithm, ready set ordered by id.
    auto by_id = [&](std::size_t a, std::size_t b) { return durations[a].id > durations[b].id; };
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.push_back(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        std::sort(ready.begin(), ready.end(), by_id);
        auto u = ready.back();
        ready.pop_back();
        order.push_back(u);
        for (auto c : children[u])
            if (--indeg[c] == 0) ready.push_back(c);
    }
    if (order.size() != n) throw DelayError("recovery_delay: stage dependencies contain a cycle");

    std::vector<double> finish(n, 0.0);
    std::vector<std::size_t> pred(n, n);
    for (auto u : order) {
        double start = 0.0;
        for (const auto& d : durations[u].deps) {
            auto p = index.at(d);
            if (pred[u] == n || finish[p] > start ||
                (finish[p] == start && durations[p].id < durations[pred[u]].id)) {
                start = finish[p];
                pred[u] = p;
            }
        }
        finish[u] = start + durations[u].days;
    }

    RecoveryPlan plan;
    plan.stages = durations;
    if (n == 0) return plan;
    std::size_t end = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (finish[i] > finish[end] || (finish[i] == finish[end] && durations[i].id < durations[end].id)) end = i;
    plan.total_delay = finish[end];
    for (std::size_t u = end; u != n; u = pred[u]) plan.critical_path.push_back(durations[u].id);
    std::reverse(plan.critical_path.begin(), plan.critical_path.end());
    return plan;
}

double sdi(const std::vector<StageDuration>& durations, const SdiConfig& cfg) {
    cfg.validate();
    std::map<std::string, double> group_t;
    for (const auto& s : durations) {
        auto it = cfg.stage_group.find(s.id);
        if (it == cfg.stage_group.end()) throw DelayError("sdi: stage '" + s.id + "' has no weight group");
        auto [g, inserted] = group_t.emplace(it->second, s.days);
        if (!inserted) g->second = std::max(g->second, s.days);
    }
    std::vector<double> terms;
    for (const auto& [group, t] : group_t) terms.push_back(cfg.weights.at(group) * t / cfg.t_window);
    return (1.0 + cfg.elasticity) * compensated_sum(terms);
}

double clamp_label(double y, const DelayConfig& cfg) { return std::clamp(y, cfg.label_min, cfg.label_max); }

} // namespace stcg::delay
