#include "stcg/generator.hpp"

#include "stcg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stcg::harness {

using graph::EdgeKind;
using graph::ModuleRole;
using graph::NodeKind;
namespace F = graph::feature;

namespace {

constexpr int kPlatformBase = 1;
constexpr int kTargetBase = 11;
constexpr int kGeologyBase = 21;
constexpr int kRelayBase = 31;


double role_weight(ModuleRole r) {
    switch (r) {
    case ModuleRole::MainControl: return 0.35;
    case ModuleRole::Power: return 0.30;
    case ModuleRole::Centrifuge: return 0.25;
    case ModuleRole::Ventilation: return 0.10;
    }
    return 0.0;
}

void add_pair(std::vector<graph::Edge>& edges, int a, int b, EdgeKind k) {
    edges.push_back({a, b, k, 1.0});
    edges.push_back({b, a, k, 1.0});
}

} // namespace

graph::Registries default_registries() {
    graph::Registries reg;
    reg.munitions = physics::default_munitions();
    reg.paths = {{0, "route-north", 10.0, 400.0, {}},
                 {1, "route-east", 30.0, 650.0, {}},
                 {2, "route-south", 45.0, 900.0, {}}};
    reg.targets = {{0, "module-a", kTargetBase + 0, ModuleRole::MainControl},
                   {1, "module-b", kTargetBase + 1, ModuleRole::Ventilation},
                   {2, "module-c", kTargetBase + 2, ModuleRole::Power},
                   {3, "module-d", kTargetBase + 3, ModuleRole::Centrifuge}};
    reg.window_horizon_h = 48.0;
    return reg;
}

physics::LayerStack stack_of(const graph::GraphSnapshot& snap, const physics::PhysicsConfig& pcfg) {
    physics::LayerStack st;
    for (std::size_t i = 0; i < snap.nodes.size(); ++i) {
        if (snap.nodes[i].kind != NodeKind::GeologyLayer) continue;
        physics::Layer l;
        l.thickness = snap.features(i, F::kThickness);
        l.impedance = snap.features(i, F::kImpedance);
        if (l.impedance == 0.0)
            l.material = physics::Material::Cavity;
        else if (l.impedance >= pcfg.impedance_concrete)
            l.material = physics::Material::ReinforcedConcrete;
        else
            l.material = physics::Material::Granite;
        st.layers.push_back(l);
    }
    return st;
}

GroundTruth ground_truth(const graph::Scenario& s, const graph::InterventionVector& w,
                         const physics::PhysicsConfig& pcfg, const delay::DelayConfig& dcfg,
                         const GeneratorConfig& gcfg) {
    const auto& reg = s.registries;
    const auto* mun = reg.munition(w.weapon_class);
    const auto* path = reg.path(w.path_strategy);
    if (!mun) throw std::invalid_argument("ground_truth: unknown munition id " + std::to_string(w.weapon_class));
    if (!path) throw std::invalid_argument("ground_truth: unknown path id " + std::to_string(w.path_strategy));
    const auto& snaps = s.graph.snapshots;
    const auto tr = graph::release_step(w, reg, snaps.size());
    const auto& rel = snaps[tr];

    double acc_sum = 0.0;
    int acc_n = 0;
    for (std::size_t i = 0; i < rel.nodes.size(); ++i) {
        if (rel.nodes[i].kind != NodeKind::Platform || rel.features(i, F::kActive) <= 0.5) continue;
        acc_sum += rel.features(i, F::kAccuracy);
        ++acc_n;
    }
    const double accuracy = acc_n ? acc_sum / acc_n : 0.0;

    double exp_sum = 0.0;
    int exp_n = 0;
    for (int rid : path->relays) {
        auto i = rel.index_of(rid);
        if (i == graph::GraphSnapshot::npos) continue;
        exp_sum += rel.features(i, F::kExposure);
        ++exp_n;
    }
    const double exposure = exp_n ? exp_sum / exp_n : 0.0;

    const double f_acc = 0.7 + 0.3 * accuracy;
    const double f_path = 1.0 - exposure * (w.decoy ? gcfg.exposure_loss_decoy : gcfg.exposure_loss) -
                          gcfg.length_loss * path->length_km / 1000.0;
    const double f_win = 1.0 - gcfg.window_loss * std::clamp(w.release_window / reg.window_horizon_h, 0.0, 1.0);
    const double base = mun->impact_energy * f_acc * std::max(0.0, f_path) * f_win;

    const auto& last = snaps.back();
    const auto stack = stack_of(last, pcfg);
    GroundTruth gt;
    for (const auto& te : reg.targets) {
        auto ni = last.index_of(te.node);
        if (ni == graph::GraphSnapshot::npos)
            throw std::invalid_argument("ground_truth: target node " + std::to_string(te.node) + " missing");
        auto it = std::find(w.target_priority.begin(), w.target_priority.end(), te.node);
        if (it == w.target_priority.end())
            throw std::invalid_argument("ground_truth: target node " + std::to_string(te.node) + " not in priority");
        const double rank = static_cast<double>(it - w.target_priority.begin());
        const double f_rank = w.sync_mode == graph::SyncMode::Synchronized
                                  ? 1.0 - gcfg.rank_penalty_sync * rank
                                  : gcfg.stagger_factor * (1.0 - gcfg.rank_penalty_stagger * rank);
        physics::Munition m = *mun;
        m.impact_energy = std::max(base * std::max(0.0, f_rank), 1e-9);
        auto rep = physics::simulate_penetration(m, stack, path->angle_deg, last.features(ni, F::kDepth), pcfg);
        const double rd = rep.rd * last.features(ni, F::kVulnerability);
        // several modules may share a role; the worst-hit one drives its stage
        if (!gt.rd.count(te.role) || rd > gt.rd[te.role]) {
            gt.rd[te.role] = rd;
            gt.damage[te.role] = std::move(rep);
        }
    }
    auto durs = delay::stage_durations(gt.rd, dcfg.stages);
    gt.plan = delay::recovery_delay(durs);
    gt.y = delay::clamp_label(gt.plan.total_delay, dcfg);
    gt.sdi = delay::sdi(durs, dcfg.sdi);
    return gt;
}

graph::InterventionVector sample_intervention(const graph::Scenario& s, Rng& rng) {
    const auto& reg = s.registries;
    graph::InterventionVector w;
    w.weapon_class = reg.munitions[static_cast<std::size_t>(rng.uniform_int(0, int(reg.munitions.size()) - 1))].id;
    w.release_window = rng.uniform(0.0, reg.window_horizon_h);
    w.sync_mode = rng.bernoulli(0.5) ? graph::SyncMode::Synchronized : graph::SyncMode::Staggered;
    w.path_strategy = reg.paths[static_cast<std::size_t>(rng.uniform_int(0, int(reg.paths.size()) - 1))].id;
    for (const auto& t : reg.targets) w.target_priority.push_back(t.node);
    rng.shuffle(w.target_priority);
    w.decoy = rng.bernoulli(0.3);
    return w;
}

graph::Scenario sample_scenario(const std::string& id, const graph::Registries& base, const GeneratorConfig& g,
                                const physics::PhysicsConfig& pcfg, Rng& rng) {
    if (base.munitions.empty()) throw std::invalid_argument("sample_scenario: munitions registry is empty");
    if (base.paths.empty()) throw std::invalid_argument("sample_scenario: paths registry is empty");
    if (base.targets.empty()) throw std::invalid_argument("sample_scenario: targets registry is empty");
    graph::Scenario s;
    s.id = id;
    s.registries = base;
    const int P = rng.uniform_int(g.min_platforms, g.max_platforms);
    const int T = rng.uniform_int(g.min_steps, g.max_steps);
    const int M = static_cast<int>(base.targets.size());
    for (int k = 0; k < M; ++k) s.registries.targets[k].node = kTargetBase + k;

    std::vector<graph::Node> nodes;
    for (int i = 0; i < P; ++i) nodes.push_back({kPlatformBase + i, NodeKind::Platform});
    for (int i = 0; i < M; ++i) nodes.push_back({kTargetBase + i, NodeKind::TargetModule});
    for (int i = 0; i < 3; ++i) nodes.push_back({kGeologyBase + i, NodeKind::GeologyLayer});
    int next_relay = kRelayBase;
    std::vector<int> relays;
    for (auto& p : s.registries.paths) {
        p.relays.clear();
        int n = rng.uniform_int(1, g.max_relays_per_path);
        for (int k = 0; k < n; ++k) {
            p.relays.push_back(next_relay);
            relays.push_back(next_relay);
            nodes.push_back({next_relay++, NodeKind::PathRelay});
        }
    }

    std::vector<int> p_start(P), p_end(P), payload(P);
    std::vector<double> accuracy(P);
    for (int i = 0; i < P; ++i) {
        p_start[i] = rng.uniform_int(0, T / 2);
        p_end[i] = rng.uniform_int(p_start[i] + 1, T);
        payload[i] = rng.uniform_int(1, 3);
        accuracy[i] = rng.uniform(0.6, 1.0);
    }
    const double c = rng.uniform(g.concrete_min, g.concrete_max);
    const double gr = rng.uniform(g.granite_min, g.granite_max);
    const double v = rng.uniform(g.cavity_min, g.cavity_max);
    std::vector<double> depth(M), vuln(M);
    for (int k = 0; k < M; ++k) {
        switch (s.registries.targets[k].role) {
        case ModuleRole::MainControl: depth[k] = c + gr * rng.uniform(0.5, 0.9); break;
        case ModuleRole::Ventilation: depth[k] = c + gr * rng.uniform(0.3, 0.7); break;
        case ModuleRole::Power: depth[k] = c + gr * rng.uniform(0.6, 0.95); break;
        case ModuleRole::Centrifuge: depth[k] = c + gr + v * rng.uniform(0.3, 0.9); break;
        }
        vuln[k] = rng.uniform(0.7, 1.0);
    }
    const double thick[3] = {c, gr, v};
    const double imped[3] = {pcfg.impedance_concrete, pcfg.impedance_granite, pcfg.impedance_cavity};
    std::vector<double> exp0, drift, fuel0;
    for (std::size_t r = 0; r < relays.size(); ++r) {
        exp0.push_back(rng.uniform(0.0, 0.6));
        drift.push_back(rng.uniform(-0.05, 0.1));
        fuel0.push_back(rng.uniform(0.3, 1.0));
    }

    std::vector<graph::Edge> edges;
    for (int i = 0; i < P; ++i)
        for (int j = i + 1; j < P; ++j) add_pair(edges, kPlatformBase + i, kPlatformBase + j, EdgeKind::Coordination);
    for (int i = 0; i < P; ++i)
        for (int r : relays) edges.push_back({kPlatformBase + i, r, EdgeKind::MissionPath, 1.0});
    for (int r : relays)
        for (int k = 0; k < M; ++k) edges.push_back({r, kTargetBase + k, EdgeKind::MissionPath, 1.0});
    add_pair(edges, kGeologyBase, kGeologyBase + 1, EdgeKind::StructuralCoupling);
    add_pair(edges, kGeologyBase + 1, kGeologyBase + 2, EdgeKind::StructuralCoupling);
    for (int k = 0; k < M; ++k)
        add_pair(edges, kTargetBase + k, depth[k] > c + gr ? kGeologyBase + 2 : kGeologyBase + 1,
                 EdgeKind::StructuralCoupling);
    // main_control -> {ventilation, power} -> centrifuge, for the roles present
    auto role_node = [&](ModuleRole r) {
        std::vector<int> ids;
        for (int k = 0; k < M; ++k)
            if (s.registries.targets[k].role == r) ids.push_back(kTargetBase + k);
        return ids;
    };
    const std::pair<ModuleRole, ModuleRole> deps[] = {{ModuleRole::MainControl, ModuleRole::Ventilation},
                                                      {ModuleRole::MainControl, ModuleRole::Power},
                                                      {ModuleRole::Ventilation, ModuleRole::Centrifuge},
                                                      {ModuleRole::Power, ModuleRole::Centrifuge}};
    for (const auto& [from, to] : deps)
        for (int a : role_node(from))
            for (int b : role_node(to)) edges.push_back({a, b, EdgeKind::FunctionalDependency, 1.0});

    for (int t = 0; t < T; ++t) {
        graph::GraphSnapshot snap;
        snap.t = t + 1;
        snap.nodes = nodes;
        snap.edges = edges;
        snap.features = graph::FeatureMatrix(nodes.size(), graph::kFeatureWidth);
        auto& X = snap.features;
        std::size_t row = 0;
        for (int i = 0; i < P; ++i, ++row) {
            X(row, F::kActive) = (t >= p_start[i] && t < p_end[i]) ? 1.0 : 0.0;
            X(row, F::kPayloadClass) = payload[i];
            X(row, F::kAccuracy) = accuracy[i];
        }
        for (int k = 0; k < M; ++k, ++row) {
            X(row, F::kActive) = 1.0;
            X(row, F::kDepth) = depth[k];
            X(row, F::kVulnerability) = vuln[k];
            X(row, F::kFunctionWeight) = role_weight(s.registries.targets[k].role);
        }
        for (int k = 0; k < 3; ++k, ++row) {
            X(row, F::kActive) = 1.0;
            X(row, F::kThickness) = thick[k];
            X(row, F::kImpedance) = imped[k];
        }
        for (std::size_t r = 0; r < relays.size(); ++r, ++row) {
            X(row, F::kActive) = 1.0;
            X(row, F::kExposure) = std::clamp(exp0[r] + drift[r] * t, 0.0, 1.0);
            X(row, F::kFuelFraction) = std::clamp(fuel0[r] - 0.05 * t, 0.0, 1.0);
        }
        s.graph.snapshots.push_back(std::move(snap));
    }
    auto w = sample_intervention(s, rng);
    for (auto& snap : s.graph.snapshots) snap.interventions = w;
    return s;
}

graph::Scenario apply_structure(const graph::Scenario& s, const physics::StackTemplate& st) {
    graph::Scenario out = s;
    for (auto& snap : out.graph.snapshots) {
        std::vector<std::size_t> geo;
        double old_total = 0.0;
        for (std::size_t i = 0; i < snap.nodes.size(); ++i)
            if (snap.nodes[i].kind == NodeKind::GeologyLayer) {
                geo.push_back(i);
                old_total += snap.features(i, F::kThickness);
            }
        if (geo.size() != st.stack.layers.size())
            throw std::invalid_argument("apply_structure: scenario has " + std::to_string(geo.size()) +
                                        " geology layers, template '" + st.name + "' has " +
                                        std::to_string(st.stack.layers.size()));
        const double ratio = old_total > 0.0 ? st.stack.total_thickness() / old_total : 1.0;
        for (std::size_t k = 0; k < geo.size(); ++k) {
            snap.features(geo[k], F::kThickness) = st.stack.layers[k].thickness;
            snap.features(geo[k], F::kImpedance) = st.stack.layers[k].impedance;
        }
        for (std::size_t i = 0; i < snap.nodes.size(); ++i)
            if (snap.nodes[i].kind == NodeKind::TargetModule) snap.features(i, F::kDepth) *= ratio;
    }
    return out;
}

std::vector<int> munitions_by_strength(const graph::Registries& reg) {
    std::vector<const physics::Munition*> ms;
    for (const auto& m : reg.munitions) ms.push_back(&m);
    std::stable_sort(ms.begin(), ms.end(), [](const auto* a, const auto* b) {
        return a->impact_energy * a->penetration_class < b->impact_energy * b->penetration_class;
    });
    std::vector<int> ids;
    for (const auto* m : ms) ids.push_back(m->id);
    return ids;
}

} // namespace stcg::harness
