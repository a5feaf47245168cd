#include "stcg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace stcg::graph {

namespace feature {
const std::array<const char*, kWidth> kNames = {"active",   "payload_class", "accuracy",     "depth_m",
                                                "vulnerability", "function_weight", "thickness_m", "impedance",
                                                "exposure", "fuel_fraction"};
const std::array<double, kWidth> kScale = {1.0, 1.0 / 3.0, 1.0, 1.0 / 50.0, 1.0, 1.0, 1.0 / 25.0, 1.0, 1.0, 1.0};
} // namespace feature

const char* to_string(NodeKind k) {
    switch (k) {
    case NodeKind::Platform: return "Platform";
    case NodeKind::TargetModule: return "TargetModule";
    case NodeKind::GeologyLayer: return "GeologyLayer";
    case NodeKind::PathRelay: return "PathRelay";
    }
    return "?";
}

const char* to_string(EdgeKind k) {
    switch (k) {
    case EdgeKind::Coordination: return "Coordination";
    case EdgeKind::MissionPath: return "MissionPath";
    case EdgeKind::StructuralCoupling: return "StructuralCoupling";
    case EdgeKind::FunctionalDependency: return "FunctionalDependency";
    }
    return "?";
}

const char* to_string(SyncMode k) { return k == SyncMode::Synchronized ? "Synchronized" : "Staggered"; }

const char* to_string(ModuleRole r) {
    switch (r) {
    case ModuleRole::MainControl: return "main_control";
    case ModuleRole::Ventilation: return "ventilation";
    case ModuleRole::Power: return "power";
    case ModuleRole::Centrifuge: return "centrifuge";
    }
    return "?";
}

std::optional<NodeKind> node_kind_from(const std::string& s) {
    for (auto k : {NodeKind::Platform, NodeKind::TargetModule, NodeKind::GeologyLayer, NodeKind::PathRelay})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from(const std::string& s) {
    for (auto k : {EdgeKind::Coordination, EdgeKind::MissionPath, EdgeKind::StructuralCoupling,
                   EdgeKind::FunctionalDependency})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::optional<SyncMode> sync_mode_from(const std::string& s) {
    for (auto k : {SyncMode::Synchronized, SyncMode::Staggered})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::optional<ModuleRole> module_role_from(const std::string& s) {
    for (auto r : {ModuleRole::MainControl, ModuleRole::Ventilation, ModuleRole::Power, ModuleRole::Centrifuge})
        if (s == to_string(r)) return r;
    return std::nullopt;
}

std::size_t GraphSnapshot::index_of(int id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return i;
    return npos;
}

const physics::Munition* Registries::munition(int id) const {
    for (const auto& m : munitions)
        if (m.id == id) return &m;
    return nullptr;
}

const PathEntry* Registries::path(int id) const {
    for (const auto& p : paths)
        if (p.id == id) return &p;
    return nullptr;
}

Scenario Scenario::with_intervention(const InterventionVector& w) const {
    Scenario s = *this;
    for (auto& snap : s.graph.snapshots) snap.interventions = w;
    return s;
}

// -- validation ------------------------------------------------------------------

namespace {

std::string edge_name(const Edge& e) {
    return std::string("edge ") + std::to_string(e.src) + "->" + std::to_string(e.dst) + " (" + to_string(e.kind) + ")";
}

void validate_intervention(const GraphSnapshot& s, int si, std::vector<Violation>& out) {
    const auto& w = s.interventions;
    if (!(w.release_window >= 0.0) || !std::isfinite(w.release_window))
        out.push_back({si, "interventions.release_window", "release_window must be finite and >= 0"});
    std::vector<int> targets;
    for (const auto& n : s.nodes)
        if (n.kind == NodeKind::TargetModule) targets.push_back(n.id);
    std::vector<int> prio = w.target_priority;
    std::sort(targets.begin(), targets.end());
    std::sort(prio.begin(), prio.end());
    if (prio != targets)
        out.push_back({si, "interventions.target_priority",
                       "target_priority must be a permutation of the TargetModule node ids"});
}

} // namespace

std::vector<Violation> validate(const TemporalGraph& g) {
    std::vector<Violation> out;
    if (g.snapshots.empty()) {
        out.push_back({-1, "snapshots", "T >= 1 required"});
        return out;
    }
    const auto& first = g.snapshots.front();
    std::map<int, NodeKind> ref_nodes;
    for (const auto& n : first.nodes) ref_nodes.emplace(n.id, n.kind);
    const std::size_t d = first.features.cols;

    for (std::size_t si = 0; si < g.snapshots.size(); ++si) {
        const auto& s = g.snapshots[si];
        const int isi = static_cast<int>(si);
        if (si > 0 && s.t <= g.snapshots[si - 1].t)
            out.push_back({isi, "t", "time indices must be strictly increasing"});

        std::set<int> ids;
        for (const auto& n : s.nodes) {
            if (!ids.insert(n.id).second)
                out.push_back({isi, "node " + std::to_string(n.id), "duplicate node id"});
        }
        // Node ids and kinds are stable across the whole sequence.
        std::map<int, NodeKind> here;
        for (const auto& n : s.nodes) here.emplace(n.id, n.kind);
        if (si > 0 && here != ref_nodes) {
            for (const auto& [id, kind] : here) {
                auto it = ref_nodes.find(id);
                if (it == ref_nodes.end())
                    out.push_back({isi, "node " + std::to_string(id), "node id not present in snapshot 0"});
                else if (it->second != kind)
                    out.push_back({isi, "node " + std::to_string(id), "node kind changed across snapshots"});
            }
            for (const auto& [id, kind] : ref_nodes)
                if (!here.count(id))
                    out.push_back({isi, "node " + std::to_string(id), "node id missing relative to snapshot 0"});
        }

        for (const auto& e : s.edges) {
            if (!ids.count(e.src) || !ids.count(e.dst))
                out.push_back({isi, edge_name(e), "edge endpoint does not exist"});
            if (!std::isfinite(e.weight)) out.push_back({isi, edge_name(e), "edge weight must be finite"});
            if (e.kind == EdgeKind::StructuralCoupling) {
                bool mirrored = std::any_of(s.edges.begin(), s.edges.end(), [&](const Edge& o) {
                    return o.kind == EdgeKind::StructuralCoupling && o.src == e.dst && o.dst == e.src &&
                           o.weight == e.weight;
                });
                if (!mirrored)
                    out.push_back({isi, edge_name(e), "StructuralCoupling edge needs a mirrored arc with equal weight"});
            }
        }

        if (s.features.rows != s.nodes.size())
            out.push_back({isi, "features", "feature row count " + std::to_string(s.features.rows) +
                                                " differs from node count " + std::to_string(s.nodes.size())});
        if (s.features.data.size() != s.features.rows * s.features.cols)
            out.push_back({isi, "features", "feature storage does not match rows x cols"});
        if (s.features.cols != d)
            out.push_back({isi, "features", "feature width " + std::to_string(s.features.cols) +
                                                " differs from snapshot 0 width " + std::to_string(d)});
        for (double v : s.features.data)
            if (!std::isfinite(v)) {
                out.push_back({isi, "features", "non-finite feature value"});
                break;
            }
        validate_intervention(s, isi, out);
    }
    return out;
}

std::vector<Violation> validate(const Scenario& sc) {
    auto out = validate(sc.graph);
    const auto& reg = sc.registries;
    if (reg.munitions.empty()) out.push_back({-1, "registries.munitions", "registry must be non-empty"});
    if (reg.paths.empty()) out.push_back({-1, "registries.paths", "registry must be non-empty"});
    if (!(reg.window_horizon_h > 0.0)) out.push_back({-1, "registries.window_horizon_h", "must be > 0"});
    for (const auto& m : reg.munitions) {
        try {
            m.validate();
        } catch (const std::exception& e) {
            out.push_back({-1, "registries.munitions[" + std::to_string(m.id) + "]", e.what()});
        }
    }
    if (sc.graph.snapshots.empty()) return out;
    const auto& s0 = sc.graph.snapshots.front();
    for (const auto& p : reg.paths) {
        if (!(p.angle_deg >= 0.0 && p.angle_deg <= 85.0))
            out.push_back({-1, "registries.paths[" + std::to_string(p.id) + "]", "angle_deg outside [0, 85]"});
        for (int r : p.relays) {
            auto i = s0.index_of(r);
            if (i == GraphSnapshot::npos || s0.nodes[i].kind != NodeKind::PathRelay)
                out.push_back({-1, "registries.paths[" + std::to_string(p.id) + "]",
                               "relay " + std::to_string(r) + " is not a PathRelay node"});
        }
    }
    std::set<int> target_nodes;
    for (const auto& t : reg.targets) {
        auto i = s0.index_of(t.node);
        if (i == GraphSnapshot::npos || s0.nodes[i].kind != NodeKind::TargetModule)
            out.push_back({-1, "registries.targets[" + std::to_string(t.id) + "]",
                           "node " + std::to_string(t.node) + " is not a TargetModule node"});
        target_nodes.insert(t.node);
    }
    std::set<int> graph_targets;
    for (const auto& n : s0.nodes)
        if (n.kind == NodeKind::TargetModule) graph_targets.insert(n.id);
    if (target_nodes != graph_targets)
        out.push_back({-1, "registries.targets", "targets registry must list every TargetModule node exactly once"});
    for (std::size_t si = 0; si < sc.graph.snapshots.size(); ++si) {
        const auto& w = sc.graph.snapshots[si].interventions;
        if (!reg.munition(w.weapon_class))
            out.push_back({static_cast<int>(si), "interventions.weapon_class", "unknown munition id"});
        if (!reg.path(w.path_strategy))
            out.push_back({static_cast<int>(si), "interventions.path_strategy", "unknown path id"});
    }
    return out;
}

std::string format_violations(const std::vector<Violation>& v) {
    std::ostringstream os;
    for (const auto& x : v) {
        os << (x.snapshot < 0 ? std::string("scenario") : "snapshot " + std::to_string(x.snapshot)) << ": "
           << x.element << ": " << x.rule << '\n';
    }
    return os.str();
}

// -- encoding ------------------------------------------------------------------------

std::size_t release_step(const InterventionVector& w, const Registries& reg, std::size_t steps) {
    if (steps == 0) throw std::invalid_argument("release_step: scenario has no snapshots");
    double frac = std::clamp(w.release_window / reg.window_horizon_h, 0.0, 1.0);
    auto idx = static_cast<std::size_t>(std::floor(frac * static_cast<double>(steps)));
    return std::min(idx, steps - 1);
}

std::size_t intervention_width(const Registries& reg) {
    return reg.munitions.size() + 1 + 2 + reg.paths.size() + reg.targets.size() + 1;
}

std::vector<double> encode_intervention(const InterventionVector& w, const Registries& reg) {
    std::vector<double> out;
    out.reserve(intervention_width(reg));

    bool found = false;
    for (const auto& m : reg.munitions) {
        out.push_back(m.id == w.weapon_class ? 1.0 : 0.0);
        found = found || m.id == w.weapon_class;
    }
    if (!found) throw EncodingError("encode_intervention: weapon_class " + std::to_string(w.weapon_class) +
                                    " not in munitions registry");

    if (!(reg.window_horizon_h > 0.0)) throw EncodingError("encode_intervention: window horizon must be > 0");
    out.push_back(w.release_window / reg.window_horizon_h);

    out.push_back(w.sync_mode == SyncMode::Synchronized ? 1.0 : 0.0);
    out.push_back(w.sync_mode == SyncMode::Staggered ? 1.0 : 0.0);

    found = false;
    for (const auto& p : reg.paths) {
        out.push_back(p.id == w.path_strategy ? 1.0 : 0.0);
        found = found || p.id == w.path_strategy;
    }
    if (!found) throw EncodingError("encode_intervention: path_strategy " + std::to_string(w.path_strategy) +
                                    " not in paths registry");

    if (w.target_priority.size() != reg.targets.size())
        throw EncodingError("encode_intervention: target_priority has " + std::to_string(w.target_priority.size()) +
                            " entries but targets registry has " + std::to_string(reg.targets.size()));
    const double n = static_cast<double>(reg.targets.size());
    for (const auto& t : reg.targets) {
        auto it = std::find(w.target_priority.begin(), w.target_priority.end(), t.node);
        if (it == w.target_priority.end())
            throw EncodingError("encode_intervention: target node " + std::to_string(t.node) +
                                " from targets registry missing in target_priority");
        if (std::count(w.target_priority.begin(), w.target_priority.end(), t.node) != 1)
            throw EncodingError("encode_intervention: target_priority repeats node " + std::to_string(t.node));
        out.push_back(static_cast<double>(it - w.target_priority.begin()) / n);
    }

    out.push_back(w.decoy ? 1.0 : 0.0);
    return out;
}

} // namespace stcg::graph
