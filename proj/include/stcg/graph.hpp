#pragma once

// Time-varying mission graph G_t = (V_t, E_t, X_t, W_t) and scenario
// registries.
//
// Feature registry (column order of X_t, d = kFeatureWidth). Each node kind
// fills its own block and leaves the others at zero; column 0 is shared.
//   0 active          1/0, all kinds (inactive nodes stay in the graph)
//   1 payload_class   Platform, 1..3
//   2 accuracy        Platform, 0..1
//   3 depth_m         TargetModule, metres below surface
//   4 vulnerability   TargetModule, 0..1
//   5 function_weight TargetModule, 0..1
//   6 thickness_m     GeologyLayer
//   7 impedance       GeologyLayer, MJ/m (0 marks a cavity)
//   8 exposure        PathRelay, 0..1
//   9 fuel_fraction   PathRelay, 0..1

#include "stcg/physics.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace stcg::graph {

enum class NodeKind { Platform, TargetModule, GeologyLayer, PathRelay };
enum class EdgeKind { Coordination, MissionPath, StructuralCoupling, FunctionalDependency };
enum class SyncMode { Synchronized, Staggered };

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);
const char* to_string(SyncMode k);
std::optional<NodeKind> node_kind_from(const std::string& s);
std::optional<EdgeKind> edge_kind_from(const std::string& s);
std::optional<SyncMode> sync_mode_from(const std::string& s);

namespace feature {
inline constexpr std::size_t kActive = 0;
inline constexpr std::size_t kPayloadClass = 1;
inline constexpr std::size_t kAccuracy = 2;
inline constexpr std::size_t kDepth = 3;
inline constexpr std::size_t kVulnerability = 4;
inline constexpr std::size_t kFunctionWeight = 5;
inline constexpr std::size_t kThickness = 6;
inline constexpr std::size_t kImpedance = 7;
inline constexpr std::size_t kExposure = 8;
inline constexpr std::size_t kFuelFraction = 9;
inline constexpr std::size_t kWidth = 10;

extern const std::array<const char*, kWidth> kNames;
/// Multiplier that brings each column to roughly unit scale for learning.
extern const std::array<double, kWidth> kScale;
} // namespace feature

inline constexpr std::size_t kFeatureWidth = feature::kWidth;

struct Node {
    int id = 0;
    NodeKind kind = NodeKind::Platform;
    bool operator==(const Node&) const = default;
};

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::Coordination;
    double weight = 1.0;
    bool operator==(const Edge&) const = default;
};

struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool operator==(const FeatureMatrix&) const = default;
};

struct InterventionVector {
    int weapon_class = 0;
    double release_window = 0.0; // hours from scenario start
    SyncMode sync_mode = SyncMode::Synchronized;
    int path_strategy = 0;
    std::vector<int> target_priority; // permutation of TargetModule node ids, first = struck first
    bool decoy = false;
    bool operator==(const InterventionVector&) const = default;
};

struct GraphSnapshot {
    int t = 1;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    FeatureMatrix features;
    InterventionVector interventions;

    /// Position of node `id` in `nodes`, or npos.
    [[nodiscard]] std::size_t index_of(int id) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    bool operator==(const GraphSnapshot&) const = default;
};

struct TemporalGraph {
    std::vector<GraphSnapshot> snapshots;
    [[nodiscard]] std::size_t steps() const { return snapshots.size(); }
    bool operator==(const TemporalGraph&) const = default;
};

// -- registries ---------------------------------------------------------------

struct PathEntry {
    int id = 0;
    std::string name;
    double angle_deg = 0.0; // terminal incidence angle
    double length_km = 0.0;
    std::vector<int> relays; // PathRelay node ids along this path
    bool operator==(const PathEntry&) const = default;
};

/// Functional role of a target module; drives one recovery stage.
enum class ModuleRole { MainControl, Ventilation, Power, Centrifuge };
const char* to_string(ModuleRole r);
std::optional<ModuleRole> module_role_from(const std::string& s);

struct TargetEntry {
    int id = 0;
    std::string name;
    int node = 0; // TargetModule node id
    ModuleRole role = ModuleRole::MainControl;
    bool operator==(const TargetEntry&) const = default;
};

struct Registries {
    std::vector<physics::Munition> munitions;
    std::vector<PathEntry> paths;
    std::vector<TargetEntry> targets;
    double window_horizon_h = 48.0;

    [[nodiscard]] const physics::Munition* munition(int id) const;
    [[nodiscard]] const PathEntry* path(int id) const;
    bool operator==(const Registries&) const = default;
};

struct Scenario {
    std::string id;
    Registries registries;
    TemporalGraph graph;

    [[nodiscard]] const InterventionVector& current_intervention() const {
        return graph.snapshots.back().interventions;
    }
    /// Same scenario with W replaced in every snapshot.
    [[nodiscard]] Scenario with_intervention(const InterventionVector& w) const;
    bool operator==(const Scenario&) const = default;
};

// -- validation & encoding ------------------------------------------------------

struct Violation {
    int snapshot = -1; // -1 for scenario-level rules
    std::string element;
    std::string rule;
};

std::vector<Violation> validate(const TemporalGraph& g);
/// Graph rules plus registry cross-references.
std::vector<Violation> validate(const Scenario& s);
std::string format_violations(const std::vector<Violation>& v);

class EncodingError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Width of encode_intervention's output for the given registries.
std::size_t intervention_width(const Registries& reg);

/// Snapshot index the release window falls in: floor(min(1, window/horizon) * T), capped at T-1.
std::size_t release_step(const InterventionVector& w, const Registries& reg, std::size_t steps);

/// one-hot weapon ++ window/horizon ++ one-hot sync ++ one-hot path ++
/// rank/|targets| per registry target ++ decoy bit.
std::vector<double> encode_intervention(const InterventionVector& w, const Registries& reg);

} // namespace stcg::graph
