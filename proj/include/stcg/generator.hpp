#pragma once

// Synthetic scenario generator and the ground-truth delay oracle.
//
// The oracle maps (scenario, W) to per-module damage through the physics
// model and then to stage durations, Y and SDI. Effective impact energy per
// module is the munition energy scaled by
//   accuracy  : 0.7 + 0.3 * mean accuracy of platforms active at the release step
//   path      : 1 - exposure * (decoy ? exposure_loss_decoy : exposure_loss) - length_loss * km / 1000
//   window    : 1 - window_loss * min(1, window / horizon)
//   priority  : Synchronized: 1 - rank_penalty_sync * rank; Staggered: stagger_factor * (1 - rank_penalty_stagger * rank)
// and rd is the physics rd times the module's vulnerability. Payload class
// and fuel fraction never enter the oracle.

#include "stcg/delay.hpp"
#include "stcg/graph.hpp"
#include "stcg/physics.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace stcg {
class Rng;
}

namespace stcg::harness {

struct GeneratorConfig {
    int min_platforms = 2;
    int max_platforms = 3;
    int min_steps = 4;
    int max_steps = 8;
    int max_relays_per_path = 2;
    double concrete_min = 3.0, concrete_max = 12.0;
    double granite_min = 8.0, granite_max = 40.0;
    double cavity_min = 3.0, cavity_max = 8.0;

    double exposure_loss = 0.4;
    double exposure_loss_decoy = 0.15;
    double length_loss = 0.1;
    double window_loss = 0.08;
    double rank_penalty_sync = 0.10;
    double rank_penalty_stagger = 0.04;
    double stagger_factor = 0.95;

    double equivalence_tol_days = 1.0;
    int cf_candidates = 6;
};

struct GroundTruth {
    std::map<graph::ModuleRole, physics::DamageReport> damage;
    std::map<graph::ModuleRole, double> rd; // physics rd * vulnerability
    delay::RecoveryPlan plan;
    double y = 0.0;   // noiseless critical-path delay, clamped to the label range
    double sdi = 0.0;
};

/// Registries shared by every generated scenario (relay lists are filled per scenario).
graph::Registries default_registries();

/// Layer stack read from the GeologyLayer nodes (node order = top to bottom).
physics::LayerStack stack_of(const graph::GraphSnapshot& snap, const physics::PhysicsConfig& pcfg);

GroundTruth ground_truth(const graph::Scenario& s, const graph::InterventionVector& w,
                         const physics::PhysicsConfig& pcfg, const delay::DelayConfig& dcfg,
                         const GeneratorConfig& gcfg);

graph::InterventionVector sample_intervention(const graph::Scenario& s, Rng& rng);

/// One scenario with W sampled; all randomness from `rng`. `base` supplies
/// munitions, paths (relay lists are replaced) and targets; TargetModule node
/// ids are reassigned in registry order. Throws std::invalid_argument when a
/// registry is empty.
graph::Scenario sample_scenario(const std::string& id, const graph::Registries& base, const GeneratorConfig& gcfg,
                                const physics::PhysicsConfig& pcfg, Rng& rng);

/// Replaces the geology with a stack template, rescaling module depths by the
/// change in total thickness.
graph::Scenario apply_structure(const graph::Scenario& s, const physics::StackTemplate& st);

/// Munition ids ordered by impact_energy * penetration_class (weakest first).
std::vector<int> munitions_by_strength(const graph::Registries& reg);

} // namespace stcg::harness
