#pragma once

// Recovery-stage durations, critical-path delay Y and the Strategic Delay
// Index. Stage graph and weight-group mapping are configuration.

#include "stcg/graph.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace stcg::delay {

class DelayError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct RecoveryStage {
    std::string id; // one of StructuralClearing, VentilationRebuild, ElectricalRewiring, CentrifugeReconfig
    double base_duration = 0.0; // days
    std::vector<std::string> deps;
    double damage_sensitivity = 0.0;
    graph::ModuleRole driver = graph::ModuleRole::MainControl; // module whose rd drives this stage
};

struct StageDuration {
    std::string id;
    double days = 0.0;
    std::vector<std::string> deps;
};

struct RecoveryPlan {
    std::vector<StageDuration> stages;
    std::vector<std::string> critical_path;
    double total_delay = 0.0; // unclamped longest-path sum
};

struct SdiConfig {
    std::map<std::string, double> weights{{"main_control", 0.35}, {"power", 0.30}, {"centrifuge", 0.25},
                                          {"secondary", 0.10}};
    std::map<std::string, std::string> stage_group{{"StructuralClearing", "main_control"},
                                                   {"VentilationRebuild", "secondary"},
                                                   {"ElectricalRewiring", "power"},
                                                   {"CentrifugeReconfig", "centrifuge"}};
    double t_window = 90.0; // days
    double elasticity = 0.0; // in [-0.2, 0.2]

    void validate() const;
};

struct DelayConfig {
    std::vector<RecoveryStage> stages;
    SdiConfig sdi;
    double label_min = 45.0;
    double label_max = 365.0;
    double noise_sigma = 5.0; // observation noise on emitted labels, days
};

/// Four-stage diamond: StructuralClearing -> {VentilationRebuild, ElectricalRewiring} -> CentrifugeReconfig,
/// base 20/25/30/40 days, sensitivity 1.5 each.
DelayConfig default_delay_config();

/// T_i = base_i * (1 + sensitivity_i * rd(driver_i)).
std::vector<StageDuration> stage_durations(const std::map<graph::ModuleRole, double>& rd,
                                           const std::vector<RecoveryStage>& stages);

/// Longest dependency path; ties go to the lexicographically smaller stage id.
RecoveryPlan recovery_delay(const std::vector<StageDuration>& durations);

/// (1 + elasticity) * sum_g w_g * max_{i in g} T_i / t_window.
double sdi(const std::vector<StageDuration>& durations, const SdiConfig& cfg);

double clamp_label(double y, const DelayConfig& cfg);

} // namespace stcg::delay
