#pragma once

// Parametric layered-penetration model used as the ground-truth damage
// source. Linear energy absorption through the stack, logistic damage at
// the module depth. All quantities are synthetic; no real munition or site
// data is encoded here.

#include <stdexcept>
#include <string>
#include <vector>

namespace stcg::physics {

class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

struct Munition {
    int id = 0;
    std::string name;
    double mass = 0.0;              // kg
    double explosive_mass = 0.0;    // kg
    double impact_energy = 0.0;     // MJ
    double penetration_class = 0.0; // dimensionless hardness-defeat rating

    void validate() const;
    bool operator==(const Munition&) const = default;
};

enum class Material { ReinforcedConcrete, Granite, Cavity };

const char* to_string(Material m);
Material material_from_string(const std::string& s);

struct Layer {
    Material material = Material::Granite;
    double thickness = 0.0; // m
    double impedance = 0.0; // MJ per m per unit penetration_class
    bool operator==(const Layer&) const = default;
};

struct LayerStack {
    std::vector<Layer> layers;

    [[nodiscard]] double total_thickness() const;
    /// Sum of impedance * thickness over layers.
    [[nodiscard]] double total_resistance() const;
    void validate() const;
    bool operator==(const LayerStack&) const = default;
};

struct PhysicsConfig {
    double k = 1.0;
    double e_half = 3.0; // MJ
    double impedance_concrete = 0.5;
    double impedance_granite = 0.3;
    double impedance_cavity = 0.0;

    [[nodiscard]] double default_impedance(Material m) const;
};

Layer make_layer(Material m, double thickness, const PhysicsConfig& cfg);

struct DamageReport {
    double rd = 0.0;                // damage index in [0,1]
    double penetration_depth = 0.0; // m, vertical
    double residual_energy = 0.0;   // MJ left after the whole stack
    double energy_at_module = 0.0;  // MJ arriving at module_depth
    bool reached = false;
    std::vector<double> absorbed;   // MJ per layer
};

double logistic(double x);

/// Throws DomainError for angles outside [0, 85] degrees, a module depth
/// outside the stack, or an invalid munition/stack.
DamageReport simulate_penetration(const Munition& m, const LayerStack& stack, double angle_deg,
                                  double module_depth, const PhysicsConfig& cfg);

// -- label grid ------------------------------------------------------------

struct StackTemplate {
    int id = 0;
    std::string name;
    LayerStack stack;
    double module_depth = 0.0;
};

struct LabelGrid {
    std::vector<Munition> munitions;
    std::vector<double> angles_deg;
    std::vector<StackTemplate> stacks;
};

struct LabelRow {
    int config_id = 0;
    int munition_id = 0;
    int stack_id = 0;
    double angle_deg = 0.0;
    double impact_energy = 0.0;
    double penetration_class = 0.0;
    double concrete_thickness = 0.0;
    double granite_thickness = 0.0;
    double cavity_thickness = 0.0;
    double module_depth = 0.0;
    double rd = 0.0;
    double penetration_depth = 0.0;
    double residual_energy = 0.0;
    bool operator==(const LabelRow&) const = default;
};

std::vector<Munition> default_munitions();
std::vector<StackTemplate> default_stacks(const PhysicsConfig& cfg);
/// 4 munitions x 4 angles x 7 stacks = 112 configurations.
LabelGrid default_grid(const PhysicsConfig& cfg);

/// Row-major over (munition, angle, stack); config_id is the row index.
std::vector<LabelRow> batch_labels(const LabelGrid& grid, const PhysicsConfig& cfg);

std::string labels_to_tsv(const std::vector<LabelRow>& rows);
std::vector<LabelRow> labels_from_tsv(const std::string& text);

} // namespace stcg::physics
