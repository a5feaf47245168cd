#include "stcg/physics.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace stcg::physics {

void Munition::validate() const {
    if (!(mass > 0.0 && explosive_mass > 0.0 && impact_energy > 0.0 && penetration_class > 0.0))
        throw DomainError("munition '" + name + "': all physical fields must be > 0");
    if (!(explosive_mass < mass)) throw DomainError("munition '" + name + "': explosive_mass must be < mass");
}

const char* to_string(Material m) {
    switch (m) {
    case Material::ReinforcedConcrete: return "ReinforcedConcrete";
    case Material::Granite: return "Granite";
    case Material::Cavity: return "Cavity";
    }
    return "?";
}

Material material_from_string(const std::string& s) {
    if (s == "ReinforcedConcrete") return Material::ReinforcedConcrete;
    if (s == "Granite") return Material::Granite;
    if (s == "Cavity") return Material::Cavity;
    throw DomainError("unknown material '" + s + "'");
}

double LayerStack::total_thickness() const {
    double t = 0.0;
    for (const auto& l : layers) t += l.thickness;
    return t;
}

double LayerStack::total_resistance() const {
    double r = 0.0;
    for (const auto& l : layers) r += l.impedance * l.thickness;
    return r;
}

void LayerStack::validate() const {
    if (layers.empty()) throw DomainError("layer stack: at least one layer required");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (!(l.thickness >= 0.0) || !std::isfinite(l.thickness))
            throw DomainError("layer stack: layer " + std::to_string(i) + " has negative thickness");
        if (!(l.impedance >= 0.0) || !std::isfinite(l.impedance))
            throw DomainError("layer stack: layer " + std::to_string(i) + " has negative impedance");
        if (l.material == Material::Cavity && l.impedance != 0.0)
            throw DomainError("layer stack: cavity layer " + std::to_string(i) + " must have zero impedance");
    }
}

double PhysicsConfig::default_impedance(Material m) const {
    switch (m) {
    case Material::ReinforcedConcrete: return impedance_concrete;
    case Material::Granite: return impedance_granite;
    case Material::Cavity: return impedance_cavity;
    }
    return 0.0;
}

Layer make_layer(Material m, double thickness, const PhysicsConfig& cfg) {
    return Layer{m, thickness, cfg.default_impedance(m)};
}

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

DamageReport simulate_penetration(const Munition& m, const LayerStack& stack, double angle_deg,
                                  double module_depth, const PhysicsConfig& cfg) {
    if (!(angle_deg >= 0.0 && angle_deg <= 85.0))
        throw DomainError("simulate_penetration: angle " + std::to_string(angle_deg) + " outside [0, 85] degrees");
    m.validate();
    stack.validate();
    const double total = stack.total_thickness();
    if (!(module_depth >= 0.0 && module_depth <= total))
        throw DomainError("simulate_penetration: module depth " + std::to_string(module_depth) +
                          " outside stack of thickness " + std::to_string(total));

    const double path_mult = 1.0 / std::cos(angle_deg * std::numbers::pi / 180.0);
    DamageReport rep;
    rep.absorbed.reserve(stack.layers.size());

    double energy = m.impact_energy;
    double top = 0.0;
    bool stopped = false;
    bool module_seen = false;
    for (const auto& layer : stack.layers) {
        // Absorption per vertical metre inside this layer.
        const double rate = layer.impedance * path_mult / m.penetration_class;
        const double bottom = top + layer.thickness;
        if (!module_seen && module_depth <= bottom) {
            double e_mod = energy - rate * (module_depth - top);
            rep.energy_at_module = stopped ? 0.0 : std::max(0.0, e_mod);
            module_seen = true;
        }
        const double demand = rate * layer.thickness;
        const double next = std::max(0.0, energy - demand);
        if (!stopped && next == 0.0 && energy > 0.0) {
            // Depth at which the energy is exhausted inside this layer.
            rep.penetration_depth = rate > 0.0 ? top + energy / rate : bottom;
            stopped = true;
        } else if (!stopped && energy == 0.0) {
            rep.penetration_depth = top;
            stopped = true;
        }
        rep.absorbed.push_back(energy - next);
        energy = next;
        top = bottom;
    }
    if (!stopped) rep.penetration_depth = total;
    if (!module_seen) rep.energy_at_module = energy;
    rep.residual_energy = energy;
    rep.reached = rep.energy_at_module > 0.0;
    rep.rd = rep.reached ? logistic(cfg.k * (rep.energy_at_module - cfg.e_half)) : 0.0;
    return rep;
}

std::vector<Munition> default_munitions() {
    return {
        Munition{0, "P1-light", 900.0, 250.0, 8.0, 0.8},
        Munition{1, "P2-medium", 2000.0, 550.0, 14.0, 1.0},
        Munition{2, "P3-heavy", 3500.0, 900.0, 22.0, 1.2},
        Munition{3, "P4-extra", 6000.0, 1500.0, 32.0, 1.5},
    };
}

std::vector<StackTemplate> default_stacks(const PhysicsConfig& cfg) {
    const double concrete[] = {3, 4, 6, 8, 10, 12, 15};
    const double granite[] = {8, 14, 22, 30, 40, 52, 65};
    std::vector<StackTemplate> out;
    for (int i = 0; i < 7; ++i) {
        StackTemplate s;
        s.id = i;
        s.name = "stack-" + std::to_string(i);
        s.stack.layers = {make_layer(Material::ReinforcedConcrete, concrete[i], cfg),
                          make_layer(Material::Granite, granite[i], cfg), make_layer(Material::Cavity, 5.0, cfg)};
        s.module_depth = concrete[i] + granite[i];
        out.push_back(std::move(s));
    }
    return out;
}

LabelGrid default_grid(const PhysicsConfig& cfg) {
    return LabelGrid{default_munitions(), {0.0, 20.0, 35.0, 50.0}, default_stacks(cfg)};
}

std::vector<LabelRow> batch_labels(const LabelGrid& grid, const PhysicsConfig& cfg) {
    std::vector<LabelRow> rows;
    rows.reserve(grid.munitions.size() * grid.angles_deg.size() * grid.stacks.size());
    int cid = 0;
    for (const auto& m : grid.munitions)
        for (double angle : grid.angles_deg)
            for (const auto& st : grid.stacks) {
                auto rep = simulate_penetration(m, st.stack, angle, st.module_depth, cfg);
                LabelRow r;
                r.config_id = cid++;
                r.munition_id = m.id;
                r.stack_id = st.id;
                r.angle_deg = angle;
                r.impact_energy = m.impact_energy;
                r.penetration_class = m.penetration_class;
                for (const auto& l : st.stack.layers) {
                    switch (l.material) {
                    case Material::ReinforcedConcrete: r.concrete_thickness += l.thickness; break;
                    case Material::Granite: r.granite_thickness += l.thickness; break;
                    case Material::Cavity: r.cavity_thickness += l.thickness; break;
                    }
                }
                r.module_depth = st.module_depth;
                r.rd = rep.rd;
                r.penetration_depth = rep.penetration_depth;
                r.residual_energy = rep.residual_energy;
                rows.push_back(r);
            }
    return rows;
}

namespace {
const char* kTsvHeader = "config_id\tmunition_id\tstack_id\tangle_deg\timpact_energy\tpenetration_class\t"
                         "concrete_m\tgranite_m\tcavity_m\tmodule_depth_m\trd\tpenetration_depth_m\t"
                         "residual_energy_mj";
}

std::string labels_to_tsv(const std::vector<LabelRow>& rows) {
    std::ostringstream os;
    os << kTsvHeader << '\n';
    os << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.config_id << '\t' << r.munition_id << '\t' << r.stack_id << '\t' << r.angle_deg << '\t'
           << r.impact_energy << '\t' << r.penetration_class << '\t' << r.concrete_thickness << '\t'
           << r.granite_thickness << '\t' << r.cavity_thickness << '\t' << r.module_depth << '\t' << r.rd << '\t'
           << r.penetration_depth << '\t' << r.residual_energy << '\n';
    }
    return os.str();
}

std::vector<LabelRow> labels_from_tsv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTsvHeader)
        throw std::runtime_error("labels.tsv: missing or unexpected header");
    std::vector<LabelRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        LabelRow r;
        ls >> r.config_id >> r.munition_id >> r.stack_id >> r.angle_deg >> r.impact_energy >> r.penetration_class >>
            r.concrete_thickness >> r.granite_thickness >> r.cavity_thickness >> r.module_depth >> r.rd >>
            r.penetration_depth >> r.residual_energy;
        if (!ls) throw std::runtime_error("labels.tsv: line " + std::to_string(lineno) + ": malformed row");
        rows.push_back(r);
    }
    return rows;
}

} // namespace stcg::physics
