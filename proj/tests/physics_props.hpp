#pragma once

// Random-input property sweep over simulate_penetration. Shared by the unit
// tests and acceptance.

#include "stcg/physics.hpp"
#include "stcg/rng.hpp"

#include <cmath>
#include <string>

namespace props {

struct PhysicsSweep {
    std::size_t calls = 0;
    std::size_t conservation = 0; // |E0 - sum absorbed - residual| > 1e-9
    std::size_t range = 0;        // rd outside [0, 1]
    std::size_t resistance = 0;   // rd rose with a more resistant layer
    std::size_t strength = 0;     // rd fell with more energy or class
    std::size_t angle = 0;        // rd rose with a steeper angle
    double worst_conservation = 0.0;
    [[nodiscard]] std::size_t violations() const { return conservation + range + resistance + strength + angle; }
};

inline PhysicsSweep physics_sweep(std::size_t n, std::uint64_t seed) {
    using namespace stcg::physics;
    stcg::Rng rng(seed, 11);
    PhysicsConfig cfg;
    PhysicsSweep out;
    auto check = [&](const DamageReport& r, double e0) {
        ++out.calls;
        double s = r.residual_energy;
        for (double a : r.absorbed) s += a;
        const double err = std::abs(s - e0);
        out.worst_conservation = std::max(out.worst_conservation, err);
        if (err > 1e-9) ++out.conservation;
        if (!(r.rd >= 0.0 && r.rd <= 1.0)) ++out.range;
    };
    const Material mats[] = {Material::ReinforcedConcrete, Material::Granite, Material::Cavity};
    while (out.calls < n) {
        Munition m{0, "P-test", 1000, 300, rng.uniform(1, 40), rng.uniform(0.5, 2.0)};
        LayerStack st;
        const int layers = rng.uniform_int(1, 4);
        for (int i = 0; i < layers; ++i)
            st.layers.push_back(make_layer(mats[rng.uniform_int(0, 2)], rng.uniform(0.5, 30), cfg));
        const double depth = rng.uniform(0.0, st.total_thickness());
        const double angle = rng.uniform(0, 80);
        auto base = simulate_penetration(m, st, angle, depth, cfg);
        check(base, m.impact_energy);

        auto harder = st;
        auto& l = harder.layers[rng.uniform_int(0, layers - 1)];
        if (l.material != Material::Cavity) { // cavities carry no impedance
            l.impedance += rng.uniform(0.01, 0.5);
            auto rh = simulate_penetration(m, harder, angle, depth, cfg);
            check(rh, m.impact_energy);
            if (rh.rd > base.rd) ++out.resistance;
        }

        auto stronger = m;
        stronger.impact_energy += rng.uniform(0.01, 5);
        if (rng.bernoulli(0.5)) stronger.penetration_class += rng.uniform(0.01, 0.5);
        auto rs = simulate_penetration(stronger, st, angle, depth, cfg);
        check(rs, stronger.impact_energy);
        if (rs.rd < base.rd) ++out.strength;

        auto ra = simulate_penetration(m, st, std::min(85.0, angle + rng.uniform(0.1, 5)), depth, cfg);
        check(ra, m.impact_energy);
        if (ra.rd > base.rd) ++out.angle;
    }
    return out;
}

} // namespace props
