#include "physics_props.hpp"

#include "stcg/physics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace stcg::physics;

TEST_CASE("single-layer closed form") {
    PhysicsConfig cfg;
    Munition m{0, "P1-light", 900, 250, 8.0, 0.8};
    LayerStack st{{make_layer(Material::Granite, 10.0, cfg)}};
    // rate = 0.3 / 0.8 per metre; at depth 4: 8 - 1.5 = 6.5
    auto r = simulate_penetration(m, st, 0.0, 4.0, cfg);
    CHECK(r.energy_at_module == doctest::Approx(6.5).epsilon(1e-14));
    CHECK(r.rd == doctest::Approx(1.0 / (1.0 + std::exp(-(6.5 - 3.0)))).epsilon(1e-14));
    CHECK(r.residual_energy == doctest::Approx(8.0 - 3.75).epsilon(1e-14));
    CHECK(r.reached);
    // 60 degrees doubles the path.
    auto r60 = simulate_penetration(m, st, 60.0, 4.0, cfg);
    CHECK(r60.energy_at_module == doctest::Approx(8.0 - 3.0).epsilon(1e-12));
    CHECK(r60.residual_energy <= r.residual_energy);
}

TEST_CASE("energy stops inside a layer: depth and zero damage below") {
    PhysicsConfig cfg;
    Munition m{0, "P1-light", 900, 250, 2.0, 1.0};
    LayerStack st{{make_layer(Material::ReinforcedConcrete, 10.0, cfg), make_layer(Material::Cavity, 5.0, cfg)}};
    auto r = simulate_penetration(m, st, 0.0, 12.0, cfg);
    CHECK(r.penetration_depth == doctest::Approx(4.0));
    CHECK(r.residual_energy == 0.0);
    CHECK(r.rd == 0.0);
    CHECK_FALSE(r.reached);
}

TEST_CASE("domain errors") {
    PhysicsConfig cfg;
    Munition m{0, "P1-light", 900, 250, 8.0, 0.8};
    LayerStack st{{make_layer(Material::Granite, 10.0, cfg)}};
    CHECK_THROWS_AS(simulate_penetration(m, st, 86.0, 1.0, cfg), DomainError);
    CHECK_THROWS_AS(simulate_penetration(m, st, 0.0, 11.0, cfg), DomainError);
    m.impact_energy = -1;
    CHECK_THROWS(simulate_penetration(m, st, 0.0, 1.0, cfg));
}

TEST_CASE("random sweep: conservation, range and monotonicity") {
    auto s = props::physics_sweep(4000, 5);
    CHECK(s.calls >= 4000);
    CHECK(s.worst_conservation < 1e-9);
    CHECK(s.violations() == 0);
}

TEST_CASE("default grid has 112 rows and its TSV round-trips") {
    PhysicsConfig cfg;
    auto rows = batch_labels(default_grid(cfg), cfg);
    CHECK(rows.size() == 112);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].config_id == static_cast<int>(i));
    CHECK(labels_from_tsv(labels_to_tsv(rows)) == rows);
    std::size_t mid = 0;
    for (const auto& r : rows) mid += r.rd > 0.05 && r.rd < 0.95;
    CHECK(mid > 10); // the grid is not saturated at either end
}
