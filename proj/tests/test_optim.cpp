#include "stcg/optim.hpp"
#include "stcg/params.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace stcg::num;

TEST_CASE("first Adam step moves each coordinate by lr against the gradient sign") {
    std::vector<double> p{1.0, -2.0, 0.5};
    std::vector<double>* ps[] = {&p};
    std::vector<std::vector<double>> g{{0.3, -4.0, 0.0}};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(ps, g, st, cfg);
    // Bias-corrected m/sqrt(v) = g/|g| on step one.
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
    CHECK(p[2] == 0.5);
    CHECK(st.step == 1);
}

TEST_CASE("Adam matches a scalar re-implementation over several steps") {
    std::vector<double> p{0.7};
    std::vector<double>* ps[] = {&p};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.05;
    double x = 0.7, m = 0, v = 0;
    for (int t = 1; t <= 20; ++t) {
        const double grad = 2 * (p[0] - 3.0);
        std::vector<std::vector<double>> g{{grad}};
        adam_step(ps, g, st, cfg);
        const double gx = 2 * (x - 3.0);
        m = cfg.beta1 * m + (1 - cfg.beta1) * gx;
        v = cfg.beta2 * v + (1 - cfg.beta2) * gx * gx;
        const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
        x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        CHECK(p[0] == doctest::Approx(x).epsilon(1e-13));
    }
}

TEST_CASE("non-finite gradients are rejected before any update") {
    std::vector<double> a{1.0}, b{2.0};
    std::vector<double>* ps[] = {&a, &b};
    std::vector<std::vector<double>> g{{0.1}, {std::numeric_limits<double>::quiet_NaN()}};
    AdamState st;
    CHECK_THROWS_AS(adam_step(ps, g, st, AdamConfig{}), NonFiniteGradient);
    CHECK(a[0] == 1.0);
    CHECK(b[0] == 2.0);
}
