#pragma once

// Self-checks shared by the CLI, the unit tests and the acceptance binary.

#include "stcg/gradcheck.hpp"
#include "stcg/graph.hpp"
#include "stcg/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stcg::checks {

/// Five nodes (platform, relay, two modules, one geology layer) over
/// `steps` snapshots, with one path and two targets registered.
graph::Scenario toy_scenario(std::size_t steps = 3, std::uint64_t seed = 1);

struct NamedReport {
    std::string name;
    num::GradcheckReport report;
};

/// One entry per differentiable op, random inputs kept away from kinks.
std::vector<NamedReport> gradcheck_ops(std::uint64_t seed = 1);

/// Small-width model of `arch`, parameters jittered off their init, loss with
/// every term active on two toy samples.
model::ModelConfig toy_model_config(model::Arch arch, const graph::Registries& reg);
NamedReport gradcheck_model_loss(model::Arch arch, std::uint64_t seed = 1);

} // namespace stcg::checks
