#include "stcg/checks.hpp"

#include "stcg/harness.hpp"
#include "stcg/rng.hpp"

#include <cmath>

namespace stcg::checks {

using graph::EdgeKind;
using graph::NodeKind;
using num::Shape;
using num::Tensor;
namespace F = graph::feature;

graph::Scenario toy_scenario(std::size_t steps, std::uint64_t seed) {
    Rng rng(seed, streams::kDataset);
    graph::Scenario s;
    s.id = "toy";
    s.registries.munitions = physics::default_munitions();
    s.registries.paths = {{0, "route-north", 20.0, 500.0, {31}}};
    s.registries.targets = {{0, "module-a", 11, graph::ModuleRole::MainControl},
                            {1, "module-b", 12, graph::ModuleRole::Centrifuge}};
    const std::vector<graph::Node> nodes{{1, NodeKind::Platform},
                                         {11, NodeKind::TargetModule},
                                         {12, NodeKind::TargetModule},
                                         {21, NodeKind::GeologyLayer},
                                         {31, NodeKind::PathRelay}};
    const std::vector<graph::Edge> edges{{1, 31, EdgeKind::MissionPath, 1.0},
                                         {31, 11, EdgeKind::MissionPath, 1.0},
                                         {31, 12, EdgeKind::MissionPath, 1.0},
                                         {11, 21, EdgeKind::StructuralCoupling, 1.0},
                                         {21, 11, EdgeKind::StructuralCoupling, 1.0},
                                         {12, 21, EdgeKind::StructuralCoupling, 1.0},
                                         {21, 12, EdgeKind::StructuralCoupling, 1.0},
                                         {11, 12, EdgeKind::FunctionalDependency, 1.0}};
    graph::InterventionVector w;
    w.weapon_class = s.registries.munitions[1].id;
    w.release_window = 12.0;
    w.path_strategy = 0;
    w.target_priority = {11, 12};
    for (std::size_t t = 0; t < steps; ++t) {
        graph::GraphSnapshot snap;
        snap.t = static_cast<int>(t) + 1;
        snap.nodes = nodes;
        snap.edges = edges;
        snap.features = graph::FeatureMatrix(nodes.size(), graph::kFeatureWidth);
        auto& X = snap.features;
        for (std::size_t r = 0; r < nodes.size(); ++r) X(r, F::kActive) = 1.0;
        X(0, F::kPayloadClass) = 2;
        X(0, F::kAccuracy) = rng.uniform(0.6, 1.0);
        X(1, F::kDepth) = rng.uniform(10, 20);
        X(1, F::kVulnerability) = rng.uniform(0.7, 1.0);
        X(1, F::kFunctionWeight) = 0.35;
        X(2, F::kDepth) = rng.uniform(20, 30);
        X(2, F::kVulnerability) = rng.uniform(0.7, 1.0);
        X(2, F::kFunctionWeight) = 0.25;
        X(3, F::kThickness) = 30.0;
        X(3, F::kImpedance) = 0.3;
        X(4, F::kExposure) = rng.uniform(0.0, 0.6);
        X(4, F::kFuelFraction) = rng.uniform(0.3, 1.0);
        snap.interventions = w;
        s.graph.snapshots.push_back(std::move(snap));
    }
    return s;
}

namespace {

Tensor random(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, double gap = 0.0) {
    std::vector<double> v(num::numel_of(shape));
    for (auto& x : v) {
        x = rng.uniform(lo, hi);
        if (gap > 0.0 && std::abs(x) < gap) x = x < 0 ? x - gap : x + gap;
    }
    return Tensor(std::move(shape), std::move(v), true);
}

// sum(f(x) * R) for a fixed random R, so every output element carries weight.
num::ScalarFn weighted(std::function<Tensor(const std::vector<Tensor>&)> f, Shape out_shape, Rng& rng) {
    Tensor r = random(out_shape, rng).detach();
    return [f = std::move(f), r](const std::vector<Tensor>& in) { return num::sum(num::mul(f(in), r)); };
}

} // namespace

std::vector<NamedReport> gradcheck_ops(std::uint64_t seed) {
    Rng rng(seed, streams::kProbe);
    std::vector<NamedReport> out;
    auto run = [&](const std::string& name, std::function<Tensor(const std::vector<Tensor>&)> f, Shape out_shape,
                   std::vector<Tensor> in) {
        out.push_back({name, num::gradcheck(weighted(std::move(f), std::move(out_shape), rng), in)});
    };
    const Shape m{3, 4};
    auto A = [&] { return random(m, rng); };
    auto Away = [&] { return random(m, rng, -1.0, 1.0, 0.1); };

    run("add", [](auto& x) { return num::add(x[0], x[1]); }, m, {A(), A()});
    run("add_broadcast_row", [](auto& x) { return num::add(x[0], x[1]); }, m, {A(), random({1, 4}, rng)});
    run("sub", [](auto& x) { return num::sub(x[0], x[1]); }, m, {A(), A()});
    run("mul", [](auto& x) { return num::mul(x[0], x[1]); }, m, {A(), A()});
    run("mul_broadcast_row", [](auto& x) { return num::mul(x[0], x[1]); }, m, {A(), random({1, 4}, rng)});
    run("scale", [](auto& x) { return num::scale(x[0], -1.7); }, m, {A()});
    run("add_scalar", [](auto& x) { return num::add_scalar(x[0], 0.3); }, m, {A()});
    run("relu", [](auto& x) { return num::relu(x[0]); }, m, {Away()});
    run("leaky_relu", [](auto& x) { return num::leaky_relu(x[0], 0.2); }, m, {Away()});
    run("tanh", [](auto& x) { return num::tanh(x[0]); }, m, {A()});
    run("sigmoid", [](auto& x) { return num::sigmoid(x[0]); }, m, {A()});
    run("exp", [](auto& x) { return num::exp(x[0]); }, m, {A()});
    run("log", [](auto& x) { return num::log(x[0]); }, m, {random(m, rng, 0.5, 2.0)});
    run("square", [](auto& x) { return num::square(x[0]); }, m, {A()});
    run("abs", [](auto& x) { return num::abs(x[0]); }, m, {Away()});
    {
        std::vector<std::uint8_t> mask{0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0};
        run("masked_fill", [mask](auto& x) { return num::masked_fill(x[0], mask, -2.0); }, m, {A()});
    }
    run("matmul", [](auto& x) { return num::matmul(x[0], x[1]); }, {3, 5}, {A(), random({4, 5}, rng)});
    run("transpose", [](auto& x) { return num::transpose(x[0]); }, {4, 3}, {A()});
    run("reshape", [](auto& x) { return num::reshape(x[0], {2, 6}); }, {2, 6}, {A()});
    run("concat_axis0", [](auto& x) { return num::concat({x[0], x[1]}, 0); }, {5, 4}, {A(), random({2, 4}, rng)});
    run("concat_axis1", [](auto& x) { return num::concat({x[0], x[1]}, 1); }, {3, 6}, {A(), random({3, 2}, rng)});
    run("slice", [](auto& x) { return num::slice(x[0], 1, 1, 2); }, {3, 2}, {A()});
    {
        std::vector<std::size_t> idx{2, 0, 2};
        run("gather_rows", [idx](auto& x) { return num::gather_rows(x[0], idx); }, {3, 4}, {A()});
    }
    run("sum", [](auto& x) { return num::sum(x[0]); }, {1}, {A()});
    run("mean", [](auto& x) { return num::mean(x[0]); }, {1}, {A()});
    run("sum_axis0", [](auto& x) { return num::sum(x[0], 0); }, {1, 4}, {A()});
    run("mean_axis1", [](auto& x) { return num::mean(x[0], 1); }, {3, 1}, {A()});
    run("softmax_axis1", [](auto& x) { return num::softmax(x[0], 1); }, m, {A()});
    run("softmax_axis0", [](auto& x) { return num::softmax(x[0], 0); }, m, {A()});
    run("dilated_conv1d", [](auto& x) { return num::dilated_conv1d(x[0], x[1], 2); }, {2, 5, 3},
        {random({2, 5, 4}, rng), random({3, 4, 3}, rng)});
    {
        // 4 nodes, 2 heads of width 3; node 3 only sees itself.
        std::vector<std::uint8_t> mask{0, 0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 1, 1, 0};
        run("gat_scores", [mask](auto& x) { return num::gat_scores(x[0], x[1], x[2], mask, 0.2); }, {8, 4},
            {random({4, 6}, rng), random({2, 3}, rng), random({2, 3}, rng)});
        run("gat_aggregate", [](auto& x) { return num::gat_aggregate(x[0], x[1]); }, {4, 6},
            {random({8, 4}, rng, 0.0, 1.0), random({4, 6}, rng)});
        run("gat_layer", [mask](auto& x) {
            auto wh = num::matmul(x[0], x[1]);
            return num::gat_aggregate(num::gat_scores(wh, x[2], x[3], mask, 0.2), wh);
        }, {4, 6}, {random({4, 5}, rng), random({5, 6}, rng), random({2, 3}, rng), random({2, 3}, rng)});
    }
    return out;
}

model::ModelConfig toy_model_config(model::Arch arch, const graph::Registries& reg) {
    model::ModelConfig c;
    c.arch = arch;
    c.heads = 2;
    c.embed_dim = 8;
    c.gat_layers = 2;
    c.temporal_kernel = 2;
    c.dilations = {1, 2};
    c.flat_hidden = 8;
    c.intervention_width = graph::intervention_width(reg);
    return c;
}

NamedReport gradcheck_model_loss(model::Arch arch, std::uint64_t seed) {
    auto s0 = toy_scenario(3, seed);
    auto s1 = toy_scenario(3, seed + 1);
    auto cfg = toy_model_config(arch, s0.registries);
    model::Model m(cfg, 120.0);
    Rng rng(seed, streams::kInit);
    for (std::size_t i = 0; i < m.params().size(); ++i)
        for (auto& v : m.params()[i].value) v += rng.uniform(-0.1, 0.1);

    auto alt = s0.current_intervention();
    alt.release_window = 40.0;
    alt.sync_mode = graph::SyncMode::Staggered;
    alt.target_priority = {12, 11};
    auto alt2 = s1.current_intervention();
    alt2.weapon_class = s1.registries.munitions[3].id;
    alt2.decoy = true;
    model::TrainSample a{&s0, 130.0, {alt}, {alt}};
    model::TrainSample b{&s1, 95.0, {alt2}, {alt2}};
    const std::vector<const model::TrainSample*> batch{&a, &b};

    auto f = [&](const std::vector<Tensor>& p) {
        return model::loss_total(m, p, batch, 0.1, 0.01, false, 0.25, 99, nullptr);
    };
    // Finite differences on days^2 need a step that keeps their cancellation error small.
    auto report = num::gradcheck(f, m.params().leaves(true), 1e-5, 1e-4);
    return {std::string("loss:") + model::to_string(arch), report};
}

} // namespace stcg::checks
