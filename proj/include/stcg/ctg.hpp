#pragma once

// Discrete structural causal model over the causal-tactical graph.
// All queries are exact: they enumerate every joint world, so graphs are
// capped (kMaxNodes nodes, kMaxStates states per node, kMaxWorlds worlds).

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stcg::ctg {

enum class Category { PlatformMission, DeliveryParameter, TargetStructure, DamageResponse, RecoveryDelay };
inline constexpr int kCategoryCount = 5;

const char* to_string(Category c);
std::optional<Category> category_from(const std::string& s);

inline constexpr std::size_t kMaxNodes = 20;
inline constexpr std::size_t kMaxStates = 8;
inline constexpr std::size_t kMaxWorlds = std::size_t{1} << 22;

class CtgError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ZeroProbabilityEvidence : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CtgNode {
    std::string id;
    Category category = Category::PlatformMission;
    std::vector<std::string> states; // ordered domain, >= 2 labels
    std::vector<std::string> parents;
    // One row per parent-state combination, mixed radix with the first parent
    // most significant; row r holds P(node = s | parents = combo(r)).
    std::vector<std::vector<double>> cpt;

    [[nodiscard]] std::size_t state_index(const std::string& label) const;
    bool operator==(const CtgNode&) const = default;
};

/// node id -> state label
using Assignment = std::map<std::string, std::string>;

class CausalGraph {
  public:
    CausalGraph() = default;
    /// Validates CPT shapes and row sums, parent references and acyclicity.
    explicit CausalGraph(std::vector<CtgNode> nodes);

    [[nodiscard]] const std::vector<CtgNode>& nodes() const { return nodes_; }
    [[nodiscard]] const CtgNode& node(const std::string& id) const { return nodes_.at(index_of(id)); }
    [[nodiscard]] std::size_t index_of(const std::string& id) const;
    [[nodiscard]] bool contains(const std::string& id) const;
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> edges() const;
    /// Node indices, parents first.
    [[nodiscard]] const std::vector<std::size_t>& topo_order() const { return order_; }
    [[nodiscard]] std::size_t world_count() const;
    /// P(world) for a full assignment given as state indices per node.
    [[nodiscard]] double world_probability(const std::vector<std::size_t>& states) const;
    /// Numeric value of each state label; nullopt if any label is not numeric.
    [[nodiscard]] std::optional<std::vector<double>> numeric_states(const std::string& id) const;

    bool operator==(const CausalGraph& o) const { return nodes_ == o.nodes_; }

  private:
    std::vector<CtgNode> nodes_;
    std::vector<std::size_t> order_;
    std::vector<std::vector<std::size_t>> parent_idx_;
};

/// P(target | evidence) by enumeration.
std::vector<double> joint_query(const CausalGraph& g, const std::string& target, const Assignment& evidence = {});

/// Graph mutilation: intervened nodes lose their parents and get a point-mass CPT.
CausalGraph intervene(const CausalGraph& g, const Assignment& do_assign);

/// E[outcome | evidence], outcome states read as numbers.
double expectation(const CausalGraph& g, const std::string& outcome, const Assignment& evidence = {});

/// E[Y | do(T=w1)] - E[Y | do(T=w0)].
double causal_effect(const CausalGraph& g, const std::string& treatment, const std::string& w1,
                     const std::string& w0, const std::string& outcome);

struct MediatedEffect {
    double value = 0.0;
    std::vector<std::string> warnings;
};

/// sum_r P(M=r | do(T=t)) * E[Y | M=r]; unobservable mediator states contribute 0 with a warning.
MediatedEffect mediated_total_effect(const CausalGraph& g, const std::string& treatment, const std::string& mediator,
                                     const std::string& outcome, const std::string& do_state);

struct DoObserveGap {
    double p_do = 0.0;  // E[Y | do(T=t)]
    double p_obs = 0.0; // E[Y | T=t]
};

DoObserveGap do_vs_observe_gap(const CausalGraph& g, const std::string& treatment, const std::string& state,
                               const std::string& outcome);

/// Maximum-likelihood CPTs with additive (Laplace) smoothing from complete
/// records; the structure (nodes, states, parents) is taken from `skeleton`.
CausalGraph learn_cpts(const std::vector<CtgNode>& skeleton, const std::vector<Assignment>& records,
                       double alpha = 1.0);

// -- text format ---------------------------------------------------------
std::string write_ctg(const CausalGraph& g);
CausalGraph read_ctg(const std::string& text);

} // namespace stcg::ctg
