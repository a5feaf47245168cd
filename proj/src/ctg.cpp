#include "stcg/ctg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>

namespace stcg::ctg {

const char* to_string(Category c) {
    switch (c) {
    case Category::PlatformMission: return "PlatformMission";
    case Category::DeliveryParameter: return "DeliveryParameter";
    case Category::TargetStructure: return "TargetStructure";
    case Category::DamageResponse: return "DamageResponse";
    case Category::RecoveryDelay: return "RecoveryDelay";
    }
    return "?";
}

std::optional<Category> category_from(const std::string& s) {
    for (auto c : {Category::PlatformMission, Category::DeliveryParameter, Category::TargetStructure,
                   Category::DamageResponse, Category::RecoveryDelay})
        if (s == to_string(c)) return c;
    return std::nullopt;
}

std::size_t CtgNode::state_index(const std::string& label) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == label) return i;
    throw CtgError("node '" + id + "' has no state '" + label + "'");
}

CausalGraph::CausalGraph(std::vector<CtgNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() > kMaxNodes)
        throw CtgError("causal graph: " + std::to_string(nodes_.size()) + " nodes exceeds cap of " +
                       std::to_string(kMaxNodes));
    std::set<std::string> ids;
    for (const auto& n : nodes_) {
        if (n.id.empty()) throw CtgError("causal graph: empty node id");
        if (!ids.insert(n.id).second) throw CtgError("causal graph: duplicate node '" + n.id + "'");
    }
    parent_idx_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.states.size() < 2 || n.states.size() > kMaxStates)
            throw CtgError("node '" + n.id + "': domain must have 2.." + std::to_string(kMaxStates) + " states");
        std::set<std::string> labels(n.states.begin(), n.states.end());
        if (labels.size() != n.states.size()) throw CtgError("node '" + n.id + "': duplicate state labels");
        std::set<std::string> seen;
        std::size_t rows = 1;
        for (const auto& p : n.parents) {
            if (!seen.insert(p).second) throw CtgError("node '" + n.id + "': parent '" + p + "' listed twice");
            auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const CtgNode& m) { return m.id == p; });
            if (it == nodes_.end()) throw CtgError("node '" + n.id + "': unknown parent '" + p + "'");
            parent_idx_[i].push_back(static_cast<std::size_t>(it - nodes_.begin()));
            rows *= it->states.size();
        }
        if (n.cpt.size() != rows)
            throw CtgError("node '" + n.id + "': CPT has " + std::to_string(n.cpt.size()) + " rows, expected " +
                           std::to_string(rows));
        for (std::size_t r = 0; r < rows; ++r) {
            const auto& row = n.cpt[r];
            if (row.size() != n.states.size())
                throw CtgError("node '" + n.id + "': CPT row " + std::to_string(r) + " has wrong width");
            double s = 0.0;
            for (double p : row) {
                if (!(p >= 0.0 && p <= 1.0)) throw CtgError("node '" + n.id + "': CPT entry outside [0,1]");
                s += p;
            }
            if (std::fabs(s - 1.0) > 1e-9)
                throw CtgError("node '" + n.id + "': CPT row " + std::to_string(r) + " sums to " + std::to_string(s));
        }
    }
    // Topological order (Kahn, lowest index first).
    std::vector<std::size_t> indeg(nodes_.size(), 0);
    std::vector<std::vector<std::size_t>> children(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        for (auto p : parent_idx_[i]) {
            children[p].push_back(i);
            ++indeg[i];
        }
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (indeg[i] == 0) ready.insert(i);
    while (!ready.empty()) {
        auto u = *ready.begin();
        ready.erase(ready.begin());
        order_.push_back(u);
        for (auto c : children[u])
            if (--indeg[c] == 0) ready.insert(c);
    }
    if (order_.size() != nodes_.size()) throw CtgError("causal graph: parent structure contains a cycle");
    if (world_count() > kMaxWorlds) throw CtgError("causal graph: joint state space too large for enumeration");
}

std::size_t CausalGraph::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == id) return i;
    throw CtgError("causal graph: unknown node '" + id + "'");
}

bool CausalGraph::contains(const std::string& id) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const CtgNode& n) { return n.id == id; });
}

std::vector<std::pair<std::string, std::string>> CausalGraph::edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& n : nodes_)
        for (const auto& p : n.parents) out.emplace_back(p, n.id);
    return out;
}

std::size_t CausalGraph::world_count() const {
    std::size_t w = 1;
    for (const auto& n : nodes_) {
        if (w > kMaxWorlds) return w;
        w *= n.states.size();
    }
    return w;
}

double CausalGraph::world_probability(const std::vector<std::size_t>& states) const {
    double p = 1.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        std::size_t row = 0;
        for (auto pi : parent_idx_[i]) row = row * nodes_[pi].states.size() + states[pi];
        p *= nodes_[i].cpt[row][states[i]];
        if (p == 0.0) return 0.0;
    }
    return p;
}

std::optional<std::vector<double>> CausalGraph::numeric_states(const std::string& id) const {
    const auto& n = node(id);
    std::vector<double> v;
    for (const auto& s : n.states) {
        double x = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
        if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
        v.push_back(x);
    }
    return v;
}

namespace {

// Calls fn(states, p) for every world consistent with `fixed` (SIZE_MAX = free).
template <typename F>
void for_each_world(const CausalGraph& g, const std::vector<std::size_t>& fixed, F&& fn) {
    const auto& nodes = g.nodes();
    const std::size_t n = nodes.size();
    std::vector<std::size_t> st(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (fixed[i] != SIZE_MAX) st[i] = fixed[i];
    while (true) {
        double p = g.world_probability(st);
        if (p > 0.0) fn(st, p);
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (fixed[i] != SIZE_MAX) continue;
            if (++st[i] < nodes[i].states.size()) break;
            st[i] = 0;
        }
        if (i == n) break;
    }
}

std::vector<std::size_t> resolve(const CausalGraph& g, const Assignment& a) {
    std::vector<std::size_t> fixed(g.nodes().size(), SIZE_MAX);
    for (const auto& [id, label] : a) {
        auto i = g.index_of(id);
        fixed[i] = g.nodes()[i].state_index(label);
    }
    return fixed;
}

std::vector<double> numeric_or_throw(const CausalGraph& g, const std::string& outcome) {
    auto v = g.numeric_states(outcome);
    if (!v) throw CtgError("outcome '" + outcome + "' does not have a numeric state domain");
    return *v;
}

} // namespace

std::vector<double> joint_query(const CausalGraph& g, const std::string& target, const Assignment& evidence) {
    const auto ti = g.index_of(target);
    const auto fixed = resolve(g, evidence);
    std::vector<double> acc(g.nodes()[ti].states.size(), 0.0);
    double z = 0.0;
    for_each_world(g, fixed, [&](const std::vector<std::size_t>& st, double p) {
        acc[st[ti]] += p;
        z += p;
    });
    if (z <= 0.0) throw ZeroProbabilityEvidence("joint_query: evidence has probability zero");
    for (auto& x : acc) x /= z;
    return acc;
}

CausalGraph intervene(const CausalGraph& g, const Assignment& do_assign) {
    auto nodes = g.nodes();
    for (const auto& [id, label] : do_assign) {
        auto& n = nodes.at(g.index_of(id));
        auto s = n.state_index(label);
        n.parents.clear();
        n.cpt.assign(1, std::vector<double>(n.states.size(), 0.0));
        n.cpt[0][s] = 1.0;
    }
    return CausalGraph(std::move(nodes));
}

double expectation(const CausalGraph& g, const std::string& outcome, const Assignment& evidence) {
    auto values = numeric_or_throw(g, outcome);
    auto dist = joint_query(g, outcome, evidence);
    double e = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) e += dist[i] * values[i];
    return e;
}

double causal_effect(const CausalGraph& g, const std::string& treatment, const std::string& w1,
                     const std::string& w0, const std::string& outcome) {
    numeric_or_throw(g, outcome);
    if (w1 == w0) {
        (void)g.node(treatment).state_index(w1);
        return 0.0;
    }
    double e1 = expectation(intervene(g, {{treatment, w1}}), outcome);
    double e0 = expectation(intervene(g, {{treatment, w0}}), outcome);
    return e1 - e0;
}

MediatedEffect mediated_total_effect(const CausalGraph& g, const std::string& treatment, const std::string& mediator,
                                     const std::string& outcome, const std::string& do_state) {
    numeric_or_throw(g, outcome);
    const auto& med = g.node(mediator);
    auto p_med = joint_query(intervene(g, {{treatment, do_state}}), mediator);
    MediatedEffect out;
    for (std::size_t r = 0; r < med.states.size(); ++r) {
        if (p_med[r] == 0.0) continue;
        try {
            out.value += p_med[r] * expectation(g, outcome, {{mediator, med.states[r]}});
        } catch (const ZeroProbabilityEvidence&) {
            out.warnings.push_back("mediator state '" + med.states[r] +
                                   "' has zero observational probability; its term contributes 0");
        }
    }
    return out;
}

DoObserveGap do_vs_observe_gap(const CausalGraph& g, const std::string& treatment, const std::string& state,
                               const std::string& outcome) {
    DoObserveGap r;
    r.p_do = expectation(intervene(g, {{treatment, state}}), outcome);
    r.p_obs = expectation(g, outcome, {{treatment, state}});
    return r;
}

CausalGraph learn_cpts(const std::vector<CtgNode>& skeleton, const std::vector<Assignment>& records, double alpha) {
    if (alpha < 0.0) throw CtgError("learn_cpts: smoothing must be >= 0");
    std::vector<CtgNode> nodes = skeleton;
    // Build once (with uniform CPTs) to validate the structure and get indices.
    for (auto& n : nodes) {
        std::size_t rows = 1;
        for (const auto& p : n.parents) {
            auto it = std::find_if(skeleton.begin(), skeleton.end(), [&](const CtgNode& m) { return m.id == p; });
            if (it == skeleton.end()) throw CtgError("learn_cpts: unknown parent '" + p + "'");
            rows *= it->states.size();
        }
        n.cpt.assign(rows, std::vector<double>(n.states.size(), 1.0 / static_cast<double>(n.states.size())));
    }
    CausalGraph shape(nodes);
    std::vector<std::vector<std::vector<double>>> counts;
    for (const auto& n : nodes) counts.emplace_back(n.cpt.size(), std::vector<double>(n.states.size(), 0.0));
    for (std::size_t ri = 0; ri < records.size(); ++ri) {
        const auto fixed = resolve(shape, records[ri]);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (fixed[i] == SIZE_MAX)
                throw CtgError("learn_cpts: record " + std::to_string(ri) + " lacks node '" + nodes[i].id + "'");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            std::size_t row = 0;
            for (const auto& p : nodes[i].parents) {
                auto pi = shape.index_of(p);
                row = row * nodes[pi].states.size() + fixed[pi];
            }
            counts[i][row][fixed[i]] += 1.0;
        }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t r = 0; r < nodes[i].cpt.size(); ++r) {
            double total = 0.0;
            for (double c : counts[i][r]) total += c + alpha;
            for (std::size_t s = 0; s < nodes[i].states.size(); ++s)
                nodes[i].cpt[r][s] = total > 0.0 ? (counts[i][r][s] + alpha) / total
                                                 : 1.0 / static_cast<double>(nodes[i].states.size());
        }
    return CausalGraph(std::move(nodes));
}

} // namespace stcg::ctg
