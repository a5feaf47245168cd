#pragma once

// Brute-force world enumeration, written against the CPT layout only, used to
// check the CTG inference routines. Shared by the unit tests and acceptance.

#include "stcg/ctg.hpp"
#include "stcg/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace oracle {

using stcg::ctg::Assignment;
using stcg::ctg::CtgNode;

/// P(world) under truncated factorization: do-fixed nodes contribute 1 at
/// their forced state and 0 elsewhere.
inline double world_prob(const std::vector<CtgNode>& nodes, const std::vector<std::size_t>& st,
                         const Assignment& doa) {
    double p = 1.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (auto it = doa.find(n.id); it != doa.end()) {
            if (n.states[st[i]] != it->second) return 0.0;
            continue;
        }
        std::size_t row = 0;
        for (const auto& par : n.parents) {
            std::size_t k = 0;
            while (nodes[k].id != par) ++k;
            row = row * nodes[k].states.size() + st[k];
        }
        p *= n.cpt[row][st[i]];
    }
    return p;
}

template <typename Fn>
void for_each_world(const std::vector<CtgNode>& nodes, Fn&& fn) {
    std::vector<std::size_t> st(nodes.size(), 0);
    while (true) {
        fn(st);
        std::size_t i = 0;
        while (i < nodes.size() && ++st[i] == nodes[i].states.size()) st[i++] = 0;
        if (i == nodes.size()) return;
    }
}

inline std::size_t idx(const std::vector<CtgNode>& nodes, const std::string& id) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return i;
    throw std::out_of_range(id);
}

inline bool matches(const std::vector<CtgNode>& nodes, const std::vector<std::size_t>& st, const Assignment& ev) {
    for (const auto& [k, v] : ev)
        if (nodes[idx(nodes, k)].states[st[idx(nodes, k)]] != v) return false;
    return true;
}

inline std::vector<double> joint(const std::vector<CtgNode>& nodes, const std::string& target, const Assignment& ev,
                                 const Assignment& doa = {}) {
    const auto t = idx(nodes, target);
    std::vector<double> out(nodes[t].states.size(), 0.0);
    double z = 0;
    for_each_world(nodes, [&](const std::vector<std::size_t>& st) {
        if (!matches(nodes, st, ev)) return;
        const double p = world_prob(nodes, st, doa);
        out[st[t]] += p;
        z += p;
    });
    for (auto& v : out) v /= z;
    return out;
}

inline double expect(const std::vector<CtgNode>& nodes, const std::string& y, const Assignment& ev,
                     const Assignment& doa = {}) {
    auto d = joint(nodes, y, ev, doa);
    const auto& s = nodes[idx(nodes, y)].states;
    double e = 0;
    for (std::size_t i = 0; i < d.size(); ++i) e += d[i] * std::stod(s[i]);
    return e;
}

inline double te(const std::vector<CtgNode>& nodes, const std::string& w, const std::string& m, const std::string& y,
                 const std::string& state) {
    auto pm = joint(nodes, m, {}, {{w, state}});
    const auto& ms = nodes[idx(nodes, m)].states;
    double out = 0;
    for (std::size_t r = 0; r < ms.size(); ++r)
        if (pm[r] > 0) out += pm[r] * expect(nodes, y, {{m, ms[r]}});
    return out;
}

inline std::vector<double> random_row(stcg::Rng& rng, std::size_t k) {
    std::vector<double> row(k);
    double s = 0;
    for (auto& v : row) s += (v = 0.05 + rng.uniform());
    for (auto& v : row) v /= s;
    return row;
}

inline CtgNode make_node(const std::string& id, std::vector<std::string> parents, std::size_t rows, stcg::Rng& rng) {
    CtgNode n;
    n.id = id;
    n.states = {"0", "1"};
    n.parents = std::move(parents);
    for (std::size_t r = 0; r < rows; ++r) n.cpt.push_back(random_row(rng, 2));
    return n;
}

/// Random binary DAG on 2..max_nodes nodes; nodes listed in a random
/// topological order, each earlier node a parent with probability 0.5.
inline std::vector<CtgNode> random_dag(stcg::Rng& rng, int max_nodes = 6) {
    const int n = rng.uniform_int(2, max_nodes);
    std::vector<CtgNode> nodes;
    for (int i = 0; i < n; ++i) {
        std::vector<std::string> parents;
        for (int j = 0; j < i; ++j)
            if (rng.bernoulli(0.5)) parents.push_back("X" + std::to_string(j));
        nodes.push_back(make_node("X" + std::to_string(i), parents, std::size_t{1} << parents.size(), rng));
    }
    // Present the nodes in shuffled order so the library must sort them.
    rng.shuffle(nodes);
    return nodes;
}

/// W -> M -> Y with independent extra roots feeding only M or only Y.
inline std::vector<CtgNode> fully_mediated(stcg::Rng& rng) {
    std::vector<CtgNode> nodes;
    nodes.push_back(make_node("W", {}, 1, rng));
    std::vector<std::string> mp{"W"}, yp{"M"};
    const int extra = rng.uniform_int(0, 3);
    for (int i = 0; i < extra; ++i) {
        const std::string id = "U" + std::to_string(i);
        nodes.push_back(make_node(id, {}, 1, rng));
        (rng.bernoulli(0.5) ? mp : yp).push_back(id);
    }
    nodes.push_back(make_node("M", mp, std::size_t{1} << mp.size(), rng));
    nodes.push_back(make_node("Y", yp, std::size_t{1} << yp.size(), rng));
    return nodes;
}

} // namespace oracle
