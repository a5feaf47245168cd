// CTG text format, one block per node:
//
//   # comment
//   node M
//     category DamageResponse
//     states 0 1
//     parents W
//     row 0 : 0.8 0.2
//     row 1 : 0.1 0.9
//   end
//
// Roots use "parents" with no names and a single "row : p0 p1 ...".
// Every parent-state combination must appear exactly once.

#include "stcg/ctg.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

namespace stcg::ctg {

namespace {

std::string fmt(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<std::string> words(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> w;
    std::string s;
    while (is >> s) w.push_back(s);
    return w;
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw CtgError("ctg line " + std::to_string(line) + ": " + what);
}

} // namespace

std::string write_ctg(const CausalGraph& g) {
    std::ostringstream os;
    for (const auto& n : g.nodes()) {
        os << "node " << n.id << "\n  category " << to_string(n.category) << "\n  states";
        for (const auto& s : n.states) os << ' ' << s;
        os << "\n  parents";
        for (const auto& p : n.parents) os << ' ' << p;
        os << '\n';
        std::vector<std::size_t> radix;
        for (const auto& p : n.parents) radix.push_back(g.node(p).states.size());
        for (std::size_t r = 0; r < n.cpt.size(); ++r) {
            os << "  row";
            std::size_t rem = r;
            std::vector<std::string> labels(n.parents.size());
            for (std::size_t k = n.parents.size(); k-- > 0;) {
                labels[k] = g.node(n.parents[k]).states[rem % radix[k]];
                rem /= radix[k];
            }
            for (const auto& l : labels) os << ' ' << l;
            os << " :";
            for (double p : n.cpt[r]) os << ' ' << fmt(p);
            os << '\n';
        }
        os << "end\n";
    }
    return os.str();
}

CausalGraph read_ctg(const std::string& text) {
    struct Pending {
        CtgNode node;
        int line = 0;
        bool has_category = false, has_states = false, has_parents = false;
        std::vector<std::pair<std::vector<std::string>, std::vector<double>>> rows;
        std::vector<int> row_lines;
    };
    std::vector<Pending> blocks;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    Pending* cur = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto w = words(line);
        if (w.empty()) continue;
        const auto& kw = w[0];
        if (kw == "node") {
            if (cur) fail(lineno, "'node' inside an unterminated block");
            if (w.size() != 2) fail(lineno, "expected 'node <id>'");
            blocks.emplace_back();
            cur = &blocks.back();
            cur->node.id = w[1];
            cur->line = lineno;
            continue;
        }
        if (!cur) fail(lineno, "'" + kw + "' outside a node block");
        if (kw == "end") {
            if (!cur->has_category || !cur->has_states || !cur->has_parents)
                fail(lineno, "node '" + cur->node.id + "' needs category, states and parents");
            cur = nullptr;
        } else if (kw == "category") {
            if (w.size() != 2) fail(lineno, "expected 'category <name>'");
            auto c = category_from(w[1]);
            if (!c) fail(lineno, "unknown category '" + w[1] + "'");
            cur->node.category = *c;
            cur->has_category = true;
        } else if (kw == "states") {
            cur->node.states.assign(w.begin() + 1, w.end());
            cur->has_states = true;
        } else if (kw == "parents") {
            cur->node.parents.assign(w.begin() + 1, w.end());
            cur->has_parents = true;
        } else if (kw == "row") {
            auto colon = std::find(w.begin(), w.end(), ":");
            if (colon == w.end()) fail(lineno, "row needs ':' between parent states and probabilities");
            std::vector<std::string> ps(w.begin() + 1, colon);
            std::vector<double> probs;
            for (auto it = colon + 1; it != w.end(); ++it) {
                double x = 0.0;
                auto [ptr, ec] = std::from_chars(it->data(), it->data() + it->size(), x);
                if (ec != std::errc() || ptr != it->data() + it->size()) fail(lineno, "bad probability '" + *it + "'");
                probs.push_back(x);
            }
            cur->rows.emplace_back(std::move(ps), std::move(probs));
            cur->row_lines.push_back(lineno);
        } else {
            fail(lineno, "unknown keyword '" + kw + "'");
        }
    }
    if (cur) fail(lineno, "unterminated node block '" + cur->node.id + "'");

    std::map<std::string, const CtgNode*> by_id;
    for (const auto& b : blocks) by_id[b.node.id] = &b.node;
    std::vector<CtgNode> nodes;
    for (auto& b : blocks) {
        std::vector<std::size_t> radix;
        std::size_t rows = 1;
        for (const auto& p : b.node.parents) {
            auto it = by_id.find(p);
            if (it == by_id.end()) fail(b.line, "node '" + b.node.id + "': unknown parent '" + p + "'");
            radix.push_back(it->second->states.size());
            rows *= radix.back();
        }
        b.node.cpt.assign(rows, {});
        std::vector<bool> seen(rows, false);
        for (std::size_t k = 0; k < b.rows.size(); ++k) {
            const auto& [labels, probs] = b.rows[k];
            if (labels.size() != b.node.parents.size())
                fail(b.row_lines[k], "row lists " + std::to_string(labels.size()) + " parent states, expected " +
                                         std::to_string(b.node.parents.size()));
            std::size_t r = 0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                const auto* parent = by_id.at(b.node.parents[i]);
                try {
                    r = r * radix[i] + parent->state_index(labels[i]);
                } catch (const CtgError& e) {
                    fail(b.row_lines[k], e.what());
                }
            }
            if (seen[r]) fail(b.row_lines[k], "duplicate CPT row");
            seen[r] = true;
            b.node.cpt[r] = probs;
        }
        for (std::size_t r = 0; r < rows; ++r)
            if (!seen[r]) fail(b.line, "node '" + b.node.id + "': CPT row " + std::to_string(r) + " missing");
        nodes.push_back(b.node);
    }
    return CausalGraph(std::move(nodes));
}

} // namespace stcg::ctg
