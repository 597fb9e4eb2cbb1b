#pragma once

#include "gacbo/common.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace gacbo {

/// Directed acyclic graph over observed nodes 0..m, target = m, with an
/// assignment of action variables to nodes (soft setting; empty in the hard
/// setting). Parent and action sets are bitmasks.
struct Dag {
    int m = 0;  // non-target node count; node ids 0..m, target id m
    int num_actions = 0;
    std::vector<std::uint32_t> parents;  // size m+1, bits over node ids
    std::vector<std::uint32_t> actions;  // size m+1, bits over action ids

    Dag() = default;
    Dag(int m_, int num_actions_)
        : m(m_), num_actions(num_actions_), parents(m_ + 1, 0), actions(m_ + 1, 0) {}

    int target() const { return m; }
    int num_nodes() const { return m + 1; }

    bool has_edge(int from, int to) const { return (parents[to] >> from) & 1u; }
    void add_edge(int from, int to) { parents[to] |= (1u << from); }

    friend bool operator==(const Dag& a, const Dag& b) {
        return a.m == b.m && a.num_actions == b.num_actions && a.parents == b.parents &&
               a.actions == b.actions;
    }
    friend bool operator!=(const Dag& a, const Dag& b) { return !(a == b); }
};

struct DagHash {
    std::size_t operator()(const Dag& g) const {
        std::size_t h = std::hash<int>()(g.m * 131 + g.num_actions);
        for (std::size_t i = 0; i < g.parents.size(); ++i) {
            h ^= std::hash<std::uint64_t>()((std::uint64_t(g.parents[i]) << 32) | g.actions[i]) +
                 0x9e3779b9 + (h << 6) + (h >> 2);
        }
        return h;
    }
};

inline bool is_acyclic(const Dag& g) {
    // Kahn's algorithm over the parent masks.
    const int n = g.num_nodes();
    std::vector<int> indeg(n, 0);
    for (int i = 0; i < n; ++i) indeg[i] = __builtin_popcount(g.parents[i]);
    std::vector<int> ready;
    for (int i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.push_back(i);
    int removed = 0;
    std::uint32_t done = 0;
    while (!ready.empty()) {
        const int u = ready.back();
        ready.pop_back();
        done |= (1u << u);
        ++removed;
        for (int v = 0; v < n; ++v) {
            if (g.has_edge(u, v)) {
                if (--indeg[v] == 0) ready.push_back(v);
            }
        }
    }
    (void)done;
    return removed == n;
}

/// Topological order with ties broken by ascending node index.
inline std::vector<int> topological_order(const Dag& g) {
    const int n = g.num_nodes();
    std::vector<int> order;
    order.reserve(n);
    std::uint32_t placed = 0;
    for (int step = 0; step < n; ++step) {
        int pick = -1;
        for (int i = 0; i < n; ++i) {
            if ((placed >> i) & 1u) continue;
            if ((g.parents[i] & ~placed) == 0) {
                pick = i;
                break;
            }
        }
        if (pick < 0) throw std::runtime_error("topological_order: graph has a cycle");
        placed |= (1u << pick);
        order.push_back(pick);
    }
    return order;
}

inline std::string mask_to_list(std::uint32_t mask) {
    std::ostringstream out;
    out << '[';
    bool first = true;
    for (int i = 0; i < 32; ++i) {
        if ((mask >> i) & 1u) {
            if (!first) out << ',';
            out << i;
            first = false;
        }
    }
    out << ']';
    return out.str();
}

/// Deterministic text serialization, one line per node:
///   node:i parents:[...] actions:[...]
inline std::string to_text(const Dag& g) {
    std::ostringstream out;
    for (int i = 0; i <= g.m; ++i) {
        out << "node:" << i << " parents:" << mask_to_list(g.parents[i]) << " actions:"
            << mask_to_list(g.actions[i]) << '\n';
    }
    return out.str();
}

inline std::uint32_t parse_mask_list(const std::string& s) {
    std::uint32_t mask = 0;
    std::string body = s;
    if (!body.empty() && body.front() == '[') body = body.substr(1);
    if (!body.empty() && body.back() == ']') body.pop_back();
    std::istringstream in(body);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) mask |= (1u << std::stoi(tok));
    }
    return mask;
}

inline Dag dag_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::uint32_t> parents, actions;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string node_tok, par_tok, act_tok;
        ls >> node_tok >> par_tok >> act_tok;
        if (node_tok.rfind("node:", 0) != 0) throw std::runtime_error("bad dag line: " + line);
        parents.push_back(parse_mask_list(par_tok.substr(par_tok.find(':') + 1)));
        actions.push_back(parse_mask_list(act_tok.substr(act_tok.find(':') + 1)));
    }
    if (parents.empty()) throw std::runtime_error("empty dag text");
    Dag g(static_cast<int>(parents.size()) - 1, 0);
    g.parents = parents;
    g.actions = actions;
    std::uint32_t all_actions = 0;
    for (auto a : g.actions) all_actions |= a;
    int q = 0;
    while (all_actions >> q) ++q;
    g.num_actions = q;
    if (!is_acyclic(g)) throw std::runtime_error("dag text describes a cyclic graph");
    return g;
}

struct DagConstraints {
    int cap = 4;  // max non-target nodes for exhaustive enumeration
    std::vector<std::pair<int, int>> forbidden_edges;
    bool actions_on_target = false;  // may hypothesis graphs route actions to the target
};

/// All DAGs over the observed nodes with the target as sink, crossed with all
/// assignments of each action variable to exactly one node. Deterministic order.
inline std::vector<Dag> enumerate_dags(int m, int num_actions,
                                       const DagConstraints& constraints = {}) {
    if (m > constraints.cap)
        throw std::runtime_error(
            "enumerate_dags: node count exceeds enumeration cap; use sampling mode");
    std::uint32_t forbidden_into[32] = {0};
    for (auto [from, to] : constraints.forbidden_edges) forbidden_into[to] |= (1u << from);

    // Candidate parent masks per node: node i < m may have any subset of the
    // other non-target nodes; the target may have any subset of all of them.
    std::vector<std::vector<std::uint32_t>> choices(m + 1);
    const std::uint32_t observed = (m == 0) ? 0 : ((1u << m) - 1);
    for (int i = 0; i <= m; ++i) {
        const std::uint32_t allowed = (observed & ~(i < m ? (1u << i) : 0u)) & ~forbidden_into[i];
        for (std::uint32_t sub = allowed;; sub = (sub - 1) & allowed) {
            choices[i].push_back(sub);
            if (sub == 0) break;
        }
        std::sort(choices[i].begin(), choices[i].end());
    }

    std::vector<Dag> skeletons;
    std::vector<std::size_t> idx(m + 1, 0);
    while (true) {
        Dag g(m, num_actions);
        for (int i = 0; i <= m; ++i) g.parents[i] = choices[i][idx[i]];
        if (is_acyclic(g)) skeletons.push_back(g);
        int i = 0;
        while (i <= m && ++idx[i] == choices[i].size()) idx[i++] = 0;
        if (i > m) break;
    }

    if (num_actions == 0) return skeletons;

    const int assignable = constraints.actions_on_target ? m + 1 : m;
    if (assignable == 0) return skeletons;
    std::vector<Dag> out;
    for (const Dag& skel : skeletons) {
        std::vector<int> assign(num_actions, 0);
        while (true) {
            Dag g = skel;
            for (int a = 0; a < num_actions; ++a) g.actions[assign[a]] |= (1u << a);
            out.push_back(g);
            int a = 0;
            while (a < num_actions && ++assign[a] == assignable) assign[a++] = 0;
            if (a == num_actions) break;
        }
    }
    return out;
}

/// Does `from` have a directed path to `to` in g, ignoring edges into the
/// nodes of `severed` (their incoming edges are cut by the intervention)?
inline bool reaches(const Dag& g, int from, int to, std::uint32_t severed) {
    std::uint32_t frontier = (1u << from), seen = frontier;
    while (frontier) {
        std::uint32_t next = 0;
        for (int v = 0; v <= g.m; ++v) {
            if ((seen >> v) & 1u) continue;
            if ((severed >> v) & 1u) continue;  // incoming edges severed
            if (g.parents[v] & frontier) next |= (1u << v);
        }
        if ((next >> to) & 1u) return true;
        seen |= next;
        frontier = next;
    }
    return from == to;
}

/// Minimal Intervention Sets, computed graphically: subsets S of the
/// intervenable nodes where every member still has a directed path to the
/// target once do(S) severs all of S's incoming edges. Includes the empty set.
inline std::vector<std::uint32_t> mis(const Dag& g, std::uint32_t intervenable) {
    intervenable &= ~(1u << g.target());
    std::vector<std::uint32_t> out;
    for (std::uint32_t s = intervenable;; s = (s - 1) & intervenable) {
        bool ok = true;
        for (int x = 0; x <= g.m && ok; ++x) {
            if (!((s >> x) & 1u)) continue;
            if (!reaches(g, x, g.target(), s)) ok = false;
        }
        if (ok) out.push_back(s);
        if (s == 0) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace gacbo
