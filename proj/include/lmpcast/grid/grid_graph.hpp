#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lmpcast/common/error.hpp"

namespace lmpcast::grid {

struct Edge {
    std::size_t from = 0;  // always < to after validation
    std::size_t to = 0;
    double susceptance = 1.0;             // per-unit
    std::optional<double> flow_limit_mw;  // nullopt = unlimited
};

struct Generator {
    std::size_t node = 0;
    double g_min_mw = 0.0;
    double g_max_mw = 0.0;
    double c20 = 0.0;  // $/MWh^2
    double c10 = 0.0;  // $/MWh
};

/// Transmission network with generator set. Node indices are 0..N-1; `node_ids`
/// holds the external labels used in case and dataset files.
struct GridGraph {
    std::vector<long long> node_ids;
    std::vector<Edge> edges;
    std::vector<Generator> generators;
    std::size_t slack_node = 0;

    std::size_t node_count() const { return node_ids.size(); }
    std::size_t edge_count() const { return edges.size(); }

    std::size_t index_of(long long label) const {
        auto it = std::find(node_ids.begin(), node_ids.end(), label);
        if (it == node_ids.end()) throw ValidationError("unknown node id " + std::to_string(label));
        return static_cast<std::size_t>(it - node_ids.begin());
    }
};

inline std::vector<std::vector<std::size_t>> adjacency_lists(const GridGraph& g) {
    std::vector<std::vector<std::size_t>> adj(g.node_count());
    for (const auto& e : g.edges) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    return adj;
}

inline bool is_connected(const GridGraph& g) {
    const std::size_t n = g.node_count();
    if (n == 0) return false;
    auto adj = adjacency_lists(g);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        for (auto v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++visited;
                stack.push_back(v);
            }
    }
    return visited == n;
}

/// Indices of edges whose removal disconnects the graph (Tarjan low-link).
inline std::vector<std::size_t> bridge_edges(const GridGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        adj[g.edges[k].from].emplace_back(g.edges[k].to, k);
        adj[g.edges[k].to].emplace_back(g.edges[k].from, k);
    }
    constexpr auto unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> disc(n, unset), low(n, 0);
    std::vector<std::size_t> bridges;
    std::size_t timer = 0;
    struct Frame {
        std::size_t node, parent_edge, next;
    };
    for (std::size_t root = 0; root < n; ++root) {
        if (disc[root] != unset) continue;
        std::vector<Frame> stack{{root, unset, 0}};
        disc[root] = low[root] = timer++;
        while (!stack.empty()) {
            auto& f = stack.back();
            if (f.next < adj[f.node].size()) {
                auto [v, k] = adj[f.node][f.next++];
                if (k == f.parent_edge) continue;
                if (disc[v] == unset) {
                    disc[v] = low[v] = timer++;
                    stack.push_back({v, k, 0});
                } else {
                    low[f.node] = std::min(low[f.node], disc[v]);
                }
            } else {
                auto done = f;
                stack.pop_back();
                if (!stack.empty()) {
                    auto& parent = stack.back();
                    low[parent.node] = std::min(low[parent.node], low[done.node]);
                    if (low[done.node] > disc[parent.node]) bridges.push_back(done.parent_edge);
                }
            }
        }
    }
    std::sort(bridges.begin(), bridges.end());
    return bridges;
}

/// Checks every structural invariant; throws ValidationError naming the first violation.
inline void validate(GridGraph& g) {
    const std::size_t n = g.node_count();
    if (n == 0) throw ValidationError("graph has no nodes");
    {
        std::set<long long> ids(g.node_ids.begin(), g.node_ids.end());
        if (ids.size() != n) throw ValidationError("duplicate node id");
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto& e : g.edges) {
        if (e.from >= n || e.to >= n) throw ValidationError("edge endpoint out of range");
        if (e.from == e.to) throw ValidationError("self-loop at node " + std::to_string(g.node_ids[e.from]));
        if (e.from > e.to) std::swap(e.from, e.to);
        if (!(e.susceptance > 0.0) || !std::isfinite(e.susceptance))
            throw ValidationError("edge susceptance must be positive");
        if (e.flow_limit_mw && !(*e.flow_limit_mw > 0.0)) throw ValidationError("flow limit must be positive");
        if (!seen.emplace(e.from, e.to).second)
            throw ValidationError("duplicate edge between nodes " + std::to_string(g.node_ids[e.from]) + " and " +
                                  std::to_string(g.node_ids[e.to]));
    }
    if (g.generators.empty()) throw ValidationError("case has no generators");
    for (const auto& gen : g.generators) {
        if (gen.node >= n) throw ValidationError("generator node out of range");
        if (gen.g_min_mw > gen.g_max_mw) throw ValidationError("generator g_min exceeds g_max");
    }
    if (g.slack_node >= n) throw ValidationError("slack node out of range");
    if (!is_connected(g)) throw ValidationError("graph is disconnected");
}

}  // namespace lmpcast::grid
