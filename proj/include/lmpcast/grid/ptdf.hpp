#pragma once

#include <Eigen/Dense>

#include "lmpcast/grid/grid_graph.hpp"

namespace lmpcast::grid {

/// Line-flow sensitivities: values(k, i) is the MW flow on edge k (positive from
/// `from` to `to`) per MW injected at node i and withdrawn at the slack node.
struct PtdfMatrix {
    Eigen::MatrixXd values;
    std::size_t slack_node = 0;

    /// Flows for a nodal injection vector; with zero-sum injections the slack choice is irrelevant.
    Eigen::VectorXd flows(const Eigen::VectorXd& injection) const { return values * injection; }
};

inline Eigen::MatrixXd susceptance_matrix(const GridGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.node_count());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges) {
        const auto f = static_cast<Eigen::Index>(e.from), t = static_cast<Eigen::Index>(e.to);
        b(f, f) += e.susceptance;
        b(t, t) += e.susceptance;
        b(f, t) -= e.susceptance;
        b(t, f) -= e.susceptance;
    }
    return b;
}

inline PtdfMatrix ptdf(const GridGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.node_count());
    const auto slack = static_cast<Eigen::Index>(g.slack_node);
    Eigen::MatrixXd bus = susceptance_matrix(g);

    // Drop the slack row/column, invert, and re-insert zeros.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != slack) keep.push_back(i);
    const auto r = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd reduced(r, r);
    for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) reduced(a, b) = bus(keep[a], keep[b]);

    Eigen::MatrixXd angles = Eigen::MatrixXd::Zero(n, n);  // d theta / d injection
    if (r > 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(reduced);
        if (!lu.isInvertible()) throw ValidationError("reduced susceptance matrix is singular (disconnected network)");
        Eigen::MatrixXd inv = lu.inverse();
        for (Eigen::Index a = 0; a < r; ++a)
            for (Eigen::Index b = 0; b < r; ++b) angles(keep[a], keep[b]) = inv(a, b);
    }

    PtdfMatrix out;
    out.slack_node = g.slack_node;
    out.values.resize(static_cast<Eigen::Index>(g.edge_count()), n);
    for (std::size_t k = 0; k < g.edge_count(); ++k) {
        const auto& e = g.edges[k];
        out.values.row(static_cast<Eigen::Index>(k)) =
            e.susceptance * (angles.row(static_cast<Eigen::Index>(e.from)) - angles.row(static_cast<Eigen::Index>(e.to)));
    }
    return out;
}

}  // namespace lmpcast::grid
