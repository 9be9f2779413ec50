#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lmpcast/grid/grid_graph.hpp"

namespace lmpcast::grid {

enum class LaplacianWeighting { Binary, Susceptance };

/// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.
inline Eigen::MatrixXd normalized_laplacian(const GridGraph& g,
                                            LaplacianWeighting weighting = LaplacianWeighting::Binary) {
    const auto n = static_cast<Eigen::Index>(g.node_count());
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges) {
        const double w = weighting == LaplacianWeighting::Binary ? 1.0 : e.susceptance;
        const auto a = static_cast<Eigen::Index>(e.from), b = static_cast<Eigen::Index>(e.to);
        adj(a, b) += w;
        adj(b, a) += w;
    }
    Eigen::VectorXd deg = adj.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(deg(i) > 0.0)) throw ValidationError("isolated node " + std::to_string(g.node_ids[i]) + " has degree zero");
    // w / sqrt(d_i d_j) is evaluated identically for (i,j) and (j,i), so L is exactly symmetric.
    Eigen::MatrixXd lap(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) lap(i, j) = adj(i, j) == 0.0 ? 0.0 : -adj(i, j) / std::sqrt(deg(i) * deg(j));
    lap.diagonal().array() += 1.0;
    return lap;
}

class ConvergenceError : public SolverError {
public:
    ConvergenceError(const std::string& what, double last) : SolverError(what), last_(last) {}
    double last_estimate() const noexcept { return last_; }

private:
    double last_;
};

/// Dominant eigenvalue of a symmetric matrix by power iteration on the Rayleigh quotient.
/// Stops once the relative change of the estimate drops below `tol`.
inline double max_eigenvalue(const Eigen::MatrixXd& m, double tol = 1e-9, int max_iter = 10000) {
    const auto n = m.rows();
    if (n == 0 || m.cols() != n) throw ValidationError("max_eigenvalue: matrix must be square and non-empty");
    Eigen::VectorXd v(n);
    // All ones plus a fixed perturbation, so the start is never orthogonal to the
    // dominant eigenvector nor aligned with the null vector of a Laplacian.
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(1.0 + 2.0 * static_cast<double>(i));
    v.normalize();
    double estimate = v.dot(m * v);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = m * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = v.dot(m * v);
        const double change = std::abs(next - estimate);
        estimate = next;
        if (change <= tol * std::abs(estimate)) return estimate;
    }
    throw ConvergenceError("power iteration did not converge", estimate);
}

/// Chebyshev polynomials T_0..T_{K-1} of the scaled Laplacian 2L/lambda_max - I.
struct SpectralBasis {
    Eigen::MatrixXd laplacian;
    double lambda_max = 0.0;
    Eigen::MatrixXd scaled_laplacian;
    std::vector<Eigen::MatrixXd> cheb_polys;

    std::size_t order() const { return cheb_polys.size(); }
};

inline SpectralBasis chebyshev_basis(const Eigen::MatrixXd& laplacian, double lambda_max, int order) {
    if (order < 1) throw ValidationError("chebyshev_basis: K must be >= 1");
    if (!(lambda_max > 0.0)) throw ValidationError("chebyshev_basis: lambda_max must be positive");
    SpectralBasis basis;
    const auto n = laplacian.rows();
    basis.laplacian = laplacian;
    basis.lambda_max = lambda_max;
    basis.scaled_laplacian = (2.0 / lambda_max) * laplacian - Eigen::MatrixXd::Identity(n, n);
    basis.cheb_polys.push_back(Eigen::MatrixXd::Identity(n, n));
    if (order >= 2) basis.cheb_polys.push_back(basis.scaled_laplacian);
    for (int k = 2; k < order; ++k) {
        const auto& prev = basis.cheb_polys[k - 1];
        const auto& prev2 = basis.cheb_polys[k - 2];
        basis.cheb_polys.push_back(2.0 * basis.scaled_laplacian * prev - prev2);
    }
    return basis;
}

/// Basis for a grid: normalized Laplacian, power-iteration lambda_max, K polynomials.
inline SpectralBasis spectral_basis(const GridGraph& g, int order,
                                    LaplacianWeighting weighting = LaplacianWeighting::Binary) {
    auto lap = normalized_laplacian(g, weighting);
    return chebyshev_basis(lap, max_eigenvalue(lap), order);
}

}  // namespace lmpcast::grid
