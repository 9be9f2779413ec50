#pragma once

#include <random>

#include "helpers.hpp"
#include "lmpcast/autodiff/gradcheck.hpp"
#include "lmpcast/grid/spectral.hpp"
#include "lmpcast/model/model.hpp"
#include "lmpcast/train/losses.hpp"

namespace testutil {

inline lmpcast::model::Normalization unit_normalization(std::size_t n) {
    lmpcast::model::Normalization norm;
    norm.load_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    norm.load_std = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    norm.mu_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    return norm;
}

struct ToySpec {
    lmpcast::model::ModelKind kind = lmpcast::model::ModelKind::Astgcn;
    std::size_t nodes = 6;
    std::size_t t_hist = 4;
    std::size_t channels = 3;
    int K = 3;
    std::uint64_t seed = 11;
    std::vector<std::size_t> mlp_nodes{};
    std::size_t mlp_hidden = 5;
    std::size_t mlp_layers = 2;
};

inline lmpcast::model::Model toy_model(const ToySpec& s) {
    std::mt19937_64 rng(s.seed);
    auto g = random_graph(s.nodes, rng);
    auto basis = lmpcast::grid::spectral_basis(g, s.K);
    lmpcast::model::ModelConfig cfg;
    cfg.kind = s.kind;
    cfg.K = s.K;
    cfg.t_hist = s.t_hist;
    cfg.channels = s.channels;
    cfg.mlp_nodes = s.mlp_nodes;
    cfg.mlp_hidden = s.mlp_hidden;
    cfg.mlp_layers = s.mlp_layers;
    cfg.seed = s.seed;
    return lmpcast::model::Model(cfg, g.node_ids, basis.cheb_polys, unit_normalization(s.nodes));
}

inline lmpcast::ad::Tensor random_tensor(lmpcast::ad::Shape shape, std::mt19937_64& rng, double sd = 1.0) {
    lmpcast::ad::Tensor t(std::move(shape));
    std::normal_distribution<double> normal(0.0, sd);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
    return t;
}

/// Finite-difference check of one branch of `m` under its own training loss.
inline lmpcast::ad::GradCheckResult branch_gradcheck(const lmpcast::model::Model& m, lmpcast::model::Branch b,
                                                     std::size_t batch = 2, std::uint64_t seed = 5) {
    using namespace lmpcast;
    std::mt19937_64 rng(seed);
    const auto nodes = m.output_nodes();
    const std::size_t T = m.config().window(), M = nodes.size();
    const bool mlp = m.config().kind == model::ModelKind::Mlp;
    ad::Tensor x = random_tensor(mlp ? ad::Shape{M, batch, T} : ad::Shape{batch, m.node_count(), T}, rng);
    ad::Tensor target = random_tensor({batch, M}, rng, 3.0);
    std::vector<int> labels;
    for (std::size_t i = 0; i < batch * M; ++i) labels.push_back(static_cast<int>(rng() % 2));
    std::vector<ad::Tensor> params;
    for (auto id : m.branch_params(b)) params.push_back(m.params()[id].value);
    auto build = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
        auto raw = m.branch_forward(b, v, t.constant(x));
        switch (b) {
            case model::Branch::Lambda: return train::residual_loss(m.lambda_prices(raw), t.constant(target), 1.0, batch, M);
            case model::Branch::Status: return train::loss_status(raw, labels);
            case model::Branch::Mu: break;
        }
        return train::residual_loss(m.mu_prices(raw), t.constant(target), 2.0, batch, M);
    };
    ad::GradCheckSettings gs;
    gs.max_coords = 24;
    gs.seed = seed;
    return ad::gradcheck(build, params, gs);
}

/// Scalar Chebyshev polynomial by the three-term recursion.
inline double cheb_scalar(int k, double x) {
    double a = 1.0, b = x;
    if (k == 0) return a;
    for (int i = 1; i < k; ++i) {
        const double c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    return b;
}

/// Spectral-domain filter U diag(sum_k theta_k T_k(2 lambda / lambda_max - 1)) U^T x.
inline Eigen::MatrixXd spectral_filter(const Eigen::MatrixXd& laplacian, double lambda_max, const std::vector<double>& theta,
                                       const Eigen::MatrixXd& x) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian);
    const auto n = laplacian.rows();
    Eigen::VectorXd response(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double scaled = 2.0 * es.eigenvalues()(i) / lambda_max - 1.0;
        double r = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) r += theta[k] * cheb_scalar(static_cast<int>(k), scaled);
        response(i) = r;
    }
    return es.eigenvectors() * response.asDiagonal() * es.eigenvectors().transpose() * x;
}

/// Max-abs gap between graph_conv (one channel in and out, zero bias) and the spectral
/// filter on a random connected graph of `n` nodes. Both sides pass through ReLU.
inline double spectral_equivalence_gap(std::size_t n, std::mt19937_64& rng, int K = 3) {
    using namespace lmpcast;
    auto g = random_graph(n, rng);
    auto basis = grid::spectral_basis(g, K);
    std::normal_distribution<double> normal;
    std::vector<double> theta;
    for (int k = 0; k < K; ++k) theta.push_back(normal(rng));
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);

    ad::Tape t;
    ad::Tensor xt({n, 3, 1});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < 3; ++r) xt.at({i, r, 0}) = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
    auto gb = model::GraphBasis::from_dense(basis.cheb_polys);
    auto y = model::graph_conv(t.constant(xt), gb, t.constant(ad::Tensor({static_cast<std::size_t>(K), 1}, theta)),
                               t.constant(ad::Tensor({1})))
                 .value();
    Eigen::MatrixXd oracle = spectral_filter(basis.laplacian, basis.lambda_max, theta, x).cwiseMax(0.0);
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < 3; ++r)
            gap = std::max(gap, std::abs(y.at({i, r, 0}) - oracle(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r))));
    return gap;
}

}  // namespace testutil
