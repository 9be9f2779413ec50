#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "lmpcast/autodiff/ops.hpp"

namespace lmpcast::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

/// Chebyshev polynomials T_k(L~) in sparse form for graph convolution.
struct GraphBasis {
    std::vector<ad::SparseRowMatrix> polys;
    std::vector<bool> identity;  // T_0 is usually I and is then skipped

    std::size_t order() const { return polys.size(); }
    std::size_t nodes() const { return polys.empty() ? 0 : static_cast<std::size_t>(polys[0].rows()); }

    static GraphBasis from_dense(const std::vector<Eigen::MatrixXd>& dense) {
        GraphBasis b;
        for (const auto& m : dense) {
            if (m.rows() != m.cols()) throw ValidationError("Chebyshev polynomial must be square");
            b.identity.push_back(m.isIdentity(0.0));
            ad::SparseRowMatrix s = m.sparseView(0.0, 0.0);
            s.makeCompressed();
            b.polys.push_back(std::move(s));
        }
        return b;
    }
};

/// Bilinear attention parameters. Spatial: V, b are N x N and w1, w2 are T x 1.
/// Temporal: V, b are T x T and w1, w2 are N x 1.
struct AttentionVars {
    Var V, b, w1, w2;
};

namespace detail {

// Row-softmax of V o sigmoid((x w1)(x w2)^T + b) for x [B, R, D], w [D, 1]; gives [B, R, R].
inline Var bilinear_mask(Var x, const AttentionVars& p) {
    const auto& s = x.shape();
    const std::size_t B = s[0], R = s[1], D = s[2];
    if (p.w1.shape() != Shape{D, 1} || p.w2.shape() != Shape{D, 1} || p.V.shape() != Shape{R, R} ||
        p.b.shape() != Shape{R, R})
        throw ValidationError("attention: parameter shapes do not match input " + ad::to_string(s));
    auto flat = ad::reshape(x, {B * R, D});
    auto left = ad::reshape(ad::matmul(flat, p.w1), {B, R, 1});
    auto right = ad::reshape(ad::matmul(flat, p.w2), {B, 1, R});
    auto scores = ad::mul_broadcast(ad::sigmoid(ad::add_broadcast(ad::bmm(left, right), p.b)), p.V);
    return ad::row_softmax(scores);
}

}  // namespace detail

/// Spatial mask S' [B, N, N] for input x [B, N, T]; S'[i, j] is the weight of node j for node i.
inline Var spatial_attention(Var x, const AttentionVars& p) {
    if (x.value().rank() != 3) throw ValidationError("spatial_attention: expected [B,N,T], got " + ad::to_string(x.shape()));
    return detail::bilinear_mask(x, p);
}

/// Temporal mask E' [B, T, T] for input x [B, N, T].
inline Var temporal_attention(Var x, const AttentionVars& p) {
    if (x.value().rank() != 3) throw ValidationError("temporal_attention: expected [B,N,T], got " + ad::to_string(x.shape()));
    return detail::bilinear_mask(ad::permute(x, {0, 2, 1}), p);
}

/// Re-weights x [B, N, T] along time by E' and then along nodes by S': S' x E'^T.
inline Var apply_attention(Var x, Var temporal, Var spatial) {
    return ad::bmm(spatial, ad::bmm(x, ad::permute(temporal, {0, 2, 1})));
}

/// ReLU(sum_k T_k x theta_k + bias) for x [N, R, C_in]; theta stacks the K blocks
/// of shape [C_in, C_out] vertically.
inline Var graph_conv(Var x, const GraphBasis& basis, Var theta, Var bias) {
    const auto& s = x.shape();
    if (s.size() != 3 || s[0] != basis.nodes()) throw ValidationError("graph_conv: input " + ad::to_string(s) + " vs basis");
    const std::size_t N = s[0], R = s[1], C = s[2], K = basis.order();
    if (theta.shape().size() != 2 || theta.shape()[0] != K * C)
        throw ValidationError("graph_conv: theta " + ad::to_string(theta.shape()) + " does not match K=" + std::to_string(K) +
                              " and " + std::to_string(C) + " input channels");
    const std::size_t C_out = theta.shape()[1];
    std::vector<Var> parts;
    for (std::size_t k = 0; k < K; ++k) parts.push_back(basis.identity[k] ? x : ad::left_multiply(basis.polys[k], x));
    auto stacked = K == 1 ? parts[0] : ad::concat_last(parts);
    auto y = ad::reshape(ad::matmul(ad::reshape(stacked, {N * R, K * C}), theta), {N, R, C_out});
    return ad::relu(ad::add_broadcast(y, bias));
}

struct StConvVars {
    Var theta, bias, phi;
};

/// Graph convolution, then a same-padded depthwise temporal convolution and ReLU.
/// x [N, B, T, C_in] -> [N, B, T, C_out].
inline Var st_conv_block(Var x, const GraphBasis& basis, const StConvVars& p) {
    const auto& s = x.shape();
    if (s.size() != 4) throw ValidationError("st_conv_block: expected [N,B,T,C], got " + ad::to_string(s));
    const std::size_t N = s[0], B = s[1], T = s[2];
    auto g = graph_conv(ad::reshape(x, {N, B * T, s[3]}), basis, p.theta, p.bias);
    const std::size_t C = g.shape()[2];
    auto t = ad::conv1d_time(ad::reshape(g, {N * B, T, C}), p.phi);
    return ad::reshape(ad::relu(t), {N, B, T, C});
}

/// Per-node projection of the flattened T x C features: x [N, B, T, C] with W [N, T*C, q],
/// bias [N, q] -> [B, N, q].
inline Var node_projection(Var x, Var W, Var bias) {
    const auto& s = x.shape();
    const std::size_t N = s[0], B = s[1];
    auto f = ad::bmm(ad::reshape(x, {N, B, s[2] * s[3]}), W);
    return ad::permute(ad::add_broadcast_mid(f, bias), {1, 0, 2});
}

/// Composition of the three branch outputs for one sample.
struct Composition {
    Eigen::VectorXd lmp;
    double lambda_hat = 0.0;
    int s_hat = 0;
    double s_probability = 0.0;  // mean class-1 probability over nodes
};

/// lambda_out: N system-price estimates; s_logits: N x 2; mu_hat: N (already summed over q).
inline Composition compose_lmp(const Eigen::VectorXd& lambda_out, const Eigen::MatrixXd& s_logits,
                               const Eigen::VectorXd& mu_hat) {
    const auto n = lambda_out.size();
    if (s_logits.rows() != n || s_logits.cols() != 2 || mu_hat.size() != n)
        throw ValidationError("compose_lmp: branch output sizes disagree");
    Composition c;
    c.lambda_hat = lambda_out.mean();
    double p = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = s_logits(i, 0), b = s_logits(i, 1), m = std::max(a, b);
        p += std::exp(b - m) / (std::exp(a - m) + std::exp(b - m));
    }
    c.s_probability = p / static_cast<double>(n);
    c.s_hat = c.s_probability > 0.5 ? 1 : 0;
    c.lmp = Eigen::VectorXd::Constant(n, c.lambda_hat);
    if (c.s_hat) c.lmp += mu_hat;
    return c;
}

}  // namespace lmpcast::model
