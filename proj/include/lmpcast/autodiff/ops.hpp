#pragma once

#include <Eigen/Sparse>
#include <cmath>
#include <cstring>
#include <vector>

#include "lmpcast/autodiff/tape.hpp"

namespace lmpcast::ad {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {

[[noreturn]] inline void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw ValidationError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

inline void require_rank(const char* op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank)
        throw ValidationError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                              to_string(t.shape()));
}

/// True if `tail` equals the trailing dims of `full`.
inline bool is_suffix(const Shape& full, const Shape& tail) {
    if (tail.size() > full.size()) return false;
    return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

inline Tensor permute_values(const Tensor& x, const std::vector<std::size_t>& axes) {
    const auto& in = x.shape();
    const std::size_t r = in.size();
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[axes[i]];
    Tensor out(out_shape);
    // Trailing axes left in place are copied as contiguous blocks.
    std::size_t keep = r;
    while (keep > 0 && axes[keep - 1] == keep - 1) --keep;
    std::size_t block = 1;
    for (std::size_t i = keep; i < r; ++i) block *= in[i];
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
    const std::size_t outer = x.size() / std::max<std::size_t>(block, 1);
    std::vector<std::size_t> idx(keep, 0);
    const double* src = x.data();
    double* dst = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < keep; ++i) off += idx[i] * in_stride[axes[i]];
        std::memcpy(dst + o * block, src + off, block * sizeof(double));
        for (std::size_t i = keep; i-- > 0;) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

}  // namespace detail

/// [m,k] x [k,n] -> [m,n]
inline Var matmul(Var a, Var b) {
    const auto &A = a.value(), &B = b.value();
    detail::require_rank("matmul", A, 2);
    detail::require_rank("matmul", B, 2);
    if (A.dim(1) != B.dim(0)) detail::shape_error("matmul", A.shape(), B.shape());
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    out.matrix(m).noalias() = A.matrix(m) * B.matrix(k);
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib, m, k](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) t.grad_buffer(ia).matrix(m).noalias() += g.matrix(m) * t.value(ib).matrix(k).transpose();
        if (t.requires_grad(ib)) t.grad_buffer(ib).matrix(k).noalias() += t.value(ia).matrix(m).transpose() * g.matrix(m);
    });
}

/// Batched matmul: [B,m,k] x [B,k,n] -> [B,m,n]
inline Var bmm(Var a, Var b) {
    const auto &A = a.value(), &B = b.value();
    detail::require_rank("bmm", A, 3);
    detail::require_rank("bmm", B, 3);
    if (A.dim(0) != B.dim(0) || A.dim(2) != B.dim(1)) detail::shape_error("bmm", A.shape(), B.shape());
    const std::size_t nb = A.dim(0), m = A.dim(1), k = A.dim(2), n = B.dim(2);
    Tensor out({nb, m, n});
    for (std::size_t i = 0; i < nb; ++i) {
        ConstMatrixMap ai(A.data() + i * m * k, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
        ConstMatrixMap bi(B.data() + i * k * n, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
        MatrixMap oi(out.data() + i * m * n, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        oi.noalias() = ai * bi;
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib, nb, m, k, n](Tape& t, const Tensor& g) {
        const auto E = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
        const bool ga = t.requires_grad(ia), gb = t.requires_grad(ib);
        double* da = ga ? t.grad_buffer(ia).data() : nullptr;
        double* db = gb ? t.grad_buffer(ib).data() : nullptr;
        const double* av = t.value(ia).data();
        const double* bv = t.value(ib).data();
        for (std::size_t i = 0; i < nb; ++i) {
            ConstMatrixMap gi(g.data() + i * m * n, E(m), E(n));
            if (ga)
                MatrixMap(da + i * m * k, E(m), E(k)).noalias() += gi * ConstMatrixMap(bv + i * k * n, E(k), E(n)).transpose();
            if (gb)
                MatrixMap(db + i * k * n, E(k), E(n)).noalias() += ConstMatrixMap(av + i * m * k, E(m), E(k)).transpose() * gi;
        }
    });
}

/// Left-multiplies by a constant sparse matrix: x viewed as [M.cols(), rest] -> [M.rows(), rest].
inline Var left_multiply(const SparseRowMatrix& M, Var x) {
    const auto& X = x.value();
    if (X.rank() < 1 || X.dim(0) != static_cast<std::size_t>(M.cols()))
        detail::shape_error("left_multiply", Shape{static_cast<std::size_t>(M.rows()), static_cast<std::size_t>(M.cols())},
                            X.shape());
    Shape out_shape = X.shape();
    out_shape[0] = static_cast<std::size_t>(M.rows());
    Tensor out(out_shape);
    out.matrix(out_shape[0]).noalias() = M * X.matrix(X.dim(0));
    const auto ix = x.id();
    const std::size_t rows_in = X.dim(0), rows_out = out_shape[0];
    return x.tape().record(std::move(out), {x}, [ix, rows_in, rows_out, &M](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).matrix(rows_in).noalias() += M.transpose() * g.matrix(rows_out);
    });
}

inline Var add(Var a, Var b) {
    if (a.shape() != b.shape()) detail::shape_error("add", a.shape(), b.shape());
    Tensor out = a.value();
    out.array() += b.value().array();
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

inline Var sub(Var a, Var b) {
    if (a.shape() != b.shape()) detail::shape_error("sub", a.shape(), b.shape());
    Tensor out = a.value();
    out.array() -= b.value().array();
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        t.accumulate(ia, g);
        if (t.requires_grad(ib)) t.grad_buffer(ib).array() -= g.array();
    });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
    if (a.shape() != b.shape()) detail::shape_error("mul", a.shape(), b.shape());
    Tensor out = a.value();
    out.array() *= b.value().array();
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) t.grad_buffer(ia).array() += g.array() * t.value(ib).array();
        if (t.requires_grad(ib)) t.grad_buffer(ib).array() += g.array() * t.value(ia).array();
    });
}

/// x + b where b's shape equals the trailing dims of x (bias broadcast over leading dims).
inline Var add_broadcast(Var x, Var b) {
    const auto &X = x.value(), &Bv = b.value();
    if (!detail::is_suffix(X.shape(), Bv.shape())) detail::shape_error("add_broadcast", X.shape(), Bv.shape());
    const std::size_t inner = Bv.size(), outer = X.size() / inner;
    Tensor out = X;
    out.matrix(outer).rowwise() += Bv.matrix(1).row(0);
    const auto ix = x.id(), ib = b.id();
    return x.tape().record(std::move(out), {x, b}, [ix, ib, outer](Tape& t, const Tensor& g) {
        t.accumulate(ix, g);
        if (t.requires_grad(ib)) t.grad_buffer(ib).matrix(1).row(0) += g.matrix(outer).colwise().sum();
    });
}

/// x * w elementwise, w broadcast over the leading dims of x.
inline Var mul_broadcast(Var x, Var w) {
    const auto &X = x.value(), &W = w.value();
    if (!detail::is_suffix(X.shape(), W.shape())) detail::shape_error("mul_broadcast", X.shape(), W.shape());
    const std::size_t inner = W.size(), outer = X.size() / inner;
    Tensor out = X;
    out.matrix(outer).array().rowwise() *= W.matrix(1).row(0).array();
    const auto ix = x.id(), iw = w.id();
    return x.tape().record(std::move(out), {x, w}, [ix, iw, outer](Tape& t, const Tensor& g) {
        if (t.requires_grad(ix))
            t.grad_buffer(ix).matrix(outer).array() += g.matrix(outer).array().rowwise() * t.value(iw).matrix(1).row(0).array();
        if (t.requires_grad(iw))
            t.grad_buffer(iw).matrix(1).row(0) +=
                (g.matrix(outer).array() * t.value(ix).matrix(outer).array()).colwise().sum().matrix();
    });
}

/// x + b for x [A, M, C] and b [A, C]: the bias is shared across the middle axis.
inline Var add_broadcast_mid(Var x, Var b) {
    const auto &X = x.value(), &Bv = b.value();
    detail::require_rank("add_broadcast_mid", X, 3);
    if (Bv.shape() != Shape{X.dim(0), X.dim(2)}) detail::shape_error("add_broadcast_mid", X.shape(), Bv.shape());
    const std::size_t A = X.dim(0), M = X.dim(1), C = X.dim(2);
    Tensor out = X;
    for (std::size_t a = 0; a < A; ++a)
        MatrixMap(out.data() + a * M * C, static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(C)).rowwise() +=
            Eigen::Map<const Eigen::RowVectorXd>(Bv.data() + a * C, static_cast<Eigen::Index>(C));
    const auto ix = x.id(), ib = b.id();
    return x.tape().record(std::move(out), {x, b}, [ix, ib, A, M, C](Tape& t, const Tensor& g) {
        t.accumulate(ix, g);
        if (!t.requires_grad(ib)) return;
        double* db = t.grad_buffer(ib).data();
        for (std::size_t a = 0; a < A; ++a)
            Eigen::Map<Eigen::RowVectorXd>(db + a * C, static_cast<Eigen::Index>(C)) +=
                ConstMatrixMap(g.data() + a * M * C, static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(C)).colwise().sum();
    });
}

/// x + c for a constant scalar c.
inline Var add_scalar(Var x, double c) {
    Tensor out = x.value();
    out.array() += c;
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& g) { t.accumulate(ix, g); });
}

inline Var scale(Var x, double c) {
    Tensor out = x.value();
    out.array() *= c;
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix, c](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).array() += c * g.array();
    });
}

inline Var sigmoid(Var x) {
    Tensor out = x.value();
    out.array() = 1.0 / (1.0 + (-out.array()).exp());
    const auto ix = x.id(), self = x.tape().size();
    return x.tape().record(std::move(out), {x}, [ix, self](Tape& t, const Tensor& g) {
        const auto y = t.value(self).array();
        t.grad_buffer(ix).array() += g.array() * y * (1.0 - y);
    });
}

/// max(x, 0); the subgradient at 0 is 0.
inline Var relu(Var x) {
    Tensor out = x.value();
    out.array() = out.array().max(0.0);
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).array() += (t.value(ix).array() > 0.0).select(g.array(), 0.0);
    });
}

/// Softmax over the last axis.
inline Var row_softmax(Var x) {
    const auto& X = x.value();
    if (X.rank() < 1) throw ValidationError("row_softmax: needs rank >= 1");
    const std::size_t cols = X.shape().back(), rows = X.size() / std::max<std::size_t>(cols, 1);
    Tensor out = X;
    auto m = out.matrix(rows);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r).array();
        row = (row - row.maxCoeff()).exp();
        row /= row.sum();
    }
    const auto ix = x.id(), self = x.tape().size();
    return x.tape().record(std::move(out), {x}, [ix, self, rows](Tape& t, const Tensor& g) {
        auto y = t.value(self).matrix(rows).array();
        auto gy = g.matrix(rows).array();
        Eigen::ArrayXd dot = (gy * y).rowwise().sum();
        t.grad_buffer(ix).matrix(rows).array() += y * (gy.colwise() - dot);
    });
}

/// Depthwise convolution along time with zero "same" padding.
/// x: [R, T, C], kernel: [k, C] with k odd; y[r,t,c] = sum_j kernel[j,c] x[r, t + j - k/2, c].
inline Var conv1d_time(Var x, Var kernel) {
    const auto &X = x.value(), &K = kernel.value();
    detail::require_rank("conv1d_time", X, 3);
    detail::require_rank("conv1d_time", K, 2);
    if (K.dim(1) != X.dim(2) || K.dim(0) % 2 == 0) detail::shape_error("conv1d_time", X.shape(), K.shape());
    const std::size_t R = X.dim(0), T = X.dim(1), C = X.dim(2), k = K.dim(0);
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    Tensor out(X.shape());
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t t = 0; t < T; ++t) {
            Eigen::Map<Eigen::ArrayXd> y(out.data() + (r * T + t) * C, static_cast<Eigen::Index>(C));
            for (std::size_t j = 0; j < k; ++j) {
                const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                y += Eigen::Map<const Eigen::ArrayXd>(K.data() + j * C, static_cast<Eigen::Index>(C)) *
                     Eigen::Map<const Eigen::ArrayXd>(X.data() + (r * T + static_cast<std::size_t>(src)) * C,
                                                      static_cast<Eigen::Index>(C));
            }
        }
    const auto ix = x.id(), ik = kernel.id();
    return x.tape().record(std::move(out), {x, kernel}, [ix, ik, R, T, C, k, half](Tape& tp, const Tensor& g) {
        const bool gx = tp.requires_grad(ix), gk = tp.requires_grad(ik);
        double* dx = gx ? tp.grad_buffer(ix).data() : nullptr;
        double* dk = gk ? tp.grad_buffer(ik).data() : nullptr;
        const double* xv = tp.value(ix).data();
        const double* kv = tp.value(ik).data();
        const auto Ci = static_cast<Eigen::Index>(C);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t t = 0; t < T; ++t) {
                Eigen::Map<const Eigen::ArrayXd> gy(g.data() + (r * T + t) * C, Ci);
                for (std::size_t j = 0; j < k; ++j) {
                    const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                    const std::size_t off = (r * T + static_cast<std::size_t>(src)) * C;
                    if (gx) Eigen::Map<Eigen::ArrayXd>(dx + off, Ci) += gy * Eigen::Map<const Eigen::ArrayXd>(kv + j * C, Ci);
                    if (gk) Eigen::Map<Eigen::ArrayXd>(dk + j * C, Ci) += gy * Eigen::Map<const Eigen::ArrayXd>(xv + off, Ci);
                }
            }
    });
}

inline Var reshape(Var x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).array() += g.array();
    });
}

/// Reorders axes: output axis i is input axis axes[i].
inline Var permute(Var x, std::vector<std::size_t> axes) {
    const auto r = x.value().rank();
    {
        std::vector<std::size_t> sorted = axes;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (sorted[i] != i || sorted.size() != r)
                throw ValidationError("permute: invalid axes for shape " + to_string(x.shape()));
    }
    Tensor out = detail::permute_values(x.value(), axes);
    std::vector<std::size_t> inverse(r);
    for (std::size_t i = 0; i < r; ++i) inverse[axes[i]] = i;
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix, inverse](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).array() += detail::permute_values(g, inverse).array();
    });
}

inline Var transpose(Var x) {
    detail::require_rank("transpose", x.value(), 2);
    return permute(x, {1, 0});
}

/// Concatenates along the last axis; all leading dims must match.
inline Var concat_last(const std::vector<Var>& parts) {
    if (parts.empty()) throw ValidationError("concat_last: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        Shape l = p.shape();
        if (l.empty()) throw ValidationError("concat_last: scalar input");
        widths.push_back(l.back());
        total += l.back();
        l.pop_back();
        if (l != lead) detail::shape_error("concat_last", parts[0].shape(), p.shape());
    }
    const std::size_t rows = element_count(lead);
    Shape out_shape = lead;
    out_shape.push_back(total);
    Tensor out(out_shape);
    std::size_t col = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        out.matrix(rows).middleCols(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(widths[p])) =
            parts[p].value().matrix(rows);
        col += widths[p];
    }
    std::vector<std::size_t> ids;
    for (const auto& p : parts) ids.push_back(p.id());
    return parts[0].tape().record(std::move(out), parts, [ids, widths, rows](Tape& t, const Tensor& g) {
        std::size_t c = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (t.requires_grad(ids[p]))
                t.grad_buffer(ids[p]).matrix(rows) +=
                    g.matrix(rows).middleCols(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(widths[p]));
            c += widths[p];
        }
    });
}

/// Sums out one axis.
inline Var reduce_sum(Var x, std::size_t axis) {
    const auto& X = x.value();
    if (axis >= X.rank()) throw ValidationError("reduce_sum: axis out of range for shape " + to_string(X.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= X.dim(i);
    for (std::size_t i = axis + 1; i < X.rank(); ++i) inner *= X.dim(i);
    const std::size_t n = X.dim(axis);
    Shape out_shape = X.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor out(out_shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < n; ++j)
            Eigen::Map<Eigen::ArrayXd>(out.data() + o * inner, static_cast<Eigen::Index>(inner)) +=
                Eigen::Map<const Eigen::ArrayXd>(X.data() + (o * n + j) * inner, static_cast<Eigen::Index>(inner));
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix, outer, inner, n](Tape& t, const Tensor& g) {
        double* dx = t.grad_buffer(ix).data();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < n; ++j)
                Eigen::Map<Eigen::ArrayXd>(dx + (o * n + j) * inner, static_cast<Eigen::Index>(inner)) +=
                    Eigen::Map<const Eigen::ArrayXd>(g.data() + o * inner, static_cast<Eigen::Index>(inner));
    });
}

/// Sum of all elements -> scalar.
inline Var sum(Var x) {
    Tensor out = Tensor::scalar(x.value().array().sum());
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).array() += g.item();
    });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

/// sum |x|; subgradient sign(0) = 0.
inline Var l1_norm(Var x) {
    Tensor out = Tensor::scalar(x.value().array().abs().sum());
    const auto ix = x.id();
    return x.tape().record(std::move(out), {x}, [ix](Tape& t, const Tensor& g) {
        t.grad_buffer(ix).array() += g.item() * t.value(ix).array().sign();
    });
}

/// Euclidean norm of all elements; gradient x/||x|| (zero at the origin).
inline Var l2_norm(Var x) {
    const double nrm = std::sqrt(x.value().array().square().sum());
    const auto ix = x.id();
    return x.tape().record(Tensor::scalar(nrm), {x}, [ix, nrm](Tape& t, const Tensor& g) {
        if (nrm > 0.0) t.grad_buffer(ix).array() += (g.item() / nrm) * t.value(ix).array();
    });
}

/// Euclidean norm of each row of a [R, D] tensor -> [R].
inline Var row_l2_norm(Var x) {
    const auto& X = x.value();
    detail::require_rank("row_l2_norm", X, 2);
    const std::size_t R = X.dim(0);
    Tensor out({R});
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(R)) = X.matrix(R).rowwise().norm();
    const auto ix = x.id(), self = x.tape().size();
    return x.tape().record(std::move(out), {x}, [ix, self, R](Tape& t, const Tensor& g) {
        const auto& n = t.value(self);
        auto dx = t.grad_buffer(ix).matrix(R);
        const auto xv = t.value(ix).matrix(R);
        for (std::size_t r = 0; r < R; ++r)
            if (n[r] > 0.0) dx.row(static_cast<Eigen::Index>(r)) += (g[r] / n[r]) * xv.row(static_cast<Eigen::Index>(r));
    });
}

/// Mean softmax cross-entropy of logits [M, C] against integer class labels,
/// computed with a max-shifted log-sum-exp.
inline Var cross_entropy(Var logits, const std::vector<int>& labels) {
    const auto& L = logits.value();
    detail::require_rank("cross_entropy", L, 2);
    const std::size_t M = L.dim(0), C = L.dim(1);
    if (labels.size() != M)
        throw ValidationError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(M) + " rows");
    Tensor probs({M, C});
    double total = 0.0;
    auto lm = L.matrix(M);
    auto pm = probs.matrix(M);
    for (std::size_t r = 0; r < M; ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= C) throw ValidationError("cross_entropy: label out of range");
        const double mx = lm.row(ri).maxCoeff();
        pm.row(ri) = (lm.row(ri).array() - mx).exp().matrix();
        const double z = pm.row(ri).sum();
        pm.row(ri) /= z;
        total += mx + std::log(z) - lm(ri, labels[r]);
    }
    const auto il = logits.id();
    return logits.tape().record(Tensor::scalar(total / static_cast<double>(M)), {logits},
                                [il, probs = std::move(probs), labels, M](Tape& t, const Tensor& g) {
                                    Tensor d = probs;
                                    auto dm = d.matrix(M);
                                    for (std::size_t r = 0; r < M; ++r) dm(static_cast<Eigen::Index>(r), labels[r]) -= 1.0;
                                    t.grad_buffer(il).array() += (g.item() / static_cast<double>(M)) * d.array();
                                });
}

}  // namespace lmpcast::ad
