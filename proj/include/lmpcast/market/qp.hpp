#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lmpcast::market {

/// Dense convex QP:  min 1/2 x'Qx + c'x  s.t.  A x = b,  G x <= h.
struct QpProblem {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;

    Eigen::Index n() const { return c.size(); }
    Eigen::Index n_eq() const { return b.size(); }
    Eigen::Index n_ineq() const { return h.size(); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter, NumericalError };

inline const char* to_string(QpStatus s) {
    switch (s) {
        case QpStatus::Optimal: return "optimal";
        case QpStatus::Infeasible: return "infeasible";
        case QpStatus::MaxIter: return "max_iter";
        case QpStatus::NumericalError: return "numerical_error";
    }
    return "unknown";
}

struct KktResiduals {
    double stationarity = 0.0;   // ||Qx + c + A'y + G'z||_inf
    double primal_eq = 0.0;      // ||Ax - b||_inf
    double primal_ineq = 0.0;    // max(Gx - h, 0)
    double dual = 0.0;           // max(-z, 0)
    double complementarity = 0.0;  // max |z_i (h - Gx)_i|

    double max() const { return std::max({stationarity, primal_eq, primal_ineq, dual, complementarity}); }
};

/// Multipliers follow the Lagrangian L = f(x) + y'(Ax - b) + z'(Gx - h), z >= 0.
struct QpSolution {
    QpStatus status = QpStatus::NumericalError;
    Eigen::VectorXd x, y, z;
    int iterations = 0;
    bool polished = false;
    KktResiduals residuals;
    std::string detail;
};

struct QpSettings {
    double tolerance = 1e-8;
    int max_iter = 200;
    double polish_tolerance = 1e-9;
};

inline KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& z) {
    KktResiduals r;
    Eigen::VectorXd grad = p.Q * x + p.c;
    if (p.n_eq() > 0) grad += p.A.transpose() * y;
    if (p.n_ineq() > 0) grad += p.G.transpose() * z;
    r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (p.n_eq() > 0) r.primal_eq = (p.A * x - p.b).cwiseAbs().maxCoeff();
    if (p.n_ineq() > 0) {
        Eigen::VectorXd slack = p.h - p.G * x;
        r.primal_ineq = std::max(0.0, -slack.minCoeff());
        r.dual = std::max(0.0, -z.minCoeff());
        r.complementarity = (z.array() * slack.array()).abs().maxCoeff();
    }
    return r;
}

namespace detail {

/// Re-solves the equality-constrained KKT system on the active set found by the
/// interior-point iterations. Returns false if the active set is rank deficient or
/// the resulting point violates a sign condition.
inline bool polish(const QpProblem& p, QpSolution& sol, double tol) {
    const auto n = p.n(), me = p.n_eq(), mi = p.n_ineq();
    Eigen::VectorXd slack = p.h - p.G * sol.x;
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < mi; ++i)
        if (sol.z(i) > slack(i)) active.push_back(i);
    const auto ma = static_cast<Eigen::Index>(active.size());
    const auto dim = n + me + ma;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs(dim);
    kkt.topLeftCorner(n, n) = p.Q;
    rhs.head(n) = -p.c;
    if (me > 0) {
        kkt.block(0, n, n, me) = p.A.transpose();
        kkt.block(n, 0, me, n) = p.A;
        rhs.segment(n, me) = p.b;
    }
    for (Eigen::Index a = 0; a < ma; ++a) {
        kkt.block(0, n + me + a, n, 1) = p.G.row(active[a]).transpose();
        kkt.block(n + me + a, 0, 1, n) = p.G.row(active[a]);
        rhs(n + me + a) = p.h(active[a]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (lu.rank() < dim) return false;
    Eigen::VectorXd w = lu.solve(rhs);
    Eigen::VectorXd x = w.head(n);
    Eigen::VectorXd y = w.segment(n, me);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(mi);
    for (Eigen::Index a = 0; a < ma; ++a) {
        const double za = w(n + me + a);
        if (za < -tol) return false;
        z(active[a]) = std::max(za, 0.0);
    }
    if (mi > 0 && (p.G * x - p.h).maxCoeff() > tol) return false;
    sol.x = x;
    sol.y = y;
    sol.z = z;
    sol.polished = true;
    return true;
}

}  // namespace detail

/// Primal-dual interior-point method with Mehrotra predictor-corrector steps,
/// followed by an active-set polish that yields exact complementarity.
inline QpSolution solve_qp(const QpProblem& p, const QpSettings& settings = {}) {
    const auto n = p.n(), me = p.n_eq(), mi = p.n_ineq();
    QpSolution sol;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
    Eigen::VectorXd s = Eigen::VectorXd::Ones(mi);
    Eigen::VectorXd z = Eigen::VectorXd::Ones(mi);

    // Initial point: solve the unconstrained-slack KKT system for x, then shift s, z positive.
    {
        const auto dim = n + me;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
        kkt.topLeftCorner(n, n) = p.Q;
        if (mi > 0) kkt.topLeftCorner(n, n) += p.G.transpose() * p.G;
        if (me > 0) {
            kkt.block(0, n, n, me) = p.A.transpose();
            kkt.block(n, 0, me, n) = p.A;
        }
        Eigen::VectorXd rhs(dim);
        rhs.head(n) = -p.c;
        if (mi > 0) rhs.head(n) += p.G.transpose() * p.h;
        if (me > 0) rhs.tail(me) = p.b;
        Eigen::VectorXd w = kkt.fullPivLu().solve(rhs);
        if (w.allFinite()) {
            x = w.head(n);
            y = w.tail(me);
        }
        if (mi > 0) {
            Eigen::VectorXd r = p.h - p.G * x;
            const double shift = std::max(0.0, -r.minCoeff()) + 1.0;
            s = r.array() + shift;
            const double scale = std::max(1.0, p.c.cwiseAbs().maxCoeff());
            z = Eigen::VectorXd::Constant(mi, scale);
        }
    }

    const double scale_d = 1.0 + (p.c.size() ? p.c.cwiseAbs().maxCoeff() : 0.0);
    const double scale_p = 1.0 + std::max(me ? p.b.cwiseAbs().maxCoeff() : 0.0, mi ? p.h.cwiseAbs().maxCoeff() : 0.0);

    auto solve_newton = [&](const Eigen::VectorXd& rd, const Eigen::VectorXd& rp, const Eigen::VectorXd& rg,
                            const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& ds,
                            Eigen::VectorXd& dz) -> bool {
        // Q dx + A'dy + G'dz = -rd ; A dx = -rp ; G dx + ds = -rg ; Z ds + S dz = -rc
        // Eliminate ds, dz:  dz = (Z/S)(G dx + rg) - rc/S
        const auto dim = n + me;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd rhs(dim);
        Eigen::VectorXd w = mi ? Eigen::VectorXd(z.cwiseQuotient(s)) : Eigen::VectorXd();
        kkt.topLeftCorner(n, n) = p.Q;
        if (mi > 0) kkt.topLeftCorner(n, n) += p.G.transpose() * w.asDiagonal() * p.G;
        rhs.head(n) = -rd;
        if (mi > 0) rhs.head(n) -= p.G.transpose() * (w.cwiseProduct(rg) - rc.cwiseQuotient(s));
        if (me > 0) {
            kkt.block(0, n, n, me) = p.A.transpose();
            kkt.block(n, 0, me, n) = p.A;
            rhs.tail(me) = -rp;
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
        Eigen::VectorXd sol_v = lu.solve(rhs);
        if (!sol_v.allFinite()) return false;
        dx = sol_v.head(n);
        dy = sol_v.tail(me);
        if (mi > 0) {
            dz = w.cwiseProduct(p.G * dx + rg) - rc.cwiseQuotient(s);
            ds = -rg - p.G * dx;
        }
        return true;
    };

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
        double alpha = 1.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
        return alpha;
    };

    sol.status = QpStatus::MaxIter;
    int it = 0;
    for (; it < settings.max_iter; ++it) {
        Eigen::VectorXd rd = p.Q * x + p.c;
        if (me > 0) rd += p.A.transpose() * y;
        if (mi > 0) rd += p.G.transpose() * z;
        Eigen::VectorXd rp = me ? Eigen::VectorXd(p.A * x - p.b) : Eigen::VectorXd();
        Eigen::VectorXd rg = mi ? Eigen::VectorXd(p.G * x + s - p.h) : Eigen::VectorXd();
        const double gap = mi ? s.dot(z) / static_cast<double>(mi) : 0.0;
        const double res_d = rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0;
        const double res_p = std::max(rp.size() ? rp.cwiseAbs().maxCoeff() : 0.0, rg.size() ? rg.cwiseAbs().maxCoeff() : 0.0);
        if (!std::isfinite(res_d) || !std::isfinite(res_p) || !std::isfinite(gap)) {
            sol.status = QpStatus::NumericalError;
            break;
        }
        if (res_d <= settings.tolerance * scale_d && res_p <= settings.tolerance * scale_p && gap <= settings.tolerance) {
            sol.status = QpStatus::Optimal;
            break;
        }
        // Dual variables growing without bound while primal residual stalls signals infeasibility.
        if (mi > 0 && z.maxCoeff() > 1e12 && res_p > 1e-6 * scale_p) {
            sol.status = QpStatus::Infeasible;
            break;
        }

        Eigen::VectorXd dx, dy, ds, dz;
        // Predictor (affine scaling).
        Eigen::VectorXd rc = mi ? Eigen::VectorXd(s.cwiseProduct(z)) : Eigen::VectorXd();
        if (!solve_newton(rd, rp, rg, rc, dx, dy, ds, dz)) {
            sol.status = QpStatus::NumericalError;
            break;
        }
        if (mi > 0) {
            const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
            const double gap_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(mi);
            const double sigma = std::pow(gap_aff / gap, 3);
            // Corrector: centering plus second-order term.
            Eigen::VectorXd rc2 = rc + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(mi, sigma * gap);
            if (!solve_newton(rd, rp, rg, rc2, dx, dy, ds, dz)) {
                sol.status = QpStatus::NumericalError;
                break;
            }
            const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
            x += alpha * dx;
            y += alpha * dy;
            s += alpha * ds;
            z += alpha * dz;
        } else {
            x += dx;
            y += dy;
        }
    }
    sol.iterations = it;
    sol.x = x;
    sol.y = y;
    sol.z = z;

    if (sol.status == QpStatus::Optimal || sol.status == QpStatus::MaxIter) {
        QpSolution trial = sol;
        if (detail::polish(p, trial, settings.polish_tolerance)) {
            auto res = kkt_residuals(p, trial.x, trial.y, trial.z);
            auto res_ipm = kkt_residuals(p, sol.x, sol.y, sol.z);
            if (res.max() <= res_ipm.max() || res.max() <= 1e-9) {
                trial.status = QpStatus::Optimal;
                sol = trial;
            }
        }
    }
    sol.residuals = kkt_residuals(p, sol.x, sol.y, sol.z);
    if (sol.status == QpStatus::MaxIter) sol.detail = "iteration cap reached";
    return sol;
}

}  // namespace lmpcast::market
