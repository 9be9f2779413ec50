#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <vector>

#include "lmpcast/grid/grid_graph.hpp"
#include "lmpcast/grid/ptdf.hpp"
#include "lmpcast/market/qp.hpp"

namespace lmpcast::market {

/// Per-generator quadratic bid for one hour: C(g) = c2 g^2 + c1 g.
struct BidCurve {
    Eigen::VectorXd c2;  // $/MWh^2
    Eigen::VectorXd c1;  // $/MWh
};

/// A transmission constraint |flow_edge| <= limit_mw.
struct MonitoredLine {
    std::size_t edge = 0;
    double limit_mw = 0.0;
};

enum class DispatchStatus { Optimal, Infeasible, MaxIter, NumericalError };

inline const char* to_string(DispatchStatus s) {
    switch (s) {
        case DispatchStatus::Optimal: return "optimal";
        case DispatchStatus::Infeasible: return "infeasible";
        case DispatchStatus::MaxIter: return "max_iter";
        case DispatchStatus::NumericalError: return "numerical_error";
    }
    return "unknown";
}

inline constexpr double kDualTolerance = 1e-6;

/// One solved market hour. `mu` holds one signed dual per monitored line so that
/// lmp_i = lambda + sum_k ptdf(line_k, i) * mu_k.
struct DispatchRecord {
    std::size_t hour = 0;
    Eigen::VectorXd generation;
    double lambda = 0.0;
    Eigen::VectorXd mu;
    int s = 0;
    Eigen::VectorXd lmp;
    Eigen::VectorXd line_flows;  // on monitored lines, MW
    DispatchStatus status = DispatchStatus::NumericalError;
    KktResiduals residuals;
    std::string detail;
};

/// Monitored-line rows of the PTDF.
inline Eigen::MatrixXd monitored_ptdf(const grid::PtdfMatrix& ptdf, const std::vector<MonitoredLine>& lines) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(lines.size()), ptdf.values.cols());
    for (std::size_t k = 0; k < lines.size(); ++k)
        rows.row(static_cast<Eigen::Index>(k)) = ptdf.values.row(static_cast<Eigen::Index>(lines[k].edge));
    return rows;
}

/// Builds the economic-dispatch QP. Variables are generator outputs; constraints
/// are power balance, generator bounds, and both directions of every monitored line.
inline QpProblem build_dcopf(const grid::GridGraph& g, const grid::PtdfMatrix& ptdf, const Eigen::VectorXd& loads,
                             const BidCurve& bids, const std::vector<MonitoredLine>& lines) {
    const auto ng = static_cast<Eigen::Index>(g.generators.size());
    const auto m = static_cast<Eigen::Index>(lines.size());
    QpProblem p;
    p.Q = Eigen::MatrixXd::Zero(ng, ng);
    p.Q.diagonal() = 2.0 * bids.c2;
    p.c = bids.c1;
    p.A = Eigen::MatrixXd::Ones(1, ng);
    p.b = Eigen::VectorXd::Constant(1, loads.sum());
    p.G = Eigen::MatrixXd::Zero(2 * ng + 2 * m, ng);
    p.h.resize(2 * ng + 2 * m);
    for (Eigen::Index i = 0; i < ng; ++i) {
        p.G(i, i) = -1.0;
        p.h(i) = -g.generators[i].g_min_mw;
        p.G(ng + i, i) = 1.0;
        p.h(ng + i) = g.generators[i].g_max_mw;
    }
    Eigen::MatrixXd rows = monitored_ptdf(ptdf, lines);
    Eigen::VectorXd load_flow = rows * loads;
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index i = 0; i < ng; ++i) {
            const double t = rows(k, static_cast<Eigen::Index>(g.generators[i].node));
            p.G(2 * ng + k, i) = t;
            p.G(2 * ng + m + k, i) = -t;
        }
        p.h(2 * ng + k) = lines[k].limit_mw + load_flow(k);
        p.h(2 * ng + m + k) = lines[k].limit_mw - load_flow(k);
    }
    return p;
}

inline Eigen::VectorXd nodal_injection(const grid::GridGraph& g, const Eigen::VectorXd& generation,
                                       const Eigen::VectorXd& loads) {
    Eigen::VectorXd inj = -loads;
    for (std::size_t i = 0; i < g.generators.size(); ++i)
        inj(static_cast<Eigen::Index>(g.generators[i].node)) += generation(static_cast<Eigen::Index>(i));
    return inj;
}

/// Solves one hour of DC-OPF and decomposes the duals into lambda, mu, s and nodal LMPs.
inline DispatchRecord solve_dcopf(const grid::GridGraph& g, const grid::PtdfMatrix& ptdf, const Eigen::VectorXd& loads,
                                  const BidCurve& bids, const std::vector<MonitoredLine>& lines,
                                  const QpSettings& settings = {}) {
    const auto ng = static_cast<Eigen::Index>(g.generators.size());
    const auto m = static_cast<Eigen::Index>(lines.size());
    DispatchRecord rec;
    Eigen::MatrixXd rows = monitored_ptdf(ptdf, lines);

    double g_lo = 0.0, g_hi = 0.0;
    for (const auto& gen : g.generators) {
        g_lo += gen.g_min_mw;
        g_hi += gen.g_max_mw;
    }
    const double demand = loads.sum();
    const double tol = 1e-9 * std::max(1.0, std::abs(demand));
    if (demand < g_lo - tol || demand > g_hi + tol) {
        std::ostringstream os;
        os << "power balance: demand " << demand << " MW outside generation range [" << g_lo << ", " << g_hi << "]";
        rec.status = DispatchStatus::Infeasible;
        rec.detail = os.str();
        return rec;
    }

    auto finish = [&](const Eigen::VectorXd& gen_out, double lambda, const Eigen::VectorXd& mu) {
        rec.generation = gen_out;
        rec.lambda = lambda;
        rec.mu = mu;
        rec.s = (m > 0 && mu.cwiseAbs().maxCoeff() > kDualTolerance) ? 1 : 0;
        rec.lmp = Eigen::VectorXd::Constant(loads.size(), lambda);
        if (m > 0) rec.lmp += rows.transpose() * mu;
        rec.line_flows = rows * nodal_injection(g, gen_out, loads);
    };

    // Demand pinned at a capacity bound: the feasible set is a single point and the
    // price is the marginal cost of the cheapest unit able to move.
    const bool at_min = std::abs(demand - g_lo) <= tol, at_max = std::abs(demand - g_hi) <= tol;
    if (at_min || at_max) {
        Eigen::VectorXd gen_out(ng);
        double lambda = at_min ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < ng; ++i) {
            const auto& gen = g.generators[i];
            gen_out(i) = at_min ? gen.g_min_mw : gen.g_max_mw;
            const double mc = 2.0 * bids.c2(i) * gen_out(i) + bids.c1(i);
            if (gen.g_max_mw > gen.g_min_mw) lambda = at_min ? std::min(lambda, mc) : std::max(lambda, mc);
        }
        if (!std::isfinite(lambda))  // every unit fixed
            lambda = (2.0 * bids.c2.cwiseProduct(gen_out) + bids.c1).minCoeff();
        finish(gen_out, lambda, Eigen::VectorXd::Zero(m));
        for (Eigen::Index k = 0; k < m; ++k)
            if (std::abs(rec.line_flows(k)) > lines[k].limit_mw + 1e-9) {
                rec.status = DispatchStatus::Infeasible;
                rec.detail = "line limit violated at pinned dispatch on edge " + std::to_string(lines[k].edge);
                return rec;
            }
        rec.status = DispatchStatus::Optimal;
        return rec;
    }

    QpProblem problem = build_dcopf(g, ptdf, loads, bids, lines);
    QpSolution sol = solve_qp(problem, settings);
    rec.residuals = sol.residuals;
    switch (sol.status) {
        case QpStatus::Optimal: rec.status = DispatchStatus::Optimal; break;
        case QpStatus::Infeasible: rec.status = DispatchStatus::Infeasible; break;
        case QpStatus::MaxIter: rec.status = DispatchStatus::MaxIter; break;
        case QpStatus::NumericalError: rec.status = DispatchStatus::NumericalError; break;
    }
    Eigen::VectorXd mu(m);
    for (Eigen::Index k = 0; k < m; ++k) mu(k) = sol.z(2 * ng + m + k) - sol.z(2 * ng + k);
    finish(sol.x, -sol.y(0), mu);

    if (rec.status == DispatchStatus::Optimal && sol.residuals.max() > 1e-6) {
        rec.status = DispatchStatus::NumericalError;
        rec.detail = "KKT residual " + std::to_string(sol.residuals.max()) + " exceeds 1e-6";
    } else if (rec.status == DispatchStatus::Infeasible) {
        std::ostringstream os;
        os << "line constraints infeasible; max violation " << sol.residuals.primal_ineq << " MW";
        rec.detail = os.str();
    } else if (rec.status != DispatchStatus::Optimal) {
        std::ostringstream os;
        os << to_string(sol.status) << " after " << sol.iterations << " iterations; KKT residual " << sol.residuals.max();
        rec.detail = os.str();
    }
    return rec;
}

}  // namespace lmpcast::market
