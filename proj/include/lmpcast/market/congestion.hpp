#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lmpcast/market/bids.hpp"
#include "lmpcast/market/dcopf.hpp"
#include "lmpcast/market/loads.hpp"

namespace lmpcast::market {

struct BidSettings {
    std::uint64_t seed = 0;
    bool noise_on = true;
};

struct CongestionSelection {
    std::vector<MonitoredLine> lines;      // ranked, strongest first
    std::vector<double> mean_abs_flow;     // per edge, over the sampled hours
    std::vector<double> std_abs_flow;      // per edge
    std::vector<std::size_t> sample_hours;
    std::vector<DispatchRecord> samples;   // unconstrained dispatches, one per sampled hour
};

inline std::vector<std::size_t> evenly_spaced_hours(std::size_t hours, std::size_t samples) {
    std::vector<std::size_t> out;
    if (samples == 0 || samples >= hours) {
        out.resize(hours);
        std::iota(out.begin(), out.end(), std::size_t{0});
        return out;
    }
    for (std::size_t j = 0; j < samples; ++j) out.push_back(j * hours / samples);
    return out;
}

/// Ranks edges by mean |flow| over unconstrained dispatches of sampled hours and
/// returns the top `count` with limits at `fraction` of (mean + std) |flow|.
/// Bridges rank after every meshed edge: a limit on a radial line cannot be relieved
/// by redispatch, so they are only chosen when too few meshed edges exist.
inline CongestionSelection select_congested_lines(const grid::GridGraph& g, const grid::PtdfMatrix& ptdf,
                                                  const LoadMatrix& loads, const BidSettings& bids, std::size_t count,
                                                  double fraction = 0.7, std::size_t sample_count = 200) {
    CongestionSelection sel;
    const std::size_t ne = g.edge_count();
    sel.mean_abs_flow.assign(ne, 0.0);
    sel.std_abs_flow.assign(ne, 0.0);
    if (count == 0) return sel;
    if (!(fraction > 0.0)) throw ValidationError("congestion limit fraction must be positive");

    sel.sample_hours = evenly_spaced_hours(static_cast<std::size_t>(loads.hours()), sample_count);
    std::vector<MonitoredLine> all;  // monitor nothing, but report flows on every edge
    Eigen::MatrixXd abs_flows(static_cast<Eigen::Index>(sel.sample_hours.size()), static_cast<Eigen::Index>(ne));
    for (std::size_t j = 0; j < sel.sample_hours.size(); ++j) {
        const auto h = sel.sample_hours[j];
        Eigen::VectorXd d = loads.values.row(static_cast<Eigen::Index>(h)).transpose();
        auto curve = hourly_bids(g, d.sum(), bids.seed, h, bids.noise_on);
        auto rec = solve_dcopf(g, ptdf, d, curve, {});
        if (rec.status != DispatchStatus::Optimal)
            throw SolverError("unconstrained dispatch failed at hour " + std::to_string(h) + ": " + rec.detail);
        rec.hour = h;
        abs_flows.row(static_cast<Eigen::Index>(j)) = ptdf.flows(nodal_injection(g, rec.generation, d)).cwiseAbs().transpose();
        sel.samples.push_back(std::move(rec));
    }
    const double n = static_cast<double>(sel.sample_hours.size());
    for (std::size_t k = 0; k < ne; ++k) {
        auto col = abs_flows.col(static_cast<Eigen::Index>(k));
        const double mean = col.mean();
        sel.mean_abs_flow[k] = mean;
        sel.std_abs_flow[k] = std::sqrt((col.array() - mean).square().sum() / n);
    }

    std::vector<char> is_bridge(ne, 0);
    for (auto k : grid::bridge_edges(g)) is_bridge[k] = 1;
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < ne; ++k)
        if (sel.mean_abs_flow[k] > 0.0) order.push_back(k);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (is_bridge[a] != is_bridge[b]) return is_bridge[a] < is_bridge[b];
        return sel.mean_abs_flow[a] > sel.mean_abs_flow[b];
    });
    for (std::size_t i = 0; i < std::min(count, order.size()); ++i) {
        const auto k = order[i];
        sel.lines.push_back({k, fraction * (sel.mean_abs_flow[k] + sel.std_abs_flow[k])});
    }
    return sel;
}

}  // namespace lmpcast::market
