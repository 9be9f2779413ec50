#pragma once

#include <algorithm>
#include <random>

#include "lmpcast/common/random.hpp"
#include "lmpcast/grid/grid_graph.hpp"
#include "lmpcast/market/dcopf.hpp"

namespace lmpcast::market {

inline constexpr double kMinQuadraticBid = 1e-4;

struct BidPair {
    double c2 = 0.0;
    double c1 = 0.0;
};

/// Load-dependent quadratic bid coefficients:
///   c2 = (D/1000) c20 + 0.001 N(0,1),   c1 = (0.5 + D/50000) c10 + 0.5 N(0,1),
/// where D is total system load, floored at c2 >= 1e-4 and c1 >= 0.
/// `rng == nullptr` disables the noise terms.
inline BidPair bid_coefficients(double total_load, double c20, double c10, Rng* rng) {
    if (total_load < 0.0) throw ValidationError("bid_coefficients: total load must be nonnegative");
    double n2 = 0.0, n1 = 0.0;
    if (rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        n2 = normal(*rng);
        n1 = normal(*rng);
    }
    BidPair b;
    b.c2 = std::max(total_load / 1000.0 * c20 + 0.001 * n2, kMinQuadraticBid);
    b.c1 = std::max((0.5 + total_load / 50000.0) * c10 + 0.5 * n1, 0.0);
    return b;
}

/// Bids of every generator for one hour, drawn from the hour's own stream.
inline BidCurve hourly_bids(const grid::GridGraph& g, double total_load, std::uint64_t seed, std::size_t hour,
                            bool noise_on) {
    Rng rng = make_rng(seed, {stream::bids, hour});
    BidCurve curve;
    const auto ng = static_cast<Eigen::Index>(g.generators.size());
    curve.c2.resize(ng);
    curve.c1.resize(ng);
    for (Eigen::Index i = 0; i < ng; ++i) {
        auto b = bid_coefficients(total_load, g.generators[i].c20, g.generators[i].c10, noise_on ? &rng : nullptr);
        curve.c2(i) = b.c2;
        curve.c1(i) = b.c1;
    }
    return curve;
}

}  // namespace lmpcast::market
