#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "lmpcast/common/csv.hpp"
#include "lmpcast/common/random.hpp"

namespace lmpcast::market {

/// Hourly nodal loads in MW, one row per hour and one column per node.
struct LoadMatrix {
    Eigen::MatrixXd values;

    Eigen::Index hours() const { return values.rows(); }
    Eigen::Index nodes() const { return values.cols(); }
};

/// Row-stochastic mixing weights from source zones to synthetic nodes, plus the
/// additive Gaussian noise scale (MW).
struct DirichletMixer {
    Eigen::MatrixXd weights;  // n_target x n_source
    double noise_scale = 0.0;
};

inline DirichletMixer synthesize_weights(std::size_t n_target, std::size_t n_source, double concentration,
                                         std::uint64_t seed, double noise_scale = 0.0) {
    if (n_source < 1) throw ValidationError("synthesize_weights: need at least one source zone");
    if (!(concentration > 0.0)) throw ValidationError("synthesize_weights: concentration must be positive");
    if (noise_scale < 0.0) throw ValidationError("synthesize_weights: noise scale must be nonnegative");
    Rng rng = make_rng(seed, {stream::dirichlet});
    std::gamma_distribution<double> gamma(concentration, 1.0);
    DirichletMixer mixer;
    mixer.noise_scale = noise_scale;
    mixer.weights.resize(static_cast<Eigen::Index>(n_target), static_cast<Eigen::Index>(n_source));
    for (Eigen::Index r = 0; r < mixer.weights.rows(); ++r) {
        double total = 0.0;
        for (Eigen::Index c = 0; c < mixer.weights.cols(); ++c) total += (mixer.weights(r, c) = gamma(rng));
        if (!(total > 0.0)) {  // every draw underflowed; fall back to the simplex centre
            mixer.weights.row(r).setConstant(1.0 / static_cast<double>(n_source));
            continue;
        }
        mixer.weights.row(r) /= total;
    }
    return mixer;
}

/// Column placement: source zone z feeds node source_nodes[z]; the remaining nodes,
/// in increasing index order, receive the synthetic rows of the mixer.
struct NodeMap {
    std::vector<std::size_t> source_nodes;
    std::size_t node_count = 0;

    std::vector<std::size_t> synthetic_nodes() const {
        std::vector<char> is_source(node_count, 0);
        for (auto n : source_nodes) is_source.at(n) = 1;
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < node_count; ++i)
            if (!is_source[i]) out.push_back(i);
        return out;
    }
};

/// Default placement: zones spread evenly across node indices.
inline NodeMap default_node_map(std::size_t node_count, std::size_t zones) {
    zones = std::min(zones, node_count);
    NodeMap map;
    map.node_count = node_count;
    for (std::size_t z = 0; z < zones; ++z) map.source_nodes.push_back(z * node_count / zones);
    return map;
}

/// Synthetic loads d~_t = W d_t + alpha N(0,1), clipped at zero and interleaved with
/// the source columns according to `map`. Noise for hour t uses its own stream.
inline LoadMatrix synthesize_loads(const DirichletMixer& mixer, const Eigen::MatrixXd& source_loads, std::uint64_t seed,
                                   const NodeMap& map) {
    if (source_loads.cols() != mixer.weights.cols())
        throw ValidationError("synthesize_loads: source has " + std::to_string(source_loads.cols()) +
                              " columns, mixer expects " + std::to_string(mixer.weights.cols()));
    if (static_cast<Eigen::Index>(map.source_nodes.size()) != source_loads.cols())
        throw ValidationError("synthesize_loads: node map does not match source zone count");
    auto targets = map.synthetic_nodes();
    if (static_cast<Eigen::Index>(targets.size()) != mixer.weights.rows())
        throw ValidationError("synthesize_loads: node map does not match mixer target count");
    if ((source_loads.array() < 0.0).any()) throw ValidationError("synthesize_loads: source loads must be nonnegative");

    LoadMatrix out;
    out.values.resize(source_loads.rows(), static_cast<Eigen::Index>(map.node_count));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index t = 0; t < source_loads.rows(); ++t) {
        for (std::size_t z = 0; z < map.source_nodes.size(); ++z)
            out.values(t, static_cast<Eigen::Index>(map.source_nodes[z])) = source_loads(t, static_cast<Eigen::Index>(z));
        // W d = m + W (d - m 1) for row-stochastic W; with m = min(d), equal zone loads
        // reproduce exactly and the mix never drops below the smallest zone.
        const double lowest = source_loads.row(t).minCoeff();
        Eigen::VectorXd mixed = mixer.weights * (source_loads.row(t).transpose().array() - lowest).matrix();
        mixed.array() += lowest;
        Rng rng = make_rng(seed, {stream::load_noise, static_cast<std::uint64_t>(t)});
        for (std::size_t r = 0; r < targets.size(); ++r) {
            double v = mixed(static_cast<Eigen::Index>(r));
            if (mixer.noise_scale > 0.0) v += mixer.noise_scale * normal(rng);
            out.values(t, static_cast<Eigen::Index>(targets[r])) = std::max(v, 0.0);
        }
    }
    return out;
}

/// Parameters of the synthetic zone-load generator used when no market CSV is available.
struct SyntheticSourceConfig {
    std::size_t zones = 26;
    std::size_t hours = 24;
    double base_mw = 36.0;           // mean zone base load
    double base_spread = 0.4;        // zone bases uniform in base_mw * [1 - spread, 1 + spread]
    double daily_amplitude = 0.15;
    double weekly_amplitude = 0.06;
    double annual_amplitude = 0.10;
    double noise = 0.03;             // multiplicative, standard deviation
    std::uint64_t seed = 0;
};

/// Daily + weekly + annual sinusoids with multiplicative Gaussian noise.
inline Eigen::MatrixXd synthetic_source_loads(const SyntheticSourceConfig& cfg) {
    if (cfg.zones < 1) throw ValidationError("synthetic source: need at least one zone");
    if (cfg.base_mw < 0.0) throw ValidationError("synthetic source: base load must be nonnegative");
    Rng zone_rng = make_rng(cfg.seed, {stream::source_loads});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> base(cfg.zones), phase(cfg.zones);
    for (std::size_t z = 0; z < cfg.zones; ++z) {
        base[z] = cfg.base_mw * (1.0 - cfg.base_spread + 2.0 * cfg.base_spread * unit(zone_rng));
        phase[z] = 2.0 * unit(zone_rng) - 1.0;  // hours
    }
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(cfg.hours), static_cast<Eigen::Index>(cfg.zones));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t h = 0; h < cfg.hours; ++h) {
        Rng rng = make_rng(cfg.seed, {stream::source_loads, 1 + h});
        const double t = static_cast<double>(h);
        for (std::size_t z = 0; z < cfg.zones; ++z) {
            const double shape = 1.0 + cfg.daily_amplitude * std::sin(two_pi * (t - 9.0 - phase[z]) / 24.0) +
                                 cfg.weekly_amplitude * std::cos(two_pi * t / 168.0) +
                                 cfg.annual_amplitude * std::cos(two_pi * (t - 4800.0) / 8760.0);
            const double noise = cfg.noise > 0.0 ? 1.0 + cfg.noise * normal(rng) : 1.0;
            out(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(z)) = std::max(0.0, base[z] * shape * noise);
        }
    }
    return out;
}

/// Reads zone loads from CSV: optional `hour` column plus one column per zone.
/// Hours must be consecutive from 0; gaps and negative values are rejected.
inline Eigen::MatrixXd csv_source_loads(const std::filesystem::path& path, std::size_t expected_zones = 0) {
    auto table = csv::read(path);
    std::vector<std::size_t> zone_cols;
    std::optional<std::size_t> hour_col;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (table.header[c] == "hour")
            hour_col = c;
        else
            zone_cols.push_back(c);
    }
    if (expected_zones && zone_cols.size() != expected_zones)
        throw ValidationError(table.source + ": expected " + std::to_string(expected_zones) + " zone columns, found " +
                              std::to_string(zone_cols.size()));
    if (hour_col) {
        std::vector<long long> hours;
        for (std::size_t r = 0; r < table.rows.size(); ++r) hours.push_back(csv::parse_int(table, r, *hour_col));
        std::vector<long long> sorted = hours;
        std::sort(sorted.begin(), sorted.end());
        std::ostringstream gaps;
        std::size_t gap_count = 0;
        long long expect = 0;
        for (auto h : sorted) {
            if (h < expect) throw ValidationError(table.source + ": duplicate hour " + std::to_string(h));
            if (h > expect) {
                gaps << (gap_count++ ? ", " : "") << expect;
                if (h - 1 > expect) gaps << "-" << h - 1;
            }
            expect = h + 1;
        }
        if (gap_count) throw ValidationError(table.source + ": missing hours " + gaps.str());
        if (hours != sorted) throw ValidationError(table.source + ": hours are not in increasing order");
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(zone_cols.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (std::size_t z = 0; z < zone_cols.size(); ++z) {
            const double v = csv::parse_double(table, r, zone_cols[z]);
            if (v < 0.0) throw ParseError(table.source, table.line_numbers[r], "negative load " + table.rows[r][zone_cols[z]]);
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(z)) = v;
        }
    return out;
}

}  // namespace lmpcast::market
