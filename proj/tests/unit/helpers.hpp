#pragma once

#include <filesystem>
#include <random>
#include <set>

#include "lmpcast/grid/grid_graph.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return LMPCAST_DATA_DIR; }
inline std::filesystem::path case_dir(const std::string& name) { return data_dir() / "cases" / name; }

/// Random connected graph: a random spanning tree plus extra edges.
inline lmpcast::grid::GridGraph random_graph(std::size_t n, std::mt19937_64& rng, double extra_prob = 0.3) {
    lmpcast::grid::GridGraph g;
    for (std::size_t i = 0; i < n; ++i) g.node_ids.push_back(static_cast<long long>(i));
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::uniform_real_distribution<double> u(0.5, 20.0);
    auto add = [&](std::size_t a, std::size_t b) {
        if (a > b) std::swap(a, b);
        if (a == b || !seen.insert({a, b}).second) return;
        g.edges.push_back({a, b, u(rng), std::nullopt});
    };
    for (std::size_t i = 1; i < n; ++i) add(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i);
    std::bernoulli_distribution extra(extra_prob);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (extra(rng)) add(i, j);
    g.generators.push_back({0, 0.0, 100.0, 0.01, 10.0});
    g.slack_node = 0;
    lmpcast::grid::validate(g);
    return g;
}

}  // namespace testutil

#include <fstream>
#include <string>

namespace testutil {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lmpcast_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
