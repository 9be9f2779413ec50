#pragma once

#include <filesystem>

#include "lmpcast/common/csv.hpp"
#include "lmpcast/grid/grid_graph.hpp"

namespace lmpcast::grid {

/// Reads a case directory holding nodes.csv, edges.csv, generators.csv and meta.csv.
inline GridGraph load_case(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ValidationError("case directory not found: " + dir.string());
    GridGraph g;

    auto nodes = csv::read(dir / "nodes.csv");
    auto id_col = nodes.column("node_id");
    for (std::size_t r = 0; r < nodes.rows.size(); ++r) g.node_ids.push_back(csv::parse_int(nodes, r, id_col));
    {
        std::set<long long> ids(g.node_ids.begin(), g.node_ids.end());
        if (ids.size() != g.node_ids.size()) throw ValidationError(nodes.source + ": duplicate node id");
    }
    auto lookup = [&](const csv::Table& t, std::size_t row, std::size_t col) {
        auto label = csv::parse_int(t, row, col);
        auto it = std::find(g.node_ids.begin(), g.node_ids.end(), label);
        if (it == g.node_ids.end())
            throw ParseError(t.source, t.line_numbers[row], "unknown node id " + std::to_string(label));
        return static_cast<std::size_t>(it - g.node_ids.begin());
    };

    auto edges = csv::read(dir / "edges.csv");
    auto c_from = edges.column("from"), c_to = edges.column("to");
    auto c_b = edges.column("susceptance_pu"), c_lim = edges.column("flow_limit_mw");
    for (std::size_t r = 0; r < edges.rows.size(); ++r) {
        Edge e;
        e.from = lookup(edges, r, c_from);
        e.to = lookup(edges, r, c_to);
        e.susceptance = csv::parse_double(edges, r, c_b);
        e.flow_limit_mw = csv::parse_optional_double(edges, r, c_lim);
        g.edges.push_back(e);
    }

    auto gens = csv::read(dir / "generators.csv");
    auto c_node = gens.column("node"), c_min = gens.column("g_min_mw"), c_max = gens.column("g_max_mw");
    auto c_c2 = gens.column("c20"), c_c1 = gens.column("c10");
    for (std::size_t r = 0; r < gens.rows.size(); ++r) {
        Generator gen;
        gen.node = lookup(gens, r, c_node);
        gen.g_min_mw = csv::parse_double(gens, r, c_min);
        gen.g_max_mw = csv::parse_double(gens, r, c_max);
        gen.c20 = csv::parse_double(gens, r, c_c2);
        gen.c10 = csv::parse_double(gens, r, c_c1);
        g.generators.push_back(gen);
    }

    auto meta = csv::read(dir / "meta.csv");
    if (meta.rows.size() != 1) throw ParseError(meta.source, 2, "expected exactly one row");
    g.slack_node = lookup(meta, 0, meta.column("slack_node"));

    validate(g);
    return g;
}

}  // namespace lmpcast::grid
