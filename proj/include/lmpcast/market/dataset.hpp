#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lmpcast/common/csv.hpp"
#include "lmpcast/grid/ptdf.hpp"
#include "lmpcast/market/congestion.hpp"

namespace lmpcast::market {

enum class SourceMode { Synthetic, Csv };

struct DatasetConfig {
    std::uint64_t seed = 0;
    std::size_t hours = 24 * 365 * 3;
    double alpha = 5.0;                    // MW, additive load noise
    double concentration = 1.0;            // symmetric Dirichlet parameter
    std::size_t zones = 26;
    std::vector<std::size_t> source_nodes; // empty = evenly spaced default
    SourceMode source = SourceMode::Synthetic;
    std::filesystem::path source_csv;
    double utilization = 0.42;             // mean load as a fraction of installed capacity
    std::optional<double> base_load_mw;    // synthetic zone base load; default from utilization
    SyntheticSourceConfig synthetic;       // zones/hours/seed/base_mw filled in from the fields above
    std::size_t congested_lines = 10;
    double limit_fraction = 0.7;
    std::size_t congestion_samples = 200;
    bool bid_noise = true;
    double train_fraction = 2.0 / 3.0;
    double max_failure_rate = 0.01;
    unsigned threads = 0;                  // 0 = LMPCAST_THREADS or hardware concurrency
};

struct DatasetSummary {
    std::size_t hours = 0;
    std::size_t solved = 0;
    std::size_t failures = 0;
    std::size_t congested_hours = 0;
    std::vector<MonitoredLine> monitored;
};

inline unsigned solver_threads(unsigned requested) {
    if (requested) return requested;
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LMPCAST_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Loads for every hour and node, from the configured source zones plus Dirichlet mixing.
inline LoadMatrix build_loads(const grid::GridGraph& g, const DatasetConfig& cfg, NodeMap* map_out = nullptr) {
    const std::size_t n = g.node_count();
    NodeMap map;
    if (cfg.source_nodes.empty()) {
        map = default_node_map(n, cfg.zones);
    } else {
        map.node_count = n;
        map.source_nodes = cfg.source_nodes;
        for (auto s : map.source_nodes)
            if (s >= n) throw ValidationError("source node index out of range");
    }
    Eigen::MatrixXd source;
    if (cfg.source == SourceMode::Csv) {
        source = csv_source_loads(cfg.source_csv, map.source_nodes.size());
        if (static_cast<std::size_t>(source.rows()) < cfg.hours)
            throw ValidationError("source CSV has " + std::to_string(source.rows()) + " hours, " + std::to_string(cfg.hours) +
                                  " requested");
        source.conservativeResize(static_cast<Eigen::Index>(cfg.hours), Eigen::NoChange);
    } else {
        SyntheticSourceConfig sc = cfg.synthetic;
        sc.zones = map.source_nodes.size();
        sc.hours = cfg.hours;
        sc.seed = cfg.seed;
        source = synthetic_source_loads(sc);
    }
    auto mixer = synthesize_weights(n - map.source_nodes.size(), map.source_nodes.size(), cfg.concentration, cfg.seed,
                                    cfg.alpha);
    if (map_out) *map_out = map;
    return synthesize_loads(mixer, source, cfg.seed, map);
}

/// Default synthetic base load per zone so that mean system load is `utilization` of capacity.
inline double default_base_load(const grid::GridGraph& g, double utilization) {
    double cap = 0.0;
    for (const auto& gen : g.generators) cap += gen.g_max_mw;
    return utilization * cap / static_cast<double>(g.node_count());
}

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline std::vector<std::string> node_header(const grid::GridGraph& g) {
    std::vector<std::string> h{"hour"};
    for (auto id : g.node_ids) h.push_back(std::to_string(id));
    return h;
}

}  // namespace detail

inline std::string line_name(const grid::GridGraph& g, std::size_t edge) {
    return "line_" + std::to_string(g.node_ids[g.edges[edge].from]) + "_" + std::to_string(g.node_ids[g.edges[edge].to]);
}

/// Solves every hour and writes the dataset directory. Hour solves run on worker
/// threads; each hour owns its random streams, so output does not depend on scheduling.
inline DatasetSummary generate_dataset(const grid::GridGraph& g, DatasetConfig cfg, const std::filesystem::path& out,
                                       const std::function<void(const std::string&)>& log = {}) {
    if (cfg.hours == 0) throw ValidationError("dataset needs at least one hour");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw ValidationError("train fraction must be in (0, 1)");
    cfg.synthetic.base_mw = cfg.base_load_mw.value_or(default_base_load(g, cfg.utilization));
    std::filesystem::create_directories(out);

    const auto ptdf = grid::ptdf(g);
    NodeMap map;
    const auto loads = build_loads(g, cfg, &map);
    const BidSettings bid_settings{cfg.seed, cfg.bid_noise};

    auto selection = select_congested_lines(g, ptdf, loads, bid_settings, cfg.congested_lines, cfg.limit_fraction,
                                            cfg.congestion_samples);
    std::vector<MonitoredLine> monitored = selection.lines;
    for (std::size_t k = 0; k < g.edge_count(); ++k) {
        if (!g.edges[k].flow_limit_mw) continue;
        auto it = std::find_if(monitored.begin(), monitored.end(), [&](const MonitoredLine& l) { return l.edge == k; });
        if (it == monitored.end())
            monitored.push_back({k, *g.edges[k].flow_limit_mw});
        else
            it->limit_mw = std::min(it->limit_mw, *g.edges[k].flow_limit_mw);
    }

    const std::size_t H = cfg.hours;
    std::vector<DispatchRecord> records(H);
    std::vector<BidCurve> bids(H);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t h = next++; h < H; h = next++) {
            Eigen::VectorXd d = loads.values.row(static_cast<Eigen::Index>(h)).transpose();
            bids[h] = hourly_bids(g, d.sum(), cfg.seed, h, cfg.bid_noise);
            records[h] = solve_dcopf(g, ptdf, d, bids[h], monitored);
            records[h].hour = h;
        }
    };
    const unsigned nthreads = std::min<unsigned>(solver_threads(cfg.threads), static_cast<unsigned>(H));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }

    DatasetSummary summary;
    summary.hours = H;
    summary.monitored = monitored;
    for (const auto& r : records) {
        if (r.status == DispatchStatus::Optimal) {
            ++summary.solved;
            summary.congested_hours += static_cast<std::size_t>(r.s);
        } else {
            ++summary.failures;
        }
    }

    {
        csv::Writer w(out / "failures.csv");
        w.header(std::vector<std::string>{"hour", "status", "detail"});
        for (const auto& r : records)
            if (r.status != DispatchStatus::Optimal) {
                std::string detail = r.detail;
                std::replace(detail.begin(), detail.end(), ',', ';');
                w.cell(r.hour).cell(to_string(r.status)).cell(detail).end_row();
            }
    }
    if (log && summary.failures) log(std::to_string(summary.failures) + " of " + std::to_string(H) + " hours failed to solve");
    if (static_cast<double>(summary.failures) > cfg.max_failure_rate * static_cast<double>(H)) {
        std::string first;
        for (const auto& r : records)
            if (r.status != DispatchStatus::Optimal) {
                first = "hour " + std::to_string(r.hour) + ": " + r.detail;
                break;
            }
        throw SolverError(std::to_string(summary.failures) + " of " + std::to_string(H) +
                          " hours failed (limit " + std::to_string(cfg.max_failure_rate * 100.0) + "%); first failure " + first);
    }

    {
        csv::Writer w(out / "loads.csv");
        w.header(detail::node_header(g));
        for (std::size_t h = 0; h < H; ++h) {
            w.cell(h);
            for (Eigen::Index i = 0; i < loads.nodes(); ++i) w.cell(loads.values(static_cast<Eigen::Index>(h), i));
            w.end_row();
        }
    }
    csv::Writer w_lambda(out / "lambda.csv"), w_mu(out / "mu.csv"), w_s(out / "s.csv"), w_lmp(out / "lmp.csv"),
        w_gen(out / "generation.csv"), w_bids(out / "bids.csv");
    w_lambda.header(std::vector<std::string>{"hour", "lambda"});
    w_s.header(std::vector<std::string>{"hour", "s"});
    w_lmp.header(detail::node_header(g));
    {
        std::vector<std::string> h{"hour"};
        for (const auto& l : monitored) h.push_back(line_name(g, l.edge));
        w_mu.header(h);
        std::vector<std::string> hg{"hour"}, hb{"hour"};
        for (std::size_t i = 0; i < g.generators.size(); ++i) {
            hg.push_back("gen_" + std::to_string(i));
            hb.push_back("c2_" + std::to_string(i));
            hb.push_back("c1_" + std::to_string(i));
        }
        w_gen.header(hg);
        w_bids.header(hb);
    }
    for (std::size_t h = 0; h < H; ++h) {
        const auto& r = records[h];
        if (r.status != DispatchStatus::Optimal) continue;
        w_lambda.cell(h).cell(r.lambda).end_row();
        w_s.cell(h).cell(r.s).end_row();
        w_mu.cell(h);
        for (Eigen::Index k = 0; k < r.mu.size(); ++k) w_mu.cell(r.mu(k));
        w_mu.end_row();
        w_lmp.cell(h);
        for (Eigen::Index i = 0; i < r.lmp.size(); ++i) w_lmp.cell(r.lmp(i));
        w_lmp.end_row();
        w_gen.cell(h);
        for (Eigen::Index i = 0; i < r.generation.size(); ++i) w_gen.cell(r.generation(i));
        w_gen.end_row();
        w_bids.cell(h);
        for (Eigen::Index i = 0; i < bids[h].c2.size(); ++i) w_bids.cell(bids[h].c2(i)).cell(bids[h].c1(i));
        w_bids.end_row();
    }

    const auto train_end = static_cast<std::size_t>(std::floor(static_cast<double>(H) * cfg.train_fraction));
    detail::write_json(out / "split.json", {{"train", {0, train_end}}, {"test", {train_end, H}}});

    nlohmann::json gc;
    gc["seed"] = cfg.seed;
    gc["hours"] = H;
    gc["alpha"] = cfg.alpha;
    gc["concentration"] = cfg.concentration;
    gc["source"] = cfg.source == SourceMode::Csv ? "csv" : "synthetic";
    if (cfg.source == SourceMode::Csv) gc["source_csv"] = cfg.source_csv.string();
    gc["source_nodes"] = nlohmann::json::array();
    for (auto s : map.source_nodes) gc["source_nodes"].push_back(g.node_ids[s]);
    gc["synthetic"] = {{"base_mw", cfg.synthetic.base_mw},
                       {"base_spread", cfg.synthetic.base_spread},
                       {"daily_amplitude", cfg.synthetic.daily_amplitude},
                       {"weekly_amplitude", cfg.synthetic.weekly_amplitude},
                       {"annual_amplitude", cfg.synthetic.annual_amplitude},
                       {"noise", cfg.synthetic.noise}};
    gc["utilization"] = cfg.utilization;
    gc["congested_lines"] = cfg.congested_lines;
    gc["limit_fraction"] = cfg.limit_fraction;
    gc["congestion_samples"] = cfg.congestion_samples;
    gc["bid_noise"] = cfg.bid_noise;
    gc["train_fraction"] = cfg.train_fraction;
    gc["slack_node"] = g.node_ids[g.slack_node];
    gc["monitored_lines"] = nlohmann::json::array();
    for (const auto& l : monitored)
        gc["monitored_lines"].push_back({{"edge", l.edge},
                                         {"from", g.node_ids[g.edges[l.edge].from]},
                                         {"to", g.node_ids[g.edges[l.edge].to]},
                                         {"limit_mw", l.limit_mw}});
    gc["solved_hours"] = summary.solved;
    gc["failed_hours"] = summary.failures;
    detail::write_json(out / "genconfig.json", gc);
    return summary;
}

/// In-memory view of a dataset directory, as consumed by training and evaluation.
struct Dataset {
    std::vector<long long> node_ids;
    Eigen::MatrixXd loads;                // all hours x N
    std::vector<std::size_t> target_hours;  // hours with a solved market record, increasing
    std::vector<double> lambda;           // per target hour
    std::vector<int> s;
    Eigen::MatrixXd lmp;                  // target hours x N
    Eigen::MatrixXd mu;                   // target hours x m (line duals)
    std::size_t train_begin = 0, train_end = 0, test_begin = 0, test_end = 0;
    nlohmann::json genconfig;
    std::filesystem::path dir;

    std::size_t node_count() const { return node_ids.size(); }
    /// Node congestion component LMP - lambda for target row r.
    Eigen::VectorXd congestion_component(std::size_t r) const {
        return lmp.row(static_cast<Eigen::Index>(r)).transpose().array() - lambda[r];
    }
};

inline Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.dir = dir;
    auto read_matrix = [](const csv::Table& t, std::vector<std::size_t>& hours) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
        hours.clear();
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            hours.push_back(static_cast<std::size_t>(csv::parse_int(t, r, 0)));
            for (std::size_t c = 1; c < t.header.size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = csv::parse_double(t, r, c);
        }
        return m;
    };
    auto loads_t = csv::read(dir / "loads.csv");
    if (loads_t.header.empty() || loads_t.header[0] != "hour") throw ParseError(loads_t.source, 1, "first column must be 'hour'");
    for (std::size_t c = 1; c < loads_t.header.size(); ++c) ds.node_ids.push_back(std::stoll(loads_t.header[c]));
    std::vector<std::size_t> hours;
    ds.loads = read_matrix(loads_t, hours);
    for (std::size_t i = 0; i < hours.size(); ++i)
        if (hours[i] != i) throw ParseError(loads_t.source, loads_t.line_numbers[i], "loads must cover consecutive hours from 0");

    ds.lmp = read_matrix(csv::read(dir / "lmp.csv"), ds.target_hours);
    std::vector<std::size_t> check;
    Eigen::MatrixXd lam = read_matrix(csv::read(dir / "lambda.csv"), check);
    if (check != ds.target_hours) throw ValidationError("lambda.csv hours do not match lmp.csv");
    Eigen::MatrixXd s = read_matrix(csv::read(dir / "s.csv"), check);
    if (check != ds.target_hours) throw ValidationError("s.csv hours do not match lmp.csv");
    ds.mu = read_matrix(csv::read(dir / "mu.csv"), check);
    if (check != ds.target_hours) throw ValidationError("mu.csv hours do not match lmp.csv");
    for (Eigen::Index r = 0; r < lam.rows(); ++r) {
        ds.lambda.push_back(lam(r, 0));
        ds.s.push_back(static_cast<int>(s(r, 0)));
    }
    if (ds.lmp.cols() != static_cast<Eigen::Index>(ds.node_count())) throw ValidationError("lmp.csv node count mismatch");

    std::ifstream split_in(dir / "split.json");
    if (!split_in) throw ValidationError("missing split.json in " + dir.string());
    auto split = nlohmann::json::parse(split_in);
    ds.train_begin = split.at("train").at(0);
    ds.train_end = split.at("train").at(1);
    ds.test_begin = split.at("test").at(0);
    ds.test_end = split.at("test").at(1);
    std::ifstream gc_in(dir / "genconfig.json");
    if (gc_in) ds.genconfig = nlohmann::json::parse(gc_in);
    return ds;
}

}  // namespace lmpcast::market
