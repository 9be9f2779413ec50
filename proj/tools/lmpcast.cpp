#include <malloc.h>
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>

#include "lmpcast/lmpcast.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lmpcast;

namespace {

constexpr const char* kVersion = "0.1.0";

void note(const std::string& msg) { std::cerr << msg << std::endl; }

// ---- manifests -------------------------------------------------------------

std::string sha1_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr)) throw Error(ErrorKind::Validation, "SHA-1 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Same object ids as git: blobs hash "blob <size>\0<bytes>", trees hash their sorted entries.
std::string content_hash(const fs::path& p) {
    if (fs::is_regular_file(p)) {
        const auto bytes = read_bytes(p);
        return sha1_hex("blob " + std::to_string(bytes.size()) + '\0' + bytes);
    }
    if (!fs::is_directory(p)) throw ValidationError("no such file or directory: " + p.string());
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(p)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    std::string body;
    for (const auto& e : entries) {
        const auto h = content_hash(e);
        body += (fs::is_directory(e) ? "40000 " : "100644 ") + e.filename().string() + '\0';
        for (std::size_t i = 0; i < h.size(); i += 2) body += static_cast<char>(std::stoi(h.substr(i, 2), nullptr, 16));
    }
    return sha1_hex("tree " + std::to_string(body.size()) + '\0' + body);
}

std::string timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::stoll(sde));
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct RunManifest {
    std::string command;
    json config = json::object();
    json seeds = json::object();
    json inputs = json::object();

    void input(const std::string& name, const fs::path& p) {
        inputs[name] = {{"path", p.string()}, {"hash", content_hash(p)}};
    }

    /// Writes `<dir>/<file>` listing every other file in `dir` with its hash.
    void write(const fs::path& dir, const std::string& file = "manifest.json") const {
        json outputs = json::object();
        std::vector<fs::path> entries;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().filename() != file) entries.push_back(e.path());
        std::sort(entries.begin(), entries.end());
        for (const auto& e : entries) outputs[e.filename().string()] = content_hash(e);
        write_outputs(dir / file, outputs);
    }

    void write_outputs(const fs::path& path, const json& outputs) const {
        json j{{"tool", "lmpcast"},  {"version", kVersion}, {"command", command}, {"config", config},
               {"seeds", seeds},     {"inputs", inputs},    {"outputs", outputs}, {"created", timestamp()}};
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ValidationError("cannot write " + path.string());
        out << j.dump(2) << '\n';
    }
};

// ---- output guards ---------------------------------------------------------

void prepare_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
        if (!force) throw UsageError(dir.string() + " already exists; pass --force to overwrite");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

void prepare_file(const fs::path& file, bool force) {
    if (fs::exists(file) && !force) throw UsageError(file.string() + " already exists; pass --force to overwrite");
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---- config files ----------------------------------------------------------

std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t n = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++n;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key=value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

void require(CLI::App* sub, std::initializer_list<const char*> names) {
    for (auto n : names)
        if (sub->get_option(n)->count() == 0) throw UsageError(std::string(n) + " is required (on the command line or in --config)");
}

/// Fills options not given on the command line from a key=value file.
void apply_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    for (const auto& [key, value] : read_config(path)) {
        auto* opt = sub->get_option_no_throw("--" + key);
        if (!opt || key == "config") throw UsageError("config key '" + key + "' is not an option of " + sub->get_name());
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

// ---- price tables ----------------------------------------------------------

/// hour, lambda, s, one column per node label.
struct PriceTable {
    std::vector<std::size_t> hours;
    std::vector<long long> nodes;
    Eigen::MatrixXd lmp;
    std::vector<double> lambda;
    std::vector<int> s;
};

void write_prices(const fs::path& path, const PriceTable& t) {
    csv::Writer w(path);
    std::vector<std::string> head{"hour", "lambda", "s"};
    for (auto n : t.nodes) head.push_back(std::to_string(n));
    w.header(head);
    for (std::size_t r = 0; r < t.hours.size(); ++r) {
        w.cell(t.hours[r]).cell(t.lambda[r]).cell(t.s[r]);
        for (Eigen::Index c = 0; c < t.lmp.cols(); ++c) w.cell(t.lmp(static_cast<Eigen::Index>(r), c));
        w.end_row();
    }
}

PriceTable read_prices(const fs::path& path) {
    auto t = csv::read(path);
    if (t.header.size() < 4 || t.header[0] != "hour" || t.header[1] != "lambda" || t.header[2] != "s")
        throw ParseError(t.source, 1, "expected header hour,lambda,s,<node labels>");
    PriceTable p;
    for (std::size_t c = 3; c < t.header.size(); ++c) p.nodes.push_back(std::stoll(t.header[c]));
    p.lmp.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(p.nodes.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        p.hours.push_back(static_cast<std::size_t>(csv::parse_int(t, r, 0)));
        p.lambda.push_back(csv::parse_double(t, r, 1));
        p.s.push_back(static_cast<int>(csv::parse_int(t, r, 2)));
        for (std::size_t c = 3; c < t.header.size(); ++c)
            p.lmp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 3)) = csv::parse_double(t, r, c);
    }
    return p;
}

std::vector<long long> labels_of(const std::vector<long long>& ids, const std::vector<std::size_t>& idx) {
    std::vector<long long> out;
    for (auto i : idx) out.push_back(ids.at(i));
    return out;
}

PriceTable from_prediction(const model::Prediction& p, const std::vector<long long>& labels) {
    PriceTable t;
    t.hours = p.hours;
    t.nodes = labels;
    t.lmp = p.lmp;
    t.lambda.assign(p.lambda_hat.data(), p.lambda_hat.data() + p.lambda_hat.size());
    t.s = p.s_hat;
    return t;
}

/// Dataset ground truth for target rows, restricted to `labels`.
PriceTable ground_truth(const market::Dataset& ds, const std::vector<std::size_t>& rows, const std::vector<long long>& labels) {
    PriceTable t;
    t.nodes = labels;
    t.lmp.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t c = 0; c < labels.size(); ++c) {
        auto it = std::find(ds.node_ids.begin(), ds.node_ids.end(), labels[c]);
        if (it == ds.node_ids.end()) throw ValidationError("node " + std::to_string(labels[c]) + " is not in the dataset");
        const auto col = static_cast<Eigen::Index>(it - ds.node_ids.begin());
        for (std::size_t r = 0; r < rows.size(); ++r)
            t.lmp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ds.lmp(static_cast<Eigen::Index>(rows[r]), col);
    }
    for (auto r : rows) {
        t.hours.push_back(ds.target_hours[r]);
        t.lambda.push_back(ds.lambda[r]);
        t.s.push_back(ds.s[r]);
    }
    return t;
}

fs::path case_for(const fs::path& data, const std::string& override_case) {
    fs::path c = override_case.empty() ? data / "case" : fs::path(override_case);
    if (!fs::exists(c / "nodes.csv"))
        throw ValidationError("no grid case at " + c.string() + " (pass --case, or regenerate the dataset with gen-data)");
    return c;
}

void check_same_nodes(const std::vector<long long>& a, const std::vector<long long>& b, const std::string& what) {
    if (a != b) throw ValidationError(what + ": node labels differ from the checkpoint");
}

// ---- commands --------------------------------------------------------------

struct GenDataArgs {
    std::string case_dir, source = "synthetic", out, config;
    double years = 3.0, alpha = 5.0, train_fraction = 2.0 / 3.0, utilization = 0.42;
    std::size_t hours = 0, congested = 10, zones = 26;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
    auto g = grid::load_case(a.case_dir);
    market::DatasetConfig cfg;
    cfg.seed = a.seed;
    cfg.hours = a.hours ? a.hours : static_cast<std::size_t>(std::llround(a.years * 8760.0));
    cfg.alpha = a.alpha;
    cfg.congested_lines = a.congested;
    cfg.zones = a.zones;
    cfg.train_fraction = a.train_fraction;
    cfg.utilization = a.utilization;
    cfg.threads = a.threads;
    if (a.source.rfind("csv:", 0) == 0) {
        cfg.source = market::SourceMode::Csv;
        cfg.source_csv = a.source.substr(4);
    } else if (a.source != "synthetic") {
        throw UsageError("--source must be 'synthetic' or 'csv:PATH'");
    }
    prepare_dir(a.out, a.force);
    const fs::path out = a.out;
    auto summary = market::generate_dataset(g, cfg, out, note);
    fs::create_directories(out / "case");
    for (const auto& e : fs::directory_iterator(a.case_dir))
        if (e.is_regular_file()) fs::copy_file(e.path(), out / "case" / e.path().filename());

    RunManifest m;
    m.command = "gen-data";
    m.config = {{"case", a.case_dir},       {"source", a.source},       {"hours", cfg.hours},
                {"alpha", a.alpha},          {"congested-lines", a.congested}, {"zones", a.zones},
                {"train-fraction", a.train_fraction}, {"utilization", a.utilization}, {"seed", a.seed}};
    m.seeds = {{"seed", a.seed}};
    m.input("case", a.case_dir);
    if (cfg.source == market::SourceMode::Csv) m.input("source", cfg.source_csv);
    m.write(out);
    note("generated " + std::to_string(summary.solved) + " of " + std::to_string(summary.hours) + " hours (" +
         std::to_string(summary.congested_hours) + " congested) into " + out.string());
    return 0;
}

struct TrainArgs {
    std::string data, kind, case_dir, out, config;
    std::size_t epochs = 100, t_hist = 24, channels = 128, batch = 32, mlp_hidden = 128, mlp_layers = 10;
    int K = 3;
    double lr = 1e-4, lr_decay = 1.0;
    std::uint64_t seed = 0;
    std::vector<long long> nodes;
    bool force = false, quiet = false;
};

int cmd_train(const TrainArgs& a) {
    const auto kind = model::parse_model_kind(a.kind);
    if (kind == model::ModelKind::Mlp && a.nodes.empty())
        throw UsageError("--model mlp trains one network per node and needs --nodes (e.g. --nodes 21,49,52)");
    auto ds = market::load_dataset(a.data);
    const auto case_path = case_for(a.data, a.case_dir);
    auto g = grid::load_case(case_path);
    if (g.node_ids != ds.node_ids) throw ValidationError("grid case nodes do not match the dataset columns");

    model::ModelConfig mc;
    mc.kind = kind;
    mc.K = a.K;
    mc.t_hist = a.t_hist;
    mc.channels = a.channels;
    mc.mlp_hidden = a.mlp_hidden;
    mc.mlp_layers = a.mlp_layers;
    mc.seed = a.seed;
    for (auto label : a.nodes) {
        auto it = std::find(ds.node_ids.begin(), ds.node_ids.end(), label);
        if (it == ds.node_ids.end()) throw ValidationError("--nodes: no node labelled " + std::to_string(label));
        mc.mlp_nodes.push_back(static_cast<std::size_t>(it - ds.node_ids.begin()));
    }
    if (kind != model::ModelKind::Mlp) mc.mlp_nodes.clear();
    model::Model m(mc, ds.node_ids, grid::spectral_basis(g, mc.K).cheb_polys, model::fit_normalization(ds));

    train::TrainConfig tc;
    tc.learning_rate = a.lr;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.seed = a.seed;
    tc.lr_decay = a.lr_decay;
    prepare_dir(a.out, a.force);
    const fs::path out = a.out;
    note("training " + std::string(model::to_string(kind)) + " with " + std::to_string(m.parameter_count()) + " parameters");
    const auto start = std::chrono::steady_clock::now();
    auto res = train::train(m, ds, tc, [&](const train::EpochRecord& r) {
        if (a.quiet) return;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char buf[256];
        std::snprintf(buf, sizeof buf, "epoch %zu  loss %.4f (e %.4f c %.4f s %.4f)  test MAE %.4f RMSE %.4f MAPE %.3f%% s-acc %.2f%%  [%.0fs]",
                      r.epoch, r.loss_total, r.loss_energy, r.loss_congest, r.loss_status, r.test.mae, r.test.rmse, r.test.mape,
                      r.test.s_accuracy, secs);
        note(buf);
    });

    json meta{{"data", a.data},
              {"epochs", a.epochs},
              {"learning_rate", a.lr},
              {"batch_size", a.batch},
              {"train_seed", a.seed},
              {"best_epoch", res.best_epoch}};
    train::write_history(out / "history.csv", res.history);
    model::save_checkpoint(out / "model.ckpt", m, meta);
    m.params() = res.best_params;
    meta["selected"] = "best_test_rmse";
    model::save_checkpoint(out / "best.ckpt", m, meta);

    RunManifest man;
    man.command = "train";
    man.config = {{"data", a.data},         {"model", a.kind},      {"epochs", a.epochs},   {"lr", a.lr},
                  {"lr-decay", a.lr_decay}, {"batch-size", a.batch}, {"k", a.K},           {"t-hist", a.t_hist},
                  {"channels", a.channels}, {"mlp-hidden", a.mlp_hidden}, {"mlp-layers", a.mlp_layers},
                  {"nodes", a.nodes},       {"case", case_path.string()}, {"seed", a.seed}};
    man.seeds = {{"init", a.seed}, {"shuffle", a.seed}};
    man.input("data", a.data);
    man.input("case", case_path);
    man.write(out);
    note("best epoch " + std::to_string(res.best_epoch) + "; checkpoints in " + out.string());
    return 0;
}

struct EvalArgs {
    std::string data, ckpt, pred, out, config;
    bool force = false;
};

int cmd_eval(const EvalArgs& a) {
    if (a.ckpt.empty() == a.pred.empty()) throw UsageError("eval needs exactly one of --ckpt or --pred");
    auto ds = market::load_dataset(a.data);
    PriceTable pred, gt;
    if (!a.ckpt.empty()) {
        auto loaded = model::load_checkpoint(a.ckpt);
        const auto& m = loaded.model;
        check_same_nodes(m.node_ids(), ds.node_ids, "dataset " + a.data);
        const auto rows = train::target_rows(ds, ds.test_begin, ds.test_end, m.config().window());
        if (rows.empty()) throw ValidationError("test split has no usable hours");
        const auto labels = labels_of(m.node_ids(), m.output_nodes());
        pred = from_prediction(m.predict(ds.loads, train::hours_of(ds, rows)), labels);
        gt = ground_truth(ds, rows, labels);
    } else {
        pred = read_prices(a.pred);
        std::vector<std::size_t> rows;
        for (auto h : pred.hours) {
            auto it = std::lower_bound(ds.target_hours.begin(), ds.target_hours.end(), h);
            if (it == ds.target_hours.end() || *it != h) throw ValidationError("hour " + std::to_string(h) + " has no ground truth");
            rows.push_back(static_cast<std::size_t>(it - ds.target_hours.begin()));
        }
        gt = ground_truth(ds, rows, pred.nodes);
    }
    auto rep = eval::compute_metrics(pred.lmp, gt.lmp, pred.s, gt.s);
    prepare_dir(a.out, a.force);
    const fs::path out = a.out;
    eval::write_metrics(out / "metrics.csv", rep, pred.nodes);
    write_prices(out / "predictions.csv", pred);
    write_prices(out / "ground_truth.csv", gt);
    RunManifest man;
    man.command = "eval";
    man.config = {{"data", a.data}};
    if (!a.ckpt.empty()) man.config["ckpt"] = a.ckpt;
    if (!a.pred.empty()) man.config["pred"] = a.pred;
    man.input("data", a.data);
    if (!a.ckpt.empty()) man.input("checkpoint", a.ckpt);
    if (!a.pred.empty()) man.input("predictions", a.pred);
    man.write(out);
    std::cout << eval::format_table(rep);
    if (rep.mape_excluded) std::cout << "MAPE excluded " << rep.mape_excluded << " near-zero node-hours\n";
    return 0;
}

struct PredictArgs {
    std::string ckpt, loads, out, config;
    bool force = false;
};

int cmd_predict(const PredictArgs& a) {
    auto loaded = model::load_checkpoint(a.ckpt);
    const auto& m = loaded.model;
    auto t = csv::read(a.loads);
    const bool has_hour = !t.header.empty() && t.header[0] == "hour";
    const std::size_t first = has_hour ? 1 : 0;
    std::vector<long long> labels;
    for (std::size_t c = first; c < t.header.size(); ++c) labels.push_back(std::stoll(t.header[c]));
    const auto N = m.node_count();
    Eigen::MatrixXd loads(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i) {
        auto it = std::find(labels.begin(), labels.end(), m.node_ids()[i]);
        if (it == labels.end()) throw ValidationError(a.loads + ": missing column for node " + std::to_string(m.node_ids()[i]));
        const std::size_t col = first + static_cast<std::size_t>(it - labels.begin());
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            loads(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = csv::parse_double(t, r, col);
    }
    const std::size_t T = m.config().window();
    if (t.rows.size() < T)
        throw ValidationError(a.loads + " has " + std::to_string(t.rows.size()) + " rows; the model needs " + std::to_string(T) +
                              " hours of history");
    std::vector<std::size_t> rows;
    for (std::size_t r = T - 1; r < t.rows.size(); ++r) rows.push_back(r);
    auto p = m.predict(loads, rows);
    auto table = from_prediction(p, labels_of(m.node_ids(), m.output_nodes()));
    if (has_hour)
        for (auto& h : table.hours) h = static_cast<std::size_t>(csv::parse_int(t, h, 0));
    const fs::path out = a.out;
    prepare_file(out, a.force);
    write_prices(out, table);
    RunManifest man;
    man.command = "predict";
    man.config = {{"ckpt", a.ckpt}, {"loads", a.loads}};
    man.input("checkpoint", a.ckpt);
    man.input("loads", a.loads);
    man.write_outputs(fs::path(out).concat(".manifest.json"), {{out.filename().string(), content_hash(out)}});
    return 0;
}

struct AttentionArgs {
    std::string ckpt, data, out, config;
    std::size_t sample = 0;
    bool force = false;
};

int cmd_export_attention(const AttentionArgs& a) {
    auto loaded = model::load_checkpoint(a.ckpt);
    const auto& m = loaded.model;
    std::string data = a.data;
    if (data.empty() && loaded.metadata.contains("data")) data = loaded.metadata["data"].get<std::string>();
    if (data.empty()) throw UsageError("pass --data: the checkpoint does not record its dataset");
    if (!m.has_attention())
        throw ValidationError("no attention parameters in a " + std::string(model::to_string(m.config().kind)) + " checkpoint");
    auto ds = market::load_dataset(data);
    check_same_nodes(m.node_ids(), ds.node_ids, "dataset " + data);
    auto masks = m.attention(ds.loads, a.sample);
    prepare_dir(a.out, a.force);
    const fs::path out = a.out;
    for (auto b : model::kBranches) {
        const auto& mk = masks[model::index(b)];
        Eigen::MatrixXd S = mk.spatial.matrix(mk.spatial.dim(1)), E = mk.temporal.matrix(mk.temporal.dim(1));
        eval::export_attention(out, model::kBranchName[model::index(b)], S, m.node_ids(), E);
    }
    RunManifest man;
    man.command = "export-attention";
    man.config = {{"ckpt", a.ckpt}, {"data", data}, {"sample", a.sample}};
    man.input("checkpoint", a.ckpt);
    man.input("data", data);
    man.write(out);
    return 0;
}

struct PlotArgs {
    std::string pred, gt, out, rmse_a, rmse_b, name_a = "a", name_b = "b", config;
    long long node = 0;
    std::vector<long long> table_nodes;
    std::size_t from = 0, to = std::numeric_limits<std::size_t>::max();
    bool force = false;
};

eval::MetricReport read_node_metrics(const fs::path& path, std::vector<long long>& ids) {
    auto t = csv::read(path);
    if (t.header.size() < 3 || t.header[0] != "node") throw ParseError(t.source, 1, "expected node,mae,rmse columns");
    eval::MetricReport r;
    r.node_mae.resize(static_cast<Eigen::Index>(t.rows.size()));
    r.node_rmse.resize(r.node_mae.size());
    ids.clear();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        ids.push_back(csv::parse_int(t, i, 0));
        r.node_mae(static_cast<Eigen::Index>(i)) = csv::parse_double(t, i, 1);
        r.node_rmse(static_cast<Eigen::Index>(i)) = csv::parse_double(t, i, 2);
    }
    return r;
}

int cmd_plot(CLI::App* sub, const PlotArgs& a) {
    const bool series = !a.pred.empty() || !a.gt.empty();
    const bool compare = !a.rmse_a.empty() || !a.rmse_b.empty();
    if (!series && !compare) throw UsageError("plot needs --pred/--gt/--node or --rmse-a/--rmse-b");
    if (series && (a.pred.empty() || a.gt.empty() || sub->count("--node") == 0))
        throw UsageError("a series plot needs --pred, --gt and --node");
    if (compare && (a.rmse_a.empty() || a.rmse_b.empty())) throw UsageError("a comparison needs both --rmse-a and --rmse-b");

    PriceTable p, g;
    Eigen::Index column = 0;
    std::size_t begin = 0, end = 0;
    if (series) {
        p = read_prices(a.pred);
        g = read_prices(a.gt);
        if (p.hours != g.hours || p.nodes != g.nodes) throw ValidationError("prediction and ground-truth tables are not aligned");
        auto it = std::find(p.nodes.begin(), p.nodes.end(), a.node);
        if (it == p.nodes.end()) throw ValidationError("node " + std::to_string(a.node) + " is not in " + a.pred);
        column = static_cast<Eigen::Index>(it - p.nodes.begin());
        while (begin < p.hours.size() && p.hours[begin] < a.from) ++begin;
        end = begin;
        while (end < p.hours.size() && p.hours[end] < a.to) ++end;
        if (begin == end) throw ValidationError("no hours of " + a.pred + " fall in the requested range");
    }
    std::vector<long long> ids_a, ids_b;
    eval::MetricReport ra, rb;
    std::vector<eval::NodeComparison> table;
    if (compare) {
        ra = read_node_metrics(a.rmse_a, ids_a);
        rb = read_node_metrics(a.rmse_b, ids_b);
        if (ids_a != ids_b && a.table_nodes.empty())
            throw ValidationError("reports cover different nodes; pass --nodes to compare a subset");
        if (!a.table_nodes.empty()) table = eval::per_node_table(ra, ids_a, rb, ids_b, a.table_nodes);
    }

    prepare_dir(a.out, a.force);
    const fs::path out = a.out;
    RunManifest man;
    man.command = "plot";
    if (series) {
        eval::emit_series_plot(p.lmp, g.lmp, p.hours, column, begin, end, out / ("series_node" + std::to_string(a.node)),
                               "LMP at node " + std::to_string(a.node));
        man.config = {{"pred", a.pred}, {"gt", a.gt}, {"node", a.node}, {"from", a.from}, {"to", a.to}};
        man.input("predictions", a.pred);
        man.input("ground_truth", a.gt);
    }
    if (compare) {
        if (ids_a == ids_b) eval::emit_per_node_rmse_plot(ra, rb, ids_a, a.name_a, a.name_b, out / "node_rmse");
        if (!table.empty()) eval::write_node_table(out / "node_table.csv", table);
        man.config["rmse-a"] = a.rmse_a;
        man.config["rmse-b"] = a.rmse_b;
        man.config["name-a"] = a.name_a;
        man.config["name-b"] = a.name_b;
        man.config["nodes"] = a.table_nodes;
        man.input("report_a", a.rmse_a);
        man.input("report_b", a.rmse_b);
    }
    man.write(out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    // Large autodiff buffers are recycled every batch; keep them off mmap.
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);

    CLI::App app{"Locational marginal price simulation and forecasting"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "simulate a market dataset on a grid case");
    gen->add_option("--case", gd.case_dir, "grid case directory");
    gen->add_option("--source", gd.source, "zone load source: synthetic or csv:PATH")->capture_default_str();
    auto* years = gen->add_option("--years", gd.years, "span in years of 8760 hours")->capture_default_str();
    gen->add_option("--hours", gd.hours, "span in hours (instead of --years)")->excludes(years);
    gen->add_option("--alpha", gd.alpha, "load noise standard deviation (MW)")->capture_default_str();
    gen->add_option("--congested-lines", gd.congested, "number of lines given flow limits")->capture_default_str();
    gen->add_option("--zones", gd.zones, "zones of the synthetic source")->capture_default_str();
    gen->add_option("--train-fraction", gd.train_fraction, "leading share of hours used for training")->capture_default_str();
    gen->add_option("--utilization", gd.utilization, "mean load over installed capacity")->capture_default_str();
    gen->add_option("--seed", gd.seed)->capture_default_str();
    gen->add_option("--threads", gd.threads, "solver threads (0 = LMPCAST_THREADS or all cores)")->capture_default_str();
    gen->add_option("--out", gd.out, "output directory");
    gen->add_flag("--force", gd.force, "replace an existing output");
    gen->add_option("--config", gd.config, "key=value defaults for this command");

    TrainArgs tr;
    auto* trn = app.add_subcommand("train", "train a forecasting model");
    trn->add_option("--data", tr.data, "dataset directory");
    trn->add_option("--model", tr.kind, "astgcn, gcn or mlp");
    trn->add_option("--epochs", tr.epochs)->capture_default_str();
    trn->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
    trn->add_option("--lr-decay", tr.lr_decay, "per-epoch learning-rate multiplier")->capture_default_str();
    trn->add_option("--batch-size", tr.batch)->capture_default_str();
    trn->add_option("--k", tr.K, "Chebyshev order")->capture_default_str();
    trn->add_option("--t-hist", tr.t_hist, "hours of load history")->capture_default_str();
    trn->add_option("--channels", tr.channels, "graph convolution channels")->capture_default_str();
    trn->add_option("--mlp-hidden", tr.mlp_hidden)->capture_default_str();
    trn->add_option("--mlp-layers", tr.mlp_layers)->capture_default_str();
    trn->add_option("--nodes", tr.nodes, "node labels for the per-node MLP")->delimiter(',');
    trn->add_option("--case", tr.case_dir, "grid case (default: the copy inside the dataset)");
    trn->add_option("--seed", tr.seed)->capture_default_str();
    trn->add_option("--out", tr.out, "output directory");
    trn->add_flag("--force", tr.force, "replace an existing output");
    trn->add_flag("--quiet", tr.quiet, "no per-epoch log");
    trn->add_option("--config", tr.config, "key=value defaults for this command");

    EvalArgs ev;
    auto* evl = app.add_subcommand("eval", "score a checkpoint or a prediction table on the test split");
    evl->add_option("--data", ev.data, "dataset directory");
    evl->add_option("--ckpt", ev.ckpt, "model checkpoint");
    evl->add_option("--pred", ev.pred, "prediction table (hour,lambda,s,<nodes>)");
    evl->add_option("--out", ev.out, "output directory");
    evl->add_flag("--force", ev.force, "replace an existing output");
    evl->add_option("--config", ev.config, "key=value defaults for this command");

    PredictArgs pr;
    auto* prd = app.add_subcommand("predict", "forecast prices from a load history table");
    prd->add_option("--ckpt", pr.ckpt, "model checkpoint");
    prd->add_option("--loads", pr.loads, "CSV with one column per node label (optional hour column)");
    prd->add_option("--out", pr.out, "output CSV");
    prd->add_flag("--force", pr.force, "replace an existing output");
    prd->add_option("--config", pr.config, "key=value defaults for this command");

    AttentionArgs at;
    auto* att = app.add_subcommand("export-attention", "write attention masks for one target hour");
    att->add_option("--ckpt", at.ckpt, "ASTGCN checkpoint");
    att->add_option("--sample", at.sample, "target hour");
    att->add_option("--data", at.data, "dataset (default: the one recorded in the checkpoint)");
    att->add_option("--out", at.out, "output directory");
    att->add_flag("--force", at.force, "replace an existing output");
    att->add_option("--config", at.config, "key=value defaults for this command");

    PlotArgs pl;
    auto* plt = app.add_subcommand("plot", "series and per-node comparison plots");
    plt->add_option("--pred", pl.pred, "prediction table");
    plt->add_option("--gt", pl.gt, "ground-truth table");
    plt->add_option("--node", pl.node, "node label for the series plot");
    plt->add_option("--from", pl.from, "first hour of the series");
    plt->add_option("--to", pl.to, "hour after the last of the series");
    plt->add_option("--rmse-a", pl.rmse_a, "per-node metrics CSV of model a");
    plt->add_option("--rmse-b", pl.rmse_b, "per-node metrics CSV of baseline b");
    plt->add_option("--name-a", pl.name_a)->capture_default_str();
    plt->add_option("--name-b", pl.name_b)->capture_default_str();
    plt->add_option("--nodes", pl.table_nodes, "node labels for the comparison table")->delimiter(',');
    plt->add_option("--out", pl.out, "output directory");
    plt->add_flag("--force", pl.force, "replace an existing output");
    plt->add_option("--config", pl.config, "key=value defaults for this command");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
    }

    try {
        if (gen->parsed()) {
            apply_config(gen, gd.config);
            require(gen, {"--case", "--out"});
            return cmd_gen_data(gd);
        }
        if (trn->parsed()) {
            apply_config(trn, tr.config);
            require(trn, {"--data", "--model", "--out"});
            return cmd_train(tr);
        }
        if (evl->parsed()) {
            apply_config(evl, ev.config);
            require(evl, {"--data", "--out"});
            return cmd_eval(ev);
        }
        if (prd->parsed()) {
            apply_config(prd, pr.config);
            require(prd, {"--ckpt", "--loads", "--out"});
            return cmd_predict(pr);
        }
        if (att->parsed()) {
            apply_config(att, at.config);
            require(att, {"--ckpt", "--sample", "--out"});
            return cmd_export_attention(at);
        }
        if (plt->parsed()) {
            apply_config(plt, pl.config);
            require(plt, {"--out"});
            return cmd_plot(plt, pl);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(e.kind());
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(ErrorKind::Usage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(ErrorKind::Validation);
    }
    return static_cast<int>(ErrorKind::Usage);
}
