#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include "json.hpp"
#include <string>

#include "lmpcast/model/model.hpp"

namespace lmpcast::model {

// File layout: 8-byte magic, u64 LE manifest length, JSON manifest, then the arrays
// listed in the manifest as consecutive little-endian float64 values.
inline constexpr char kCheckpointMagic[8] = {'L', 'M', 'P', 'C', 'K', 'P', 'T', '1'};

struct Checkpoint {
    nlohmann::json metadata;  // free-form run information (training settings, dataset, epoch)
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

inline void put_doubles(std::string& out, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

inline NamedArray array_of(std::string name, const Eigen::MatrixXd& m) {
    NamedArray a{std::move(name), {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, {}};
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.data.push_back(m(r, c));
    return a;
}

inline NamedArray array_of(std::string name, const Eigen::VectorXd& v) {
    return {std::move(name), {static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())};
}

inline NamedArray array_of(std::string name, double v) { return {std::move(name), {}, {v}}; }

}  // namespace detail

inline std::string serialize(const Model& m, const nlohmann::json& metadata = nlohmann::json::object()) {
    const auto& cfg = m.config();
    std::vector<detail::NamedArray> arrays;
    const auto& nz = m.normalization();
    arrays.push_back(detail::array_of("norm.load_mean", nz.load_mean));
    arrays.push_back(detail::array_of("norm.load_std", nz.load_std));
    arrays.push_back(detail::array_of("norm.lambda_mean", nz.lambda_mean));
    arrays.push_back(detail::array_of("norm.lambda_std", nz.lambda_std));
    arrays.push_back(detail::array_of("norm.mu_mean", nz.mu_mean));
    arrays.push_back(detail::array_of("norm.mu_std", nz.mu_std));
    for (std::size_t k = 0; k < m.cheb_polys().size(); ++k)
        arrays.push_back(detail::array_of("basis.T" + std::to_string(k), m.cheb_polys()[k]));
    for (const auto& p : m.params()) arrays.push_back({"param." + p.name, p.value.shape(), {p.value.values().begin(), p.value.values().end()}});

    nlohmann::json man;
    man["format"] = 1;
    man["variant"] = to_string(cfg.kind);
    man["K"] = cfg.K;
    man["t_hist"] = cfg.t_hist;
    man["channels"] = cfg.channels;
    man["mlp_hidden"] = cfg.mlp_hidden;
    man["mlp_layers"] = cfg.mlp_layers;
    man["mlp_nodes"] = nlohmann::json::array();
    for (auto n : cfg.mlp_nodes) man["mlp_nodes"].push_back(m.node_ids()[n]);
    man["seed"] = cfg.seed;
    man["node_ids"] = m.node_ids();
    man["metadata"] = metadata;
    man["arrays"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& a : arrays) {
        man["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
        offset += a.data.size();
    }
    const std::string text = man.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put_u64(out, text.size());
    out += text;
    for (const auto& a : arrays) detail::put_doubles(out, a.data.data(), a.data.size());
    return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& m,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write checkpoint " + path.string());
    const auto bytes = serialize(m, metadata);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("failed writing checkpoint " + path.string());
}

struct LoadedModel {
    Model model;
    nlohmann::json metadata;
};

namespace detail {

inline LoadedModel parse_checkpoint(const std::string& bytes, const std::string& source) {
    auto bad = [&](const std::string& what) { return ValidationError(source + ": " + what); };
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw bad("not a model checkpoint");
    const std::uint64_t len = detail::get_u64(bytes.data() + 8);
    if (16 + len > bytes.size()) throw bad("truncated manifest");
    const auto man = nlohmann::json::parse(bytes.substr(16, len));
    if (man.at("format") != 1) throw bad("unsupported checkpoint format");
    const std::size_t base = 16 + len;

    std::map<std::string, detail::NamedArray> arrays;
    for (const auto& a : man.at("arrays")) {
        detail::NamedArray na{a.at("name"), a.at("shape").get<Shape>(), {}};
        const std::size_t n = ad::element_count(na.shape), off = a.at("offset");
        if (base + 8 * (off + n) > bytes.size()) throw bad("array " + na.name + " extends past end of file");
        na.data.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            na.data[i] = std::bit_cast<double>(detail::get_u64(bytes.data() + base + 8 * (off + i)));
        arrays.emplace(na.name, std::move(na));
    }
    auto get = [&](const std::string& name) -> const detail::NamedArray& {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw bad("missing array " + name);
        return it->second;
    };
    auto vec = [&](const std::string& name) {
        const auto& a = get(name);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(a.data.data(), static_cast<Eigen::Index>(a.data.size())));
    };

    ModelConfig cfg;
    cfg.kind = parse_model_kind(man.at("variant"));
    cfg.K = man.at("K");
    cfg.t_hist = man.at("t_hist");
    cfg.channels = man.at("channels");
    cfg.mlp_hidden = man.at("mlp_hidden");
    cfg.mlp_layers = man.at("mlp_layers");
    cfg.seed = man.at("seed");
    const auto node_ids = man.at("node_ids").get<std::vector<long long>>();
    for (long long label : man.at("mlp_nodes")) {
        auto it = std::find(node_ids.begin(), node_ids.end(), label);
        if (it == node_ids.end()) throw bad("MLP node " + std::to_string(label) + " not in node list");
        cfg.mlp_nodes.push_back(static_cast<std::size_t>(it - node_ids.begin()));
    }
    Normalization nz;
    nz.load_mean = vec("norm.load_mean");
    nz.load_std = vec("norm.load_std");
    nz.lambda_mean = get("norm.lambda_mean").data.at(0);
    nz.lambda_std = get("norm.lambda_std").data.at(0);
    nz.mu_mean = vec("norm.mu_mean");
    nz.mu_std = get("norm.mu_std").data.at(0);
    std::vector<Eigen::MatrixXd> polys;
    for (int k = 0; k < cfg.K; ++k) {
        const auto& a = get("basis.T" + std::to_string(k));
        if (a.shape.size() != 2) throw bad("basis array must be 2-D");
        Eigen::MatrixXd mat(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
        for (std::size_t r = 0; r < a.shape[0]; ++r)
            for (std::size_t c = 0; c < a.shape[1]; ++c)
                mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a.data[r * a.shape[1] + c];
        polys.push_back(std::move(mat));
    }
    LoadedModel out{Model(cfg, node_ids, std::move(polys), std::move(nz)), man.at("metadata")};
    for (auto& p : out.model.params()) {
        const auto& a = get("param." + p.name);
        if (a.shape != p.value.shape())
            throw bad("parameter " + p.name + " has shape " + ad::to_string(a.shape) + ", expected " +
                      ad::to_string(p.value.shape()));
        p.value = Tensor(a.shape, a.data);
    }
    return out;
}

}  // namespace detail

inline LoadedModel deserialize(const std::string& bytes, const std::string& source = "checkpoint") {
    try {
        return detail::parse_checkpoint(bytes, source);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(source + ": malformed manifest (" + e.what() + ")");
    }
}

inline LoadedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes, path.string());
}

}  // namespace lmpcast::model
