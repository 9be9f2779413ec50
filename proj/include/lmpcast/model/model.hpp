#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lmpcast/common/random.hpp"
#include "lmpcast/market/dataset.hpp"
#include "lmpcast/model/layers.hpp"
#include "lmpcast/train/xavier.hpp"

namespace lmpcast::model {

enum class ModelKind { Astgcn, Gcn, Mlp };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Astgcn: return "astgcn";
        case ModelKind::Gcn: return "gcn";
        case ModelKind::Mlp: return "mlp";
    }
    return "unknown";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "astgcn") return ModelKind::Astgcn;
    if (s == "gcn") return ModelKind::Gcn;
    if (s == "mlp") return ModelKind::Mlp;
    throw UsageError("unknown model kind '" + s + "' (expected astgcn, gcn or mlp)");
}

enum class Branch : std::size_t { Lambda = 0, Status = 1, Mu = 2 };
inline constexpr std::array<Branch, 3> kBranches{Branch::Lambda, Branch::Status, Branch::Mu};
inline constexpr std::array<std::size_t, 3> kBranchWidth{1, 2, 16};
inline constexpr std::array<const char*, 3> kBranchName{"lambda", "s", "mu"};

inline std::size_t index(Branch b) { return static_cast<std::size_t>(b); }

struct ModelConfig {
    ModelKind kind = ModelKind::Astgcn;
    int K = 3;
    std::size_t t_hist = 24;
    std::size_t channels = 128;
    std::size_t mlp_hidden = 128;
    std::size_t mlp_layers = 10;
    std::vector<std::size_t> mlp_nodes;  // node indices with their own MLP
    std::uint64_t seed = 0;

    /// Hours of load history the model consumes.
    std::size_t window() const { return kind == ModelKind::Gcn ? 1 : t_hist; }
};

/// Affine maps between raw data and network units, fitted on the training split.
struct Normalization {
    Eigen::VectorXd load_mean, load_std;  // per node
    double lambda_mean = 0.0, lambda_std = 1.0;
    Eigen::VectorXd mu_mean;  // per node mean of lmp - lambda
    double mu_std = 1.0;
};

inline Normalization fit_normalization(const market::Dataset& ds) {
    const auto N = static_cast<Eigen::Index>(ds.node_count());
    auto safe_std = [](double v) { return v > 1e-9 ? v : 1.0; };
    Normalization n;
    const auto train_hours = static_cast<Eigen::Index>(ds.train_end - ds.train_begin);
    if (train_hours <= 0) throw ValidationError("training split is empty");
    auto block = ds.loads.middleRows(static_cast<Eigen::Index>(ds.train_begin), train_hours);
    n.load_mean = block.colwise().mean().transpose();
    n.load_std.resize(N);
    for (Eigen::Index i = 0; i < N; ++i)
        n.load_std(i) = safe_std(std::sqrt((block.col(i).array() - n.load_mean(i)).square().sum() / static_cast<double>(train_hours)));

    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.target_hours.size(); ++r)
        if (ds.target_hours[r] >= ds.train_begin && ds.target_hours[r] < ds.train_end) rows.push_back(r);
    if (rows.empty()) throw ValidationError("training split has no solved hours");
    const double cnt = static_cast<double>(rows.size());
    double lm = 0.0;
    for (auto r : rows) lm += ds.lambda[r];
    n.lambda_mean = lm / cnt;
    double lv = 0.0;
    for (auto r : rows) lv += (ds.lambda[r] - n.lambda_mean) * (ds.lambda[r] - n.lambda_mean);
    n.lambda_std = safe_std(std::sqrt(lv / cnt));
    n.mu_mean = Eigen::VectorXd::Zero(N);
    for (auto r : rows) n.mu_mean += ds.congestion_component(r);
    n.mu_mean /= cnt;
    double mv = 0.0;
    for (auto r : rows) mv += (ds.congestion_component(r) - n.mu_mean).squaredNorm();
    n.mu_std = safe_std(std::sqrt(mv / (cnt * static_cast<double>(N))));
    return n;
}

struct Parameter {
    std::string name;
    Tensor value;
};

struct AttentionMasks {
    Tensor spatial;   // [B, N, N]
    Tensor temporal;  // [B, T, T]
};

struct ForwardOptions {
    bool identity_masks = false;          // skip attention (masks replaced by I)
    AttentionMasks* masks_out = nullptr;  // receives the computed masks
};

/// Batch prediction in physical units; one row per requested hour.
struct Prediction {
    std::vector<std::size_t> hours;
    Eigen::MatrixXd lambda_nodes;  // branch output before the node mean
    Eigen::MatrixXd s_probability;  // class-1 probability per node
    Eigen::MatrixXd mu;            // congestion component per node
    Eigen::VectorXd lambda_hat;
    std::vector<int> s_hat;
    Eigen::MatrixXd lmp;
};

class Model {
public:
    Model(ModelConfig cfg, std::vector<long long> node_ids, std::vector<Eigen::MatrixXd> cheb_polys, Normalization norm)
        : cfg_(std::move(cfg)), node_ids_(std::move(node_ids)), cheb_(std::move(cheb_polys)), norm_(std::move(norm)) {
        if (cfg_.K < 1 || static_cast<std::size_t>(cfg_.K) != cheb_.size())
            throw ValidationError("model: K=" + std::to_string(cfg_.K) + " but " + std::to_string(cheb_.size()) +
                                  " Chebyshev polynomials supplied");
        if (cfg_.t_hist < 1 || cfg_.channels < 1) throw ValidationError("model: t_hist and channels must be positive");
        const auto N = node_count();
        if (cfg_.kind == ModelKind::Mlp) {
            if (cfg_.mlp_nodes.empty()) throw UsageError("the MLP baseline needs a node list");
            for (auto n : cfg_.mlp_nodes)
                if (n >= N) throw ValidationError("MLP node index out of range");
        }
        if (static_cast<std::size_t>(norm_.load_mean.size()) != N || static_cast<std::size_t>(norm_.mu_mean.size()) != N)
            throw ValidationError("model: normalization does not match node count");
        basis_ = GraphBasis::from_dense(cheb_);
        declare();
    }

    const ModelConfig& config() const { return cfg_; }
    const std::vector<long long>& node_ids() const { return node_ids_; }
    const std::vector<Eigen::MatrixXd>& cheb_polys() const { return cheb_; }
    const Normalization& normalization() const { return norm_; }
    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }
    std::size_t node_count() const { return node_ids_.size(); }
    bool has_attention() const { return cfg_.kind == ModelKind::Astgcn; }

    /// Nodes the model predicts: all nodes, or the MLP node list.
    std::vector<std::size_t> output_nodes() const {
        if (cfg_.kind == ModelKind::Mlp) return cfg_.mlp_nodes;
        std::vector<std::size_t> all(node_count());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }

    const std::vector<std::size_t>& branch_params(Branch b) const { return branch_params_[index(b)]; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    /// Puts a branch's parameters on `tape`, as variables when training.
    std::vector<Var> bind(ad::Tape& tape, Branch b, bool trainable) const {
        std::vector<Var> out;
        for (auto i : branch_params(b)) out.push_back(trainable ? tape.variable(params_[i].value) : tape.constant(params_[i].value));
        return out;
    }

    /// Network input for target hours: [B, N, T] normalized loads (hours h-T+1..h), or
    /// [M, B, T] for the MLP.
    Tensor make_input(const Eigen::MatrixXd& loads, const std::vector<std::size_t>& hours) const {
        const std::size_t T = cfg_.window(), B = hours.size();
        const auto nodes = output_nodes();
        const bool mlp = cfg_.kind == ModelKind::Mlp;
        const std::size_t N = node_count();
        if (static_cast<std::size_t>(loads.cols()) != N) throw ValidationError("load matrix has wrong node count");
        Tensor x(mlp ? Shape{nodes.size(), B, T} : Shape{B, N, T});
        for (std::size_t b = 0; b < B; ++b) {
            if (hours[b] + 1 < T || hours[b] >= static_cast<std::size_t>(loads.rows()))
                throw ValidationError("hour " + std::to_string(hours[b]) + " has no complete " + std::to_string(T) +
                                      "-hour load window");
            const std::size_t first = hours[b] + 1 - T;
            for (std::size_t t = 0; t < T; ++t) {
                const auto row = static_cast<Eigen::Index>(first + t);
                if (mlp) {
                    for (std::size_t m = 0; m < nodes.size(); ++m) {
                        const auto i = static_cast<Eigen::Index>(nodes[m]);
                        x[(m * B + b) * T + t] = (loads(row, i) - norm_.load_mean(i)) / norm_.load_std(i);
                    }
                } else {
                    for (std::size_t i = 0; i < N; ++i) {
                        const auto ii = static_cast<Eigen::Index>(i);
                        x[(b * N + i) * T + t] = (loads(row, ii) - norm_.load_mean(ii)) / norm_.load_std(ii);
                    }
                }
            }
        }
        return x;
    }

    /// Raw branch output [B, N_out, q] for network input `x` (see make_input).
    Var branch_forward(Branch b, const std::vector<Var>& vars, Var x, const ForwardOptions& opt = {}) const {
        if (vars.size() != branch_params(b).size()) throw ValidationError("branch_forward: parameter binding mismatch");
        return cfg_.kind == ModelKind::Mlp ? mlp_forward(vars, x) : graph_forward(vars, x, opt);
    }

    /// lambda-branch output in $/MWh, [B, N_out].
    Var lambda_prices(Var raw) const {
        const auto& s = raw.shape();
        return ad::add_scalar(ad::scale(ad::reshape(raw, {s[0], s[1]}), norm_.lambda_std), norm_.lambda_mean);
    }

    /// mu-branch output summed over q, in $/MWh, [B, N_out].
    Var mu_prices(Var raw) const {
        ad::Tape& t = raw.tape();
        const auto nodes = output_nodes();
        Tensor mean({nodes.size()});
        for (std::size_t m = 0; m < nodes.size(); ++m) mean[m] = norm_.mu_mean(static_cast<Eigen::Index>(nodes[m]));
        return ad::add_broadcast(ad::scale(ad::reduce_sum(raw, 2), norm_.mu_std), t.constant(std::move(mean)));
    }

    /// Inference over target hours in batches.
    Prediction predict(const Eigen::MatrixXd& loads, const std::vector<std::size_t>& hours, std::size_t batch = 64) const {
        const auto nodes = output_nodes();
        const auto H = static_cast<Eigen::Index>(hours.size()), M = static_cast<Eigen::Index>(nodes.size());
        Prediction p;
        p.hours = hours;
        p.lambda_nodes.resize(H, M);
        p.s_probability.resize(H, M);
        p.mu.resize(H, M);
        p.lambda_hat.resize(H);
        p.lmp.resize(H, M);
        p.s_hat.assign(hours.size(), 0);
        for (std::size_t start = 0; start < hours.size(); start += batch) {
            std::vector<std::size_t> hb(hours.begin() + static_cast<std::ptrdiff_t>(start),
                                        hours.begin() + static_cast<std::ptrdiff_t>(std::min(hours.size(), start + batch)));
            const std::size_t B = hb.size();
            Tensor x = make_input(loads, hb);
            Tensor lam, logits, mu;
            {
                ad::Tape t;
                lam = lambda_prices(branch_forward(Branch::Lambda, bind(t, Branch::Lambda, false), t.constant(x))).value();
            }
            {
                ad::Tape t;
                logits = branch_forward(Branch::Status, bind(t, Branch::Status, false), t.constant(x)).value();
            }
            {
                ad::Tape t;
                mu = mu_prices(branch_forward(Branch::Mu, bind(t, Branch::Mu, false), t.constant(x))).value();
            }
            for (std::size_t b = 0; b < B; ++b) {
                const auto r = static_cast<Eigen::Index>(start + b);
                Eigen::VectorXd lv(M), mv(M);
                Eigen::MatrixXd lg(M, 2);
                for (Eigen::Index m = 0; m < M; ++m) {
                    const auto k = b * static_cast<std::size_t>(M) + static_cast<std::size_t>(m);
                    lv(m) = lam[k];
                    mv(m) = mu[k];
                    lg(m, 0) = logits[2 * k];
                    lg(m, 1) = logits[2 * k + 1];
                }
                auto comp = compose_lmp(lv, lg, mv);
                p.lambda_nodes.row(r) = lv.transpose();
                p.mu.row(r) = mv.transpose();
                for (Eigen::Index m = 0; m < M; ++m) {
                    const double a = lg(m, 0), c = lg(m, 1), mx = std::max(a, c);
                    p.s_probability(r, m) = std::exp(c - mx) / (std::exp(a - mx) + std::exp(c - mx));
                }
                p.lambda_hat(r) = comp.lambda_hat;
                p.s_hat[static_cast<std::size_t>(r)] = comp.s_hat;
                if (cfg_.kind == ModelKind::Mlp) {
                    // Independent per-node models: each node composes its own price.
                    for (Eigen::Index m = 0; m < M; ++m)
                        p.lmp(r, m) = lv(m) + (p.s_probability(r, m) > 0.5 ? mv(m) : 0.0);
                } else {
                    p.lmp.row(r) = comp.lmp.transpose();
                }
            }
        }
        return p;
    }

    /// Spatial and temporal masks for one target hour (ASTGCN only), per branch.
    std::array<AttentionMasks, 3> attention(const Eigen::MatrixXd& loads, std::size_t hour) const {
        if (!has_attention()) throw ValidationError("no attention parameters in a " + std::string(to_string(cfg_.kind)) + " model");
        std::array<AttentionMasks, 3> out;
        Tensor x = make_input(loads, {hour});
        for (auto b : kBranches) {
            ad::Tape t;
            ForwardOptions opt;
            opt.masks_out = &out[index(b)];
            branch_forward(b, bind(t, b, false), t.constant(x), opt);
        }
        return out;
    }

private:
    void add(Branch b, std::string name, Shape shape, std::size_t fan_in, std::size_t fan_out, bool zero) {
        const std::size_t id = params_.size();
        Tensor v;
        if (zero) {
            v = Tensor(std::move(shape));
        } else {
            Rng rng = make_rng(cfg_.seed, {stream::init, id});
            v = train::xavier_init(std::move(shape), fan_in, fan_out, rng);
        }
        params_.push_back({std::string(kBranchName[index(b)]) + "." + name, std::move(v)});
        branch_params_[index(b)].push_back(id);
    }

    void declare() {
        const std::size_t N = node_count(), T = cfg_.window(), C = cfg_.channels, K = static_cast<std::size_t>(cfg_.K);
        for (auto b : kBranches) {
            const std::size_t q = kBranchWidth[index(b)];
            if (cfg_.kind == ModelKind::Mlp) {
                const std::size_t M = cfg_.mlp_nodes.size(), Hd = cfg_.mlp_hidden;
                std::size_t in = T;
                for (std::size_t l = 0; l < cfg_.mlp_layers; ++l) {
                    add(b, "l" + std::to_string(l) + ".W", {M, in, Hd}, in, Hd, false);
                    add(b, "l" + std::to_string(l) + ".b", {M, Hd}, 1, 1, true);
                    in = Hd;
                }
                add(b, "head.W", {M, in, q}, in, q, false);
                add(b, "head.b", {M, q}, 1, 1, true);
                continue;
            }
            if (cfg_.kind == ModelKind::Astgcn) {
                add(b, "sat.V", {N, N}, N, N, false);
                add(b, "sat.b", {N, N}, 1, 1, true);
                add(b, "sat.w1", {T, 1}, T, 1, false);
                add(b, "sat.w2", {T, 1}, T, 1, false);
                add(b, "tat.V", {T, T}, T, T, false);
                add(b, "tat.b", {T, T}, 1, 1, true);
                add(b, "tat.w1", {N, 1}, N, 1, false);
                add(b, "tat.w2", {N, 1}, N, 1, false);
            }
            add(b, "block1.theta", {K, C}, K, C, false);
            add(b, "block1.bias", {C}, 1, 1, true);
            add(b, "block1.phi", {3, C}, 3, 3, false);
            add(b, "block2.theta", {K * C, C}, K * C, C, false);
            add(b, "block2.bias", {C}, 1, 1, true);
            add(b, "block2.phi", {3, C}, 3, 3, false);
            add(b, "fc.W", {N, T * C, q}, T * C, q, false);
            add(b, "fc.b", {N, q}, 1, 1, true);
        }
    }

    Var graph_forward(const std::vector<Var>& v, Var x, const ForwardOptions& opt) const {
        const auto& s = x.shape();
        const std::size_t N = node_count(), T = cfg_.window();
        if (s.size() != 3 || s[1] != N || s[2] != T)
            throw ValidationError("model input must be [B," + std::to_string(N) + "," + std::to_string(T) + "], got " +
                                  ad::to_string(s));
        const std::size_t B = s[0];
        std::size_t i = 0;
        if (has_attention()) {
            AttentionVars sp{v[0], v[1], v[2], v[3]}, tp{v[4], v[5], v[6], v[7]};
            i = 8;
            if (!opt.identity_masks) {
                auto S = spatial_attention(x, sp);
                auto E = temporal_attention(x, tp);
                if (opt.masks_out) {
                    opt.masks_out->spatial = S.value();
                    opt.masks_out->temporal = E.value();
                }
                x = apply_attention(x, E, S);
            }
        }
        auto h = ad::reshape(ad::permute(x, {1, 0, 2}), {N, B, T, 1});
        h = st_conv_block(h, basis_, {v[i], v[i + 1], v[i + 2]});
        h = st_conv_block(h, basis_, {v[i + 3], v[i + 4], v[i + 5]});
        return node_projection(h, v[i + 6], v[i + 7]);
    }

    Var mlp_forward(const std::vector<Var>& v, Var x) const {
        const auto& s = x.shape();
        if (s.size() != 3 || s[0] != cfg_.mlp_nodes.size() || s[2] != cfg_.window())
            throw ValidationError("MLP input must be [M,B,T], got " + ad::to_string(s));
        Var h = x;
        const std::size_t L = cfg_.mlp_layers;
        for (std::size_t l = 0; l < L; ++l) h = ad::relu(ad::add_broadcast_mid(ad::bmm(h, v[2 * l]), v[2 * l + 1]));
        auto out = ad::add_broadcast_mid(ad::bmm(h, v[2 * L]), v[2 * L + 1]);  // [M, B, q]
        return ad::permute(out, {1, 0, 2});
    }

    ModelConfig cfg_;
    std::vector<long long> node_ids_;
    std::vector<Eigen::MatrixXd> cheb_;
    Normalization norm_;
    GraphBasis basis_;
    std::vector<Parameter> params_;
    std::array<std::vector<std::size_t>, 3> branch_params_;
};

}  // namespace lmpcast::model
