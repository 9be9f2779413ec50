#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <sstream>

#include "lmpcast/common/csv.hpp"
#include "lmpcast/eval/metrics.hpp"
#include "lmpcast/market/dataset.hpp"
#include "lmpcast/model/model.hpp"
#include "lmpcast/train/adam.hpp"
#include "lmpcast/train/losses.hpp"

namespace lmpcast::train {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    LossWeights weights;
    double lr_decay = 1.0;  // per-epoch multiplier; 1 = constant rate
    std::size_t eval_every = 1;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss_energy = 0.0, loss_congest = 0.0, loss_status = 0.0, loss_total = 0.0;
    eval::MetricReport test;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::vector<model::Parameter> best_params;  // lowest test RMSE; initialization when no epoch ran
    std::size_t best_epoch = 0;
    double best_rmse = std::numeric_limits<double>::infinity();
};

class NonFiniteLossError : public Error {
public:
    using Error::Error;
};

/// Dataset rows usable as targets: hour inside [begin, end) with a full load window.
inline std::vector<std::size_t> target_rows(const market::Dataset& ds, std::size_t begin, std::size_t end,
                                            std::size_t window) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.target_hours.size(); ++r) {
        const auto h = ds.target_hours[r];
        if (h >= begin && h < end && h + 1 >= window) rows.push_back(r);
    }
    return rows;
}

/// Ground truth aligned with a model's output nodes.
struct Targets {
    ad::Tensor lambda;  // [B, M]
    ad::Tensor mu;      // [B, M], lmp - lambda
    std::vector<int> s; // B*M, system flag replicated per node
    Eigen::MatrixXd lmp;
    std::vector<int> s_system;
};

inline Targets make_targets(const market::Dataset& ds, const std::vector<std::size_t>& rows,
                            const std::vector<std::size_t>& nodes) {
    const std::size_t B = rows.size(), M = nodes.size();
    Targets t{ad::Tensor({B, M}), ad::Tensor({B, M}), {}, Eigen::MatrixXd(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(M)), {}};
    for (std::size_t b = 0; b < B; ++b) {
        const auto r = rows[b];
        for (std::size_t m = 0; m < M; ++m) {
            const double lmp = ds.lmp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(nodes[m]));
            t.lambda[b * M + m] = ds.lambda[r];
            t.mu[b * M + m] = lmp - ds.lambda[r];
            t.s.push_back(ds.s[r]);
            t.lmp(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(m)) = lmp;
        }
        t.s_system.push_back(ds.s[r]);
    }
    return t;
}

inline std::vector<std::size_t> hours_of(const market::Dataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> h;
    for (auto r : rows) h.push_back(ds.target_hours[r]);
    return h;
}

/// Test-split metrics of a model: composed LMP against ground truth on the model's output nodes.
inline eval::MetricReport evaluate(const model::Model& m, const market::Dataset& ds, model::Prediction* out = nullptr) {
    const auto rows = target_rows(ds, ds.test_begin, ds.test_end, m.config().window());
    if (rows.empty()) throw ValidationError("test split has no usable hours");
    auto pred = m.predict(ds.loads, hours_of(ds, rows));
    auto tg = make_targets(ds, rows, m.output_nodes());
    auto rep = eval::compute_metrics(pred.lmp, tg.lmp, pred.s_hat, tg.s_system);
    if (out) *out = std::move(pred);
    return rep;
}

/// Per-branch losses for one batch; accumulates weighted gradients into `grads` when given.
struct BatchLosses {
    double energy = 0.0, congest = 0.0, status = 0.0;
};

inline BatchLosses batch_step(const model::Model& m, const market::Dataset& ds, const std::vector<std::size_t>& rows,
                              const LossWeights& w, std::vector<ad::Tensor>* grads) {
    const auto nodes = m.output_nodes();
    const bool per_node = m.config().kind == model::ModelKind::Mlp;
    const std::size_t B = rows.size();
    const std::size_t group = per_node ? 1 : nodes.size();
    auto x = m.make_input(ds.loads, hours_of(ds, rows));
    auto tg = make_targets(ds, rows, nodes);
    BatchLosses out;
    for (auto b : model::kBranches) {
        ad::Tape tape;
        auto vars = m.bind(tape, b, grads != nullptr);
        auto raw = m.branch_forward(b, vars, tape.constant(x));
        Var loss;
        double weight = 1.0;
        switch (b) {
            case model::Branch::Lambda:
                loss = residual_loss(m.lambda_prices(raw), tape.constant(tg.lambda), 1.0, B, group);
                out.energy = loss.value().item();
                weight = w.energy;
                break;
            case model::Branch::Status:
                loss = loss_status(raw, tg.s);
                out.status = loss.value().item();
                weight = w.status;
                break;
            case model::Branch::Mu:
                loss = residual_loss(m.mu_prices(raw), tape.constant(tg.mu), 2.0, B, group);
                out.congest = loss.value().item();
                weight = w.congest;
                break;
        }
        if (!std::isfinite(loss.value().item())) return out;
        if (grads) {
            // Branches share no parameters, so the total-loss gradient of a branch is its
            // weighted branch-loss gradient.
            tape.backward(ad::scale(loss, weight));
            const auto& ids = m.branch_params(b);
            for (std::size_t i = 0; i < ids.size(); ++i) (*grads)[ids[i]] = tape.grad(vars[i]);
        }
    }
    return out;
}

using TrainLog = std::function<void(const EpochRecord&)>;

inline TrainResult train(model::Model& m, const market::Dataset& ds, const TrainConfig& cfg, const TrainLog& log = {}) {
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size == 0) throw ValidationError("learning rate and batch size must be positive");
    const auto train_rows = target_rows(ds, ds.train_begin, ds.train_end, m.config().window());
    if (train_rows.empty()) throw ValidationError("training split has no usable hours");
    TrainResult res;
    res.best_params = m.params();
    AdamState adam;
    AdamSettings as;
    as.lr = cfg.learning_rate;
    std::vector<ad::Tensor*> pptr;
    for (auto& p : m.params()) pptr.push_back(&p.value);
    std::vector<ad::Tensor> grads(pptr.size());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto order = train_rows;
        Rng rng = make_rng(cfg.seed, {stream::shuffle, epoch});
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch_size)));
            auto l = batch_step(m, ds, rows, cfg.weights, &grads);
            if (!std::isfinite(l.energy) || !std::isfinite(l.congest) || !std::isfinite(l.status)) {
                std::ostringstream os;
                os << "non-finite loss in epoch " << epoch << " (energy " << l.energy << ", congest " << l.congest
                   << ", status " << l.status << "); batch hours";
                for (auto r : rows) os << ' ' << ds.target_hours[r];
                os << "; parameter norms:";
                for (const auto& p : m.params()) os << ' ' << p.name << '=' << p.value.array().matrix().norm();
                throw NonFiniteLossError(ErrorKind::Validation, os.str());
            }
            adam_step(pptr, grads, adam, as);
            rec.loss_energy += l.energy;
            rec.loss_congest += l.congest;
            rec.loss_status += l.status;
            ++batches;
        }
        rec.loss_energy /= static_cast<double>(batches);
        rec.loss_congest /= static_cast<double>(batches);
        rec.loss_status /= static_cast<double>(batches);
        rec.loss_total = loss_total(rec.loss_energy, rec.loss_congest, rec.loss_status, cfg.weights);
        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            rec.test = evaluate(m, ds);
            if (rec.test.rmse < res.best_rmse) {
                res.best_rmse = rec.test.rmse;
                res.best_epoch = epoch;
                res.best_params = m.params();
            }
        }
        res.history.push_back(rec);
        if (log) log(rec);
        as.lr *= cfg.lr_decay;
    }
    return res;
}

inline void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    csv::Writer w(path);
    w.header(std::vector<std::string>{"epoch", "loss_energy", "loss_congest", "loss_status", "loss_total", "test_mae",
                                      "test_rmse", "test_mape", "test_s_accuracy"});
    for (const auto& r : history)
        w.cell(r.epoch)
            .cell(r.loss_energy)
            .cell(r.loss_congest)
            .cell(r.loss_status)
            .cell(r.loss_total)
            .cell(r.test.mae)
            .cell(r.test.rmse)
            .cell(r.test.mape)
            .cell(r.test.s_accuracy)
            .end_row();
}

}  // namespace lmpcast::train
