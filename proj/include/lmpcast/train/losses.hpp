#pragma once

#include "lmpcast/autodiff/ops.hpp"

namespace lmpcast::train {

using ad::Var;

struct LossWeights {
    double energy = 1.0;
    double congest = 10.0;
    double status = 100.0;
};

/// Batch mean of ||d||_1 + l2_weight ||d||_2 with d = pred - gt per group of
/// `group` consecutive values (a sample, or a single node of a per-node model).
inline Var residual_loss(Var pred, Var gt, double l2_weight, std::size_t batch, std::size_t group) {
    if (pred.shape() != gt.shape())
        throw ValidationError("loss: prediction " + ad::to_string(pred.shape()) + " vs ground truth " + ad::to_string(gt.shape()));
    const std::size_t n = pred.value().size();
    if (group == 0 || n % group != 0 || batch == 0) throw ValidationError("loss: invalid grouping");
    auto d = ad::sub(pred, gt);
    auto l2 = ad::sum(ad::row_l2_norm(ad::reshape(d, {n / group, group})));
    return ad::scale(ad::add(ad::l1_norm(d), ad::scale(l2, l2_weight)), 1.0 / static_cast<double>(batch));
}

/// ||d||_1 + ||d||_2, averaged over the batch; pred and gt are [B, D].
inline Var loss_energy(Var pred, Var gt) {
    const auto& s = pred.shape();
    return residual_loss(pred, gt, 1.0, s.at(0), pred.value().size() / s.at(0));
}

/// ||d||_1 + 2 ||d||_2, averaged over the batch.
inline Var loss_congest(Var pred, Var gt) {
    const auto& s = pred.shape();
    return residual_loss(pred, gt, 2.0, s.at(0), pred.value().size() / s.at(0));
}

/// Cross-entropy of [..., 2] logits against binary labels, one label per logit row.
inline Var loss_status(Var logits, const std::vector<int>& labels) {
    const auto& s = logits.shape();
    if (s.empty() || s.back() != 2) throw ValidationError("loss_status: logits must end in 2 classes, got " + ad::to_string(s));
    const std::size_t rows = logits.value().size() / 2;
    return ad::cross_entropy(ad::reshape(logits, {rows, 2}), labels);
}

inline double loss_total(double e, double c, double s, const LossWeights& w = {}) {
    return w.energy * e + w.congest * c + w.status * s;
}

inline Var loss_total(Var e, Var c, Var s, const LossWeights& w = {}) {
    return ad::add(ad::add(ad::scale(e, w.energy), ad::scale(c, w.congest)), ad::scale(s, w.status));
}

}  // namespace lmpcast::train
