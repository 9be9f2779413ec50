#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lmpcast/common/error.hpp"

namespace lmpcast::eval {

/// Node-hours with |gt| below this are left out of MAPE.
inline constexpr double kMapeFloor = 0.01;

struct MetricReport {
    double mae = 0.0;         // $/MWh
    double rmse = 0.0;        // $/MWh
    double mape = 0.0;        // percent
    double s_accuracy = 0.0;  // percent
    std::size_t count = 0;    // node-hours
    std::size_t mape_excluded = 0;
    Eigen::VectorXd node_mae, node_rmse;
};

inline MetricReport compute_metrics(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, const std::vector<int>& s_pred,
                                    const std::vector<int>& s_gt) {
    if (pred.size() == 0 || gt.size() == 0) throw ValidationError("compute_metrics: empty input");
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw ValidationError("compute_metrics: prediction is " + std::to_string(pred.rows()) + "x" +
                              std::to_string(pred.cols()) + ", ground truth " + std::to_string(gt.rows()) + "x" +
                              std::to_string(gt.cols()));
    if (s_pred.size() != s_gt.size()) throw ValidationError("compute_metrics: congestion flag lengths differ");
    MetricReport r;
    const Eigen::ArrayXXd d = (pred - gt).array();
    r.count = static_cast<std::size_t>(d.size());
    r.mae = d.abs().mean();
    r.rmse = std::sqrt(d.square().mean());
    double ape = 0.0;
    std::size_t used = 0;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            if (std::abs(gt(i, j)) < kMapeFloor) {
                ++r.mape_excluded;
                continue;
            }
            ape += std::abs(d(i, j) / gt(i, j));
            ++used;
        }
    r.mape = used ? 100.0 * ape / static_cast<double>(used) : 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < s_pred.size(); ++i) hits += s_pred[i] == s_gt[i];
    r.s_accuracy = s_pred.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(s_pred.size());
    r.node_mae = d.abs().colwise().mean().transpose();
    r.node_rmse = d.square().colwise().mean().sqrt().transpose();
    return r;
}

}  // namespace lmpcast::eval
