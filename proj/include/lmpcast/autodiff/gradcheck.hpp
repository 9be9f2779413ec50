#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lmpcast/autodiff/tape.hpp"

namespace lmpcast::ad {

struct GradCheckSettings {
    double eps = 1e-5;
    double rel_tolerance = 1e-6;
    double abs_floor = 1e-8;         // denominator floor for the relative error
    std::size_t max_coords = 64;     // per parameter, sampled without replacement
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_raw_rel_error = 0.0;  // same ratio without the rounding allowance
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;  // coordinates where one-sided slopes disagree
    std::string worst;              // "param[i]: analytic vs numeric"
    bool ok(double tol) const { return max_rel_error <= tol; }
};

/// Builds a scalar loss on `tape` from the given parameter variables.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients with central differences.
inline GradCheckResult gradcheck(const LossBuilder& build, std::vector<Tensor> params, const GradCheckSettings& s = {}) {
    auto evaluate = [&](const std::vector<Tensor>& p) {
        Tape t;
        std::vector<Var> vs;
        for (const auto& x : p) vs.push_back(t.variable(x));
        return build(t, vs).value().item();
    };

    std::vector<Tensor> analytic;
    {
        Tape t;
        std::vector<Var> vs;
        for (const auto& x : params) vs.push_back(t.variable(x));
        Var loss = build(t, vs);
        t.backward(loss);
        for (const auto& v : vs) analytic.push_back(t.grad(v));
    }

    GradCheckResult r;
    std::mt19937_64 rng(s.seed);
    const double f0 = evaluate(params);
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<std::size_t> coords(params[p].size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        std::shuffle(coords.begin(), coords.end(), rng);
        std::size_t checked_here = 0;
        // Coordinates near a kink are replaced by the next sampled one.
        for (auto i : coords) {
            if (checked_here == s.max_coords) break;
            const double orig = params[p][i];
            params[p][i] = orig + s.eps;
            const double fp = evaluate(params);
            params[p][i] = orig - s.eps;
            const double fm = evaluate(params);
            params[p][i] = orig;
            const double numeric = (fp - fm) / (2 * s.eps);
            const double fwd = (fp - f0) / s.eps, bwd = (f0 - fm) / s.eps;
            const double scale_fb = std::max({std::abs(fwd), std::abs(bwd), 1.0});
            if (std::abs(fwd - bwd) > 1e-3 * scale_fb) {
                ++r.skipped_kinks;
                continue;
            }
            const double a = analytic[p][i];
            // Differences within the rounding error of the central difference carry no signal.
            const double noise = 100.0 * std::numeric_limits<double>::epsilon() *
                                 std::max({std::abs(fp), std::abs(fm), 1.0}) / s.eps;
            const double err = std::max(0.0, std::abs(a - numeric) - noise) /
                               std::max({std::abs(a), std::abs(numeric), s.abs_floor});
            r.max_raw_rel_error = std::max(r.max_raw_rel_error, std::abs(a - numeric) /
                                                                    std::max({std::abs(a), std::abs(numeric), s.abs_floor}));
            ++r.checked;
            ++checked_here;
            if (err > r.max_rel_error) {
                r.max_rel_error = err;
                char buf[96];
                std::snprintf(buf, sizeof buf, "param%zu[%zu]: %.6e vs %.6e", p, i, a, numeric);
                r.worst = buf;
            }
        }
    }
    return r;
}

}  // namespace lmpcast::ad
