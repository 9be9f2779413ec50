#pragma once

#include <cmath>
#include <random>

#include "lmpcast/autodiff/tensor.hpp"
#include "lmpcast/common/random.hpp"

namespace lmpcast::train {

inline double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0) / std::sqrt(static_cast<double>(fan_in + fan_out));
}

/// Uniform samples in [-b, b] with b = sqrt(6) / sqrt(fan_in + fan_out).
inline ad::Tensor xavier_init(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw ValidationError("xavier_init: fans must be >= 1");
    const double b = xavier_bound(fan_in, fan_out);
    std::uniform_real_distribution<double> u(-b, b);
    ad::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
    return t;
}

inline ad::Tensor xavier_init(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
    Rng rng = make_rng(seed, {stream::init});
    return xavier_init(std::move(shape), fan_in, fan_out, rng);
}

}  // namespace lmpcast::train
