#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lmpcast/common/error.hpp"

namespace lmpcast::ad {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

inline std::size_t element_count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles. A rank-0 shape holds one scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}
    Tensor(Shape shape, const std::vector<double>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (data_.size() != element_count(shape_))
            throw ValidationError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                  to_string(shape_));
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    // Aligned storage keeps Eigen's vectorized reductions in a fixed summation order,
    // so results do not depend on where the allocator placed the buffer.
    using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

    Storage& values() { return data_; }
    const Storage& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double item() const {
        if (data_.size() != 1) throw ValidationError("item() on tensor of shape " + to_string(shape_));
        return data_[0];
    }

    /// Element access by multi-index.
    double& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

    ArrayMap array() { return ArrayMap(data_.data(), static_cast<Eigen::Index>(data_.size())); }
    ConstArrayMap array() const { return ConstArrayMap(data_.data(), static_cast<Eigen::Index>(data_.size())); }

    /// View as a matrix with the given number of rows (columns = size / rows).
    MatrixMap matrix(std::size_t rows) {
        return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows ? size() / rows : 0));
    }
    ConstMatrixMap matrix(std::size_t rows) const {
        return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows),
                              static_cast<Eigen::Index>(rows ? size() / rows : 0));
    }

    Tensor reshaped(Shape s) const {
        if (element_count(s) != size())
            throw ValidationError("reshape " + to_string(shape_) + " -> " + to_string(s) + ": element count differs");
        Tensor t;
        t.shape_ = std::move(s);
        t.data_ = data_;
        return t;
    }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

private:
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) throw ValidationError("index rank mismatch for shape " + to_string(shape_));
        std::size_t off = 0, d = 0;
        for (auto i : idx) {
            if (i >= shape_[d]) throw ValidationError("index out of range for shape " + to_string(shape_));
            off = off * shape_[d++] + i;
        }
        return off;
    }

    Shape shape_;
    Storage data_;
};

}  // namespace lmpcast::ad
