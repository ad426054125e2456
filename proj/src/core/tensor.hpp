// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "core/status.hpp"

namespace arbiscale {

// Dense row-major tensor. Images and feature maps use HxWxC layout,
// coordinate batches use NxD. Owning, contiguous, no views.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(count(shape_)), T(0));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * dim(1) + j]; }
    const T& at(int i, int j) const { return data_[static_cast<std::size_t>(i) * dim(1) + j]; }

    T& at(int i, int j, int k) {
        return data_[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    const T& at(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }

    void reshape(std::vector<int> shape) {
        require(count(shape) == numel(), Status::kInvalidArgument,
                "reshape: element count mismatch");
        shape_ = std::move(shape);
    }

    Tensor reshaped(std::vector<int> shape) const {
        Tensor t = *this;
        t.reshape(std::move(shape));
        return t;
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
    void zero() { fill(T(0)); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor& operator+=(const Tensor& other) {
        require(same_shape(other), Status::kInvalidArgument, "tensor +=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Tensor& operator-=(const Tensor& other) {
        require(same_shape(other), Status::kInvalidArgument, "tensor -=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
        return *this;
    }

    Tensor& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    static std::int64_t count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            require(d >= 0, Status::kInvalidArgument, "tensor shape: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Map a contiguous tensor as a rows x cols row-major matrix.
template <typename T>
Eigen::Map<MatrixRM<T>> as_matrix(Tensor<T>& t, std::int64_t rows, std::int64_t cols) {
    require(rows * cols == t.numel(), Status::kInvalidArgument, "as_matrix: size mismatch");
    return Eigen::Map<MatrixRM<T>>(t.data(), rows, cols);
}

template <typename T>
Eigen::Map<const MatrixRM<T>> as_matrix(const Tensor<T>& t, std::int64_t rows,
                                        std::int64_t cols) {
    require(rows * cols == t.numel(), Status::kInvalidArgument, "as_matrix: size mismatch");
    return Eigen::Map<const MatrixRM<T>>(t.data(), rows, cols);
}

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
    a += b;
    return a;
}

template <typename T>
Tensor<T> operator-(Tensor<T> a, const Tensor<T>& b) {
    a -= b;
    return a;
}

template <typename T>
Tensor<T> operator*(Tensor<T> a, T s) {
    a *= s;
    return a;
}

template <typename T>
double mean_squared_error(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), Status::kInvalidArgument, "mse: shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return a.numel() > 0 ? acc / static_cast<double>(a.numel()) : 0.0;
}

template <typename T>
double squared_norm(const Tensor<T>& a) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    return acc;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), Status::kInvalidArgument, "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

// Relative L2 distance, ||a-b|| / max(||b||, tiny).
template <typename T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), Status::kInvalidArgument, "relative_error: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        num += d * d;
        den += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

template <typename T, typename U>
Tensor<T> cast_tensor(const Tensor<U>& src) {
    Tensor<T> out(src.shape());
    for (std::int64_t i = 0; i < src.numel(); ++i) out[i] = static_cast<T>(src[i]);
    return out;
}

} // namespace arbiscale
