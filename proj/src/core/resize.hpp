// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "core/tensor.hpp"

namespace arbiscale {

enum class ResizeFilter { kBilinear, kBicubic };

namespace detail {

inline double cubic_kernel(double x) {
    // Keys cubic, a = -0.5 (the common bicubic convolution kernel).
    x = std::abs(x);
    if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
    if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
    return 0.0;
}

inline double linear_kernel(double x) {
    x = std::abs(x);
    return x < 1.0 ? 1.0 - x : 0.0;
}

struct ResampleTap {
    int first = 0;                  // first source index (clamped later)
    std::vector<double> weights;    // normalized to sum 1
};

// Precompute per-output-index taps along one axis. Half-pixel centers; when
// downscaling with antialias the kernel support widens by the scale ratio.
inline std::vector<ResampleTap> make_taps(int in_n, int out_n, ResizeFilter filter,
                                          bool antialias) {
    const double scale = static_cast<double>(out_n) / in_n;
    const double base_support = filter == ResizeFilter::kBicubic ? 2.0 : 1.0;
    const double kscale = (antialias && scale < 1.0) ? scale : 1.0;
    const double support = base_support / kscale;
    std::vector<ResampleTap> taps(static_cast<std::size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
        const double center = (o + 0.5) / scale - 0.5;
        const int lo = static_cast<int>(std::floor(center - support + 1e-9));
        const int hi = static_cast<int>(std::ceil(center + support - 1e-9));
        ResampleTap tap;
        tap.first = lo;
        tap.weights.reserve(static_cast<std::size_t>(hi - lo + 1));
        double sum = 0.0;
        for (int i = lo; i <= hi; ++i) {
            const double x = (center - i) * kscale;
            const double w = filter == ResizeFilter::kBicubic ? cubic_kernel(x)
                                                              : linear_kernel(x);
            tap.weights.push_back(w);
            sum += w;
        }
        if (sum != 0.0)
            for (auto& w : tap.weights) w /= sum;
        taps[static_cast<std::size_t>(o)] = std::move(tap);
    }
    return taps;
}

} // namespace detail

// Separable resampling of an HxWxC tensor. Boundaries replicate. Antialias
// widens the kernel when downscaling (the DIV2K-style bicubic convention).
template <typename T>
Tensor<T> resize(const Tensor<T>& img, int out_h, int out_w, ResizeFilter filter,
                 bool antialias = true) {
    require(img.rank() == 3, Status::kInvalidArgument, "resize: expected HxWxC input");
    require(out_h >= 1 && out_w >= 1, Status::kInvalidArgument,
            "resize: output dims must be positive");
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);

    // Rows first.
    const auto row_taps = detail::make_taps(h, out_h, filter, antialias);
    Tensor<T> tmp({out_h, w, c});
    const std::int64_t row_len = static_cast<std::int64_t>(w) * c;
    for (int o = 0; o < out_h; ++o) {
        const auto& tap = row_taps[static_cast<std::size_t>(o)];
        T* dst = tmp.data() + static_cast<std::int64_t>(o) * row_len;
        std::vector<double> acc(static_cast<std::size_t>(row_len), 0.0);
        for (std::size_t k = 0; k < tap.weights.size(); ++k) {
            const int src_r = std::clamp(tap.first + static_cast<int>(k), 0, h - 1);
            const T* src = img.data() + static_cast<std::int64_t>(src_r) * row_len;
            const double wk = tap.weights[k];
            for (std::int64_t i = 0; i < row_len; ++i) acc[static_cast<std::size_t>(i)] += wk * src[i];
        }
        for (std::int64_t i = 0; i < row_len; ++i) dst[i] = static_cast<T>(acc[static_cast<std::size_t>(i)]);
    }

    // Then columns.
    const auto col_taps = detail::make_taps(w, out_w, filter, antialias);
    Tensor<T> out({out_h, out_w, c});
    std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
    for (int r = 0; r < out_h; ++r) {
        const T* row = tmp.data() + static_cast<std::int64_t>(r) * row_len;
        for (int o = 0; o < out_w; ++o) {
            const auto& tap = col_taps[static_cast<std::size_t>(o)];
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t k = 0; k < tap.weights.size(); ++k) {
                const int src_c = std::clamp(tap.first + static_cast<int>(k), 0, w - 1);
                const T* src = row + static_cast<std::int64_t>(src_c) * c;
                const double wk = tap.weights[k];
                for (int i = 0; i < c; ++i) acc[static_cast<std::size_t>(i)] += wk * src[i];
            }
            T* dst = out.data() + (static_cast<std::int64_t>(r) * out_w + o) * c;
            for (int i = 0; i < c; ++i) dst[i] = static_cast<T>(acc[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

} // namespace arbiscale
