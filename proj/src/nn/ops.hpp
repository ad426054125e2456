// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "core/tensor.hpp"

namespace arbiscale::nn {

// Concatenate each location's 3x3 neighborhood (edge replicated). Channels
// are ordered neighbor-major: (dy,dx) row-major over the window, then the
// original channels within each slot.
template <typename T>
Tensor<T> unfold3x3(const Tensor<T>& x) {
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor<T> y({h, w, 9 * c});
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            T* dst = y.data() + (static_cast<std::int64_t>(r) * w + col) * 9 * c;
            for (int dy = -1; dy <= 1; ++dy) {
                const int sr = std::clamp(r + dy, 0, h - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sc = std::clamp(col + dx, 0, w - 1);
                    const T* src = x.data() + (static_cast<std::int64_t>(sr) * w + sc) * c;
                    std::copy(src, src + c, dst);
                    dst += c;
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> unfold3x3_backward(const Tensor<T>& gy, int h, int w, int c) {
    Tensor<T> gx({h, w, c});
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            const T* src = gy.data() + (static_cast<std::int64_t>(r) * w + col) * 9 * c;
            for (int dy = -1; dy <= 1; ++dy) {
                const int sr = std::clamp(r + dy, 0, h - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sc = std::clamp(col + dx, 0, w - 1);
                    T* dst = gx.data() + (static_cast<std::int64_t>(sr) * w + sc) * c;
                    for (int i = 0; i < c; ++i) dst[i] += src[i];
                    src += c;
                }
            }
        }
    }
    return gx;
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor<T> y({2 * h, 2 * w, c});
    for (int r = 0; r < 2 * h; ++r) {
        for (int col = 0; col < 2 * w; ++col) {
            const T* src = x.data() + (static_cast<std::int64_t>(r / 2) * w + col / 2) * c;
            T* dst = y.data() + (static_cast<std::int64_t>(r) * 2 * w + col) * c;
            std::copy(src, src + c, dst);
        }
    }
    return y;
}

template <typename T>
Tensor<T> upsample_nearest2x_backward(const Tensor<T>& gy) {
    const int oh = gy.dim(0), ow = gy.dim(1), c = gy.dim(2);
    const int h = oh / 2, w = ow / 2;
    Tensor<T> gx({h, w, c});
    for (int r = 0; r < oh; ++r) {
        for (int col = 0; col < ow; ++col) {
            const T* src = gy.data() + (static_cast<std::int64_t>(r) * ow + col) * c;
            T* dst = gx.data() + (static_cast<std::int64_t>(r / 2) * w + col / 2) * c;
            for (int i = 0; i < c; ++i) dst[i] += src[i];
        }
    }
    return gx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.dim(0) == b.dim(0) && a.dim(1) == b.dim(1), Status::kInvalidArgument,
            "concat_channels: spatial dims differ");
    const int h = a.dim(0), w = a.dim(1), ca = a.dim(2), cb = b.dim(2);
    Tensor<T> y({h, w, ca + cb});
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(h) * w; ++p) {
        std::copy(a.data() + p * ca, a.data() + (p + 1) * ca, y.data() + p * (ca + cb));
        std::copy(b.data() + p * cb, b.data() + (p + 1) * cb, y.data() + p * (ca + cb) + ca);
    }
    return y;
}

template <typename T>
void split_channels_backward(const Tensor<T>& gy, int ca, Tensor<T>& ga, Tensor<T>& gb) {
    const int h = gy.dim(0), w = gy.dim(1), c = gy.dim(2);
    const int cb = c - ca;
    ga = Tensor<T>({h, w, ca});
    gb = Tensor<T>({h, w, cb});
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(h) * w; ++p) {
        std::copy(gy.data() + p * c, gy.data() + p * c + ca, ga.data() + p * ca);
        std::copy(gy.data() + p * c + ca, gy.data() + (p + 1) * c, gb.data() + p * cb);
    }
}

} // namespace arbiscale::nn
