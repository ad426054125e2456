// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace arbiscale::nn {

using arbiscale::Tensor;

// Named handle onto a parameter tensor and its gradient accumulator. The
// flat registry drives the optimizer, serialization and gradient checks.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;
};

template <typename T>
void zero_grads(std::vector<ParamRef<T>>& params) {
    for (auto& p : params) p.grad->zero();
}

template <typename T>
std::int64_t param_count(const std::vector<ParamRef<T>>& params) {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.value->numel();
    return n;
}

enum class Act { kRelu, kSilu };

template <typename T>
inline T act_eval(Act a, T x) {
    if (a == Act::kRelu) return x > T(0) ? x : T(0);
    const T s = T(1) / (T(1) + std::exp(-x));
    return x * s;
}

template <typename T>
inline T act_grad(Act a, T x) {
    if (a == Act::kRelu) return x > T(0) ? T(1) : T(0);
    const T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

// Elementwise activation with cached input. Layers are single-writer during
// training; apply() is the pure inference path.
template <typename T>
class ActLayer {
public:
    explicit ActLayer(Act kind = Act::kSilu) : kind_(kind) {}

    Act kind() const { return kind_; }
    void set_kind(Act kind) { kind_ = kind; }

    Tensor<T> apply(const Tensor<T>& x) const {
        Tensor<T> y(x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = act_eval(kind_, x[i]);
        return y;
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (train) x_ = x;
        return apply(x);
    }

    Tensor<T> backward(const Tensor<T>& gy) const {
        Tensor<T> gx(gy.shape());
        for (std::int64_t i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * act_grad(kind_, x_[i]);
        return gx;
    }

private:
    Act kind_;
    Tensor<T> x_;
};

// Fully connected layer over row batches: y = x W + b, x is [N, in].
template <typename T>
class Linear {
public:
    Linear() = default;

    Linear(int in_features, int out_features)
        : in_(in_features), out_(out_features), weight_({in_features, out_features}),
          bias_({out_features}), gweight_({in_features, out_features}), gbias_({out_features}) {}

    void init_he(Rng& rng) {
        const double std = std::sqrt(2.0 / in_);
        for (std::int64_t i = 0; i < weight_.numel(); ++i)
            weight_[i] = static_cast<T>(rng.normal() * std);
        bias_.zero();
    }

    void init_zero() {
        weight_.zero();
        bias_.zero();
    }

    int in_features() const { return in_; }
    int out_features() const { return out_; }

    Tensor<T> apply(const Tensor<T>& x) const {
        const std::int64_t n = x.numel() / in_;
        Tensor<T> y({static_cast<int>(n), out_});
        auto ym = as_matrix(y, n, out_);
        ym.noalias() = as_matrix(x, n, in_) * as_matrix(weight_, in_, out_);
        ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.data(), out_);
        return y;
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (train) x_ = x;
        return apply(x);
    }

    Tensor<T> backward(const Tensor<T>& gy, bool accumulate_param_grads = true) {
        const std::int64_t n = gy.numel() / out_;
        if (accumulate_param_grads) {
            as_matrix(gweight_, in_, out_).noalias() +=
                as_matrix(x_, n, in_).transpose() * as_matrix(gy, n, out_);
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gbias_.data(), out_) +=
                as_matrix(gy, n, out_).colwise().sum();
        }
        Tensor<T> gx({static_cast<int>(n), in_});
        as_matrix(gx, n, in_).noalias() =
            as_matrix(gy, n, out_) * as_matrix(weight_, in_, out_).transpose();
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".weight", &weight_, &gweight_});
        out.push_back({prefix + ".bias", &bias_, &gbias_});
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    int in_ = 0, out_ = 0;
    Tensor<T> weight_, bias_;
    Tensor<T> gweight_, gbias_;
    Tensor<T> x_;
};

// 2D convolution over HWC tensors via im2col and a single GEMM.
template <typename T>
class Conv2d {
public:
    Conv2d() = default;

    Conv2d(int in_ch, int out_ch, int ksize, int stride = 1, int pad = -1)
        : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride),
          pad_(pad >= 0 ? pad : ksize / 2), weight_({ksize * ksize * in_ch, out_ch}),
          bias_({out_ch}), gweight_({ksize * ksize * in_ch, out_ch}), gbias_({out_ch}) {}

    void init_he(Rng& rng) {
        const double std = std::sqrt(2.0 / (k_ * k_ * in_ch_));
        for (std::int64_t i = 0; i < weight_.numel(); ++i)
            weight_[i] = static_cast<T>(rng.normal() * std);
        bias_.zero();
    }

    void init_zero() {
        weight_.zero();
        bias_.zero();
    }

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

    Tensor<T> apply(const Tensor<T>& x) const {
        Tensor<T> cols;
        return run_forward(x, cols);
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (train) {
            in_h_ = x.dim(0);
            in_w_ = x.dim(1);
            return run_forward(x, cols_);
        }
        return apply(x);
    }

    Tensor<T> backward(const Tensor<T>& gy, bool accumulate_param_grads = true) {
        const int oh = gy.dim(0), ow = gy.dim(1);
        const std::int64_t rows = static_cast<std::int64_t>(oh) * ow;
        const int patch = k_ * k_ * in_ch_;
        if (accumulate_param_grads) {
            as_matrix(gweight_, patch, out_ch_).noalias() +=
                as_matrix(cols_, rows, patch).transpose() * as_matrix(gy, rows, out_ch_);
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gbias_.data(), out_ch_) +=
                as_matrix(gy, rows, out_ch_).colwise().sum();
        }
        Tensor<T> gcols({static_cast<int>(rows), patch});
        as_matrix(gcols, rows, patch).noalias() =
            as_matrix(gy, rows, out_ch_) * as_matrix(weight_, patch, out_ch_).transpose();
        return col2im(gcols, oh, ow);
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".weight", &weight_, &gweight_});
        out.push_back({prefix + ".bias", &bias_, &gbias_});
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    Tensor<T> run_forward(const Tensor<T>& x, Tensor<T>& cols) const {
        require(x.rank() == 3 && x.dim(2) == in_ch_, Status::kInvalidArgument,
                "conv2d: input channel mismatch");
        const int h = x.dim(0), w = x.dim(1);
        const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
        const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
        require(oh >= 1 && ow >= 1, Status::kInvalidArgument, "conv2d: input too small");
        im2col(x, oh, ow, cols);
        const std::int64_t rows = static_cast<std::int64_t>(oh) * ow;
        const int patch = k_ * k_ * in_ch_;
        Tensor<T> y({oh, ow, out_ch_});
        auto ym = as_matrix(y, rows, out_ch_);
        ym.noalias() = as_matrix(cols, rows, patch) * as_matrix(weight_, patch, out_ch_);
        ym.rowwise() +=
            Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.data(), out_ch_);
        return y;
    }

    void im2col(const Tensor<T>& x, int oh, int ow, Tensor<T>& cols) const {
        const int h = x.dim(0), w = x.dim(1);
        const int patch = k_ * k_ * in_ch_;
        cols = Tensor<T>({oh * ow, patch});
        T* dst = cols.data();
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int ky = 0; ky < k_; ++ky) {
                    const int iy = oy * stride_ - pad_ + ky;
                    for (int kx = 0; kx < k_; ++kx) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                            const T* src = x.data() + (static_cast<std::int64_t>(iy) * w + ix) * in_ch_;
                            std::copy(src, src + in_ch_, dst);
                        } else {
                            std::fill(dst, dst + in_ch_, T(0));
                        }
                        dst += in_ch_;
                    }
                }
            }
        }
    }

    Tensor<T> col2im(const Tensor<T>& gcols, int oh, int ow) const {
        Tensor<T> gx({in_h_, in_w_, in_ch_});
        const T* src = gcols.data();
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int ky = 0; ky < k_; ++ky) {
                    const int iy = oy * stride_ - pad_ + ky;
                    for (int kx = 0; kx < k_; ++kx) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (iy >= 0 && iy < in_h_ && ix >= 0 && ix < in_w_) {
                            T* dst =
                                gx.data() + (static_cast<std::int64_t>(iy) * in_w_ + ix) * in_ch_;
                            for (int c = 0; c < in_ch_; ++c) dst[c] += src[c];
                        }
                        src += in_ch_;
                    }
                }
            }
        }
        return gx;
    }

    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Tensor<T> weight_, bias_;
    Tensor<T> gweight_, gbias_;
    Tensor<T> cols_;
    int in_h_ = 0, in_w_ = 0;
};

// GroupNorm over HWC maps: statistics per channel group across all spatial
// positions, affine scale and shift per channel.
template <typename T>
class GroupNorm {
public:
    GroupNorm() = default;

    GroupNorm(int channels, int groups, double eps = 1e-6)
        : ch_(channels), groups_(groups), eps_(eps), gamma_({channels}), beta_({channels}),
          ggamma_({channels}), gbeta_({channels}) {
        require(channels % groups == 0, Status::kInvalidArgument,
                "group_norm: channels must divide evenly into groups");
        gamma_.fill(T(1));
        beta_.zero();
    }

    Tensor<T> apply(const Tensor<T>& x) const {
        Tensor<T> xhat, y;
        std::vector<double> inv;
        run_forward(x, xhat, inv, y);
        return y;
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (train) {
            Tensor<T> y;
            run_forward(x, xhat_, inv_, y);
            return y;
        }
        return apply(x);
    }

    Tensor<T> backward(const Tensor<T>& gy, bool accumulate_param_grads = true) {
        const int h = gy.dim(0), w = gy.dim(1);
        const int cg = ch_ / groups_;
        const std::int64_t hw = static_cast<std::int64_t>(h) * w;
        Tensor<T> gx({h, w, ch_});
        for (int g = 0; g < groups_; ++g) {
            const double m = static_cast<double>(hw) * cg;
            double s1 = 0.0, s2 = 0.0;
            for (std::int64_t p = 0; p < hw; ++p) {
                const T* gyp = gy.data() + p * ch_ + g * cg;
                const T* xh = xhat_.data() + p * ch_ + g * cg;
                for (int c = 0; c < cg; ++c) {
                    const double gg = static_cast<double>(gyp[c]) * gamma_[g * cg + c];
                    s1 += gg;
                    s2 += gg * xh[c];
                }
            }
            s1 /= m;
            s2 /= m;
            for (std::int64_t p = 0; p < hw; ++p) {
                const T* gyp = gy.data() + p * ch_ + g * cg;
                const T* xh = xhat_.data() + p * ch_ + g * cg;
                T* gxp = gx.data() + p * ch_ + g * cg;
                for (int c = 0; c < cg; ++c) {
                    const double gg = static_cast<double>(gyp[c]) * gamma_[g * cg + c];
                    gxp[c] = static_cast<T>(inv_[g] * (gg - s1 - xh[c] * s2));
                }
            }
        }
        if (accumulate_param_grads) {
            for (std::int64_t p = 0; p < hw; ++p) {
                const T* gyp = gy.data() + p * ch_;
                const T* xh = xhat_.data() + p * ch_;
                for (int c = 0; c < ch_; ++c) {
                    ggamma_[c] += gyp[c] * xh[c];
                    gbeta_[c] += gyp[c];
                }
            }
        }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
        out.push_back({prefix + ".beta", &beta_, &gbeta_});
    }

private:
    void run_forward(const Tensor<T>& x, Tensor<T>& xhat, std::vector<double>& inv,
                     Tensor<T>& y) const {
        require(x.rank() == 3 && x.dim(2) == ch_, Status::kInvalidArgument,
                "group_norm: channel mismatch");
        const int h = x.dim(0), w = x.dim(1);
        const int cg = ch_ / groups_;
        const std::int64_t hw = static_cast<std::int64_t>(h) * w;
        xhat = Tensor<T>({h, w, ch_});
        y = Tensor<T>({h, w, ch_});
        inv.assign(groups_, 0.0);
        for (int g = 0; g < groups_; ++g) {
            const double m = static_cast<double>(hw) * cg;
            double mean = 0.0;
            for (std::int64_t p = 0; p < hw; ++p) {
                const T* xp = x.data() + p * ch_ + g * cg;
                for (int c = 0; c < cg; ++c) mean += xp[c];
            }
            mean /= m;
            double var = 0.0;
            for (std::int64_t p = 0; p < hw; ++p) {
                const T* xp = x.data() + p * ch_ + g * cg;
                for (int c = 0; c < cg; ++c) {
                    const double d = xp[c] - mean;
                    var += d * d;
                }
            }
            var /= m;
            const double istd = 1.0 / std::sqrt(var + eps_);
            inv[g] = istd;
            for (std::int64_t p = 0; p < hw; ++p) {
                const T* xp = x.data() + p * ch_ + g * cg;
                T* xhp = xhat.data() + p * ch_ + g * cg;
                T* yp = y.data() + p * ch_ + g * cg;
                for (int c = 0; c < cg; ++c) {
                    const double xn = (xp[c] - mean) * istd;
                    xhp[c] = static_cast<T>(xn);
                    yp[c] = static_cast<T>(xn * gamma_[g * cg + c] + beta_[g * cg + c]);
                }
            }
        }
    }

    int ch_ = 0, groups_ = 1;
    double eps_ = 1e-6;
    Tensor<T> gamma_, beta_;
    Tensor<T> ggamma_, gbeta_;
    Tensor<T> xhat_;
    std::vector<double> inv_;
};

} // namespace arbiscale::nn
