// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "core/resize.hpp"
#include "nn/layers.hpp"
#include "nn/ops.hpp"

namespace arbiscale {

enum class CondInjection { kInputConcat, kPerBlock };

struct DenoiserConfig {
    int latent_channels = 16;
    int base_width = 64;
    std::vector<int> channel_mult = {1, 2, 2};
    int res_per_level = 2;
    int norm_groups = 8;
    int cond_channels = 0; // 0 = unconditional
    CondInjection cond_injection = CondInjection::kInputConcat;
    int temb_dim = 0; // 0 -> 4 * base_width

    int embed_dim() const { return temb_dim > 0 ? temb_dim : 4 * base_width; }
    int levels() const { return static_cast<int>(channel_mult.size()); }
    int width(int level) const { return base_width * channel_mult[static_cast<std::size_t>(level)]; }

    void validate() const {
        require(latent_channels >= 1, Status::kConfig, "denoiser.latent_channels must be >= 1");
        require(base_width >= 1, Status::kConfig, "denoiser.base_width must be >= 1");
        require(!channel_mult.empty(), Status::kConfig, "denoiser.channel_mult must be non-empty");
        require(res_per_level >= 1, Status::kConfig, "denoiser.res_per_level must be >= 1");
        for (int l = 0; l < levels(); ++l)
            require(width(l) % norm_groups == 0, Status::kConfig,
                    "denoiser.norm_groups must divide every level width");
        require(cond_channels >= 0, Status::kConfig, "denoiser.cond_channels must be >= 0");
    }
};

// Sinusoidal step embedding followed by a two-layer MLP.
template <typename T>
class TimeEmbedding {
public:
    TimeEmbedding() = default;

    TimeEmbedding(int sin_dim, int out_dim)
        : sin_dim_(sin_dim), fc1_(sin_dim, out_dim), fc2_(out_dim, out_dim) {}

    void init(Rng& rng) {
        fc1_.init_he(rng);
        fc2_.init_he(rng);
    }

    Tensor<T> sinusoid(double t) const {
        Tensor<T> e({1, sin_dim_});
        const int half = sin_dim_ / 2;
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            e.at(0, i) = static_cast<T>(std::sin(t * freq));
            e.at(0, half + i) = static_cast<T>(std::cos(t * freq));
        }
        return e;
    }

    Tensor<T> apply(double t) const { return fc2_.apply(act_.apply(fc1_.apply(sinusoid(t)))); }

    Tensor<T> forward(double t, bool train) {
        if (!train) return apply(t);
        return fc2_.forward(act_.forward(fc1_.forward(sinusoid(t), true), true), true);
    }

    void backward(const Tensor<T>& gy, bool accumulate_param_grads = true) {
        fc1_.backward(act_.backward(fc2_.backward(gy, accumulate_param_grads)),
                      accumulate_param_grads);
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        fc1_.collect(prefix + ".fc1", out);
        fc2_.collect(prefix + ".fc2", out);
    }

private:
    int sin_dim_ = 0;
    nn::Linear<T> fc1_;
    nn::ActLayer<T> act_;
    nn::Linear<T> fc2_;
};

// Residual block with a per-channel time-embedding shift injected between
// the two convolutions. The second conv starts at zero.
template <typename T>
class ResBlockT {
public:
    ResBlockT() = default;

    ResBlockT(int in_ch, int out_ch, int temb_dim, int groups, nn::Act act = nn::Act::kSilu)
        : out_ch_(out_ch), gn1_(in_ch, groups), act1_(act), conv1_(in_ch, out_ch, 3),
          temb_act_(act), temb_proj_(temb_dim, out_ch), gn2_(out_ch, groups), act2_(act),
          conv2_(out_ch, out_ch, 3), project_(in_ch != out_ch) {
        if (project_) skip_ = nn::Conv2d<T>(in_ch, out_ch, 1, 1, 0);
    }

    void init(Rng& rng) {
        conv1_.init_he(rng);
        temb_proj_.init_he(rng);
        conv2_.init_zero();
        if (project_) skip_.init_he(rng);
    }

    Tensor<T> apply(const Tensor<T>& x, const Tensor<T>& temb) const {
        Tensor<T> h = conv1_.apply(act1_.apply(gn1_.apply(x)));
        add_shift(h, temb_proj_.apply(temb_act_.apply(temb)));
        h = conv2_.apply(act2_.apply(gn2_.apply(h)));
        return h + (project_ ? skip_.apply(x) : x);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& temb, bool train) {
        if (!train) return apply(x, temb);
        Tensor<T> h = conv1_.forward(act1_.forward(gn1_.forward(x, true), true), true);
        add_shift(h, temb_proj_.forward(temb_act_.forward(temb, true), true));
        h = conv2_.forward(act2_.forward(gn2_.forward(h, true), true), true);
        return h + (project_ ? skip_.forward(x, true) : x);
    }

    Tensor<T> backward(const Tensor<T>& gy, Tensor<T>& gtemb, bool accumulate_param_grads = true) {
        Tensor<T> g = conv2_.backward(gy, accumulate_param_grads);
        g = gn2_.backward(act2_.backward(g), accumulate_param_grads);
        // Time path: the broadcast add fans the per-channel shift across space.
        Tensor<T> gshift({1, out_ch_});
        const std::int64_t hw = static_cast<std::int64_t>(g.dim(0)) * g.dim(1);
        for (std::int64_t p = 0; p < hw; ++p)
            for (int c = 0; c < out_ch_; ++c) gshift[c] += g.data()[p * out_ch_ + c];
        gtemb += temb_act_.backward(temb_proj_.backward(gshift, accumulate_param_grads));
        g = conv1_.backward(g, accumulate_param_grads);
        Tensor<T> gx = gn1_.backward(act1_.backward(g), accumulate_param_grads);
        gx += project_ ? skip_.backward(gy, accumulate_param_grads) : gy;
        return gx;
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        gn1_.collect(prefix + ".gn1", out);
        conv1_.collect(prefix + ".conv1", out);
        temb_proj_.collect(prefix + ".temb", out);
        gn2_.collect(prefix + ".gn2", out);
        conv2_.collect(prefix + ".conv2", out);
        if (project_) skip_.collect(prefix + ".skip", out);
    }

private:
    static void add_shift(Tensor<T>& h, const Tensor<T>& shift) {
        const int c = h.dim(2);
        const std::int64_t hw = static_cast<std::int64_t>(h.dim(0)) * h.dim(1);
        for (std::int64_t p = 0; p < hw; ++p)
            for (int i = 0; i < c; ++i) h.data()[p * c + i] += shift[i];
    }

    int out_ch_ = 0;
    nn::GroupNorm<T> gn1_;
    nn::ActLayer<T> act1_;
    nn::Conv2d<T> conv1_;
    nn::ActLayer<T> temb_act_;
    nn::Linear<T> temb_proj_;
    nn::GroupNorm<T> gn2_;
    nn::ActLayer<T> act2_;
    nn::Conv2d<T> conv2_;
    bool project_ = false;
    nn::Conv2d<T> skip_;
};

// Convolutional encoder-decoder over the latent grid with skip connections,
// a time embedding added per block, and optional LR conditioning channels.
template <typename T>
class DenoiserUnet {
public:
    DenoiserUnet() = default;

    explicit DenoiserUnet(const DenoiserConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        const int L = cfg.levels();
        const int R = cfg.res_per_level;
        const int td = cfg.embed_dim();
        const int cond_in =
            cfg.cond_injection == CondInjection::kInputConcat ? cfg.cond_channels : 0;
        const int cond_blk =
            cfg.cond_injection == CondInjection::kPerBlock ? cfg.cond_channels : 0;
        temb_ = TimeEmbedding<T>(cfg.base_width, td);
        conv_in_ = nn::Conv2d<T>(cfg.latent_channels + cond_in, cfg.width(0), 3);
        down_blocks_.resize(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l) {
            for (int r = 0; r < R; ++r) {
                const int in = cfg.width(l) + (r == 0 ? cond_blk : 0);
                down_blocks_[static_cast<std::size_t>(l)].emplace_back(in, cfg.width(l), td,
                                                                       cfg.norm_groups);
            }
            if (l < L - 1) down_convs_.emplace_back(cfg.width(l), cfg.width(l + 1), 3, 2);
        }
        mid1_ = ResBlockT<T>(cfg.width(L - 1), cfg.width(L - 1), td, cfg.norm_groups);
        mid2_ = ResBlockT<T>(cfg.width(L - 1), cfg.width(L - 1), td, cfg.norm_groups);
        up_blocks_.resize(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l) {
            for (int r = 0; r <= R; ++r)
                up_blocks_[static_cast<std::size_t>(l)].emplace_back(2 * cfg.width(l),
                                                                     cfg.width(l), td,
                                                                     cfg.norm_groups);
            if (l > 0) up_convs_.emplace_back(cfg.width(l), cfg.width(l - 1), 3, 1);
        }
        gn_out_ = nn::GroupNorm<T>(cfg.width(0), cfg.norm_groups);
        conv_out_ = nn::Conv2d<T>(cfg.width(0), cfg.latent_channels, 3);
    }

    void init(Rng& rng) {
        temb_.init(rng);
        conv_in_.init_he(rng);
        for (auto& level : down_blocks_)
            for (auto& b : level) b.init(rng);
        for (auto& c : down_convs_) c.init_he(rng);
        mid1_.init(rng);
        mid2_.init(rng);
        for (auto& level : up_blocks_)
            for (auto& b : level) b.init(rng);
        for (auto& c : up_convs_) c.init_he(rng);
        conv_out_.init_zero();
    }

    const DenoiserConfig& config() const { return cfg_; }

    Tensor<T> apply(const Tensor<T>& z, int t, const Tensor<T>& cond) const {
        return const_cast<DenoiserUnet*>(this)->run(z, t, cond, false);
    }

    Tensor<T> forward(const Tensor<T>& z, int t, const Tensor<T>& cond, bool train) {
        return run(z, t, cond, train);
    }

    // Parameter gradients only; the input gradient is discarded.
    void backward(const Tensor<T>& geps, bool accumulate_param_grads = true) {
        const int L = cfg_.levels();
        const int R = cfg_.res_per_level;
        Tensor<T> gtemb({1, cfg_.embed_dim()});
        Tensor<T> g = conv_out_.backward(geps, accumulate_param_grads);
        g = gn_out_.backward(act_out_.backward(g), accumulate_param_grads);
        std::vector<Tensor<T>> gskips;
        for (int l = 0; l < L; ++l) {
            if (l > 0)
                g = nn::upsample_nearest2x_backward(
                    up_convs_[static_cast<std::size_t>(l - 1)].backward(g,
                                                                        accumulate_param_grads));
            for (int r = R; r >= 0; --r) {
                Tensor<T> gin = up_blocks_[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)]
                                    .backward(g, gtemb, accumulate_param_grads);
                Tensor<T> gh, gs;
                nn::split_channels_backward(gin, cfg_.width(l), gh, gs);
                gskips.push_back(std::move(gs));
                g = std::move(gh);
            }
        }
        g = mid1_.backward(mid2_.backward(g, gtemb, accumulate_param_grads), gtemb,
                           accumulate_param_grads);
        const int cond_blk =
            cfg_.cond_injection == CondInjection::kPerBlock ? cfg_.cond_channels : 0;
        for (int l = L - 1; l >= 0; --l) {
            if (l < L - 1) {
                g += pop(gskips);
                g = down_convs_[static_cast<std::size_t>(l)].backward(g, accumulate_param_grads);
            }
            for (int r = R - 1; r >= 0; --r) {
                g += pop(gskips);
                g = down_blocks_[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)]
                        .backward(g, gtemb, accumulate_param_grads);
                if (cond_blk > 0 && r == 0) {
                    Tensor<T> gh, gc;
                    nn::split_channels_backward(g, g.dim(2) - cond_blk, gh, gc);
                    g = std::move(gh);
                }
            }
        }
        g += pop(gskips);
        conv_in_.backward(g, accumulate_param_grads);
        require(gskips.empty(), Status::kInternal, "denoiser backward: skip stack imbalance");
        temb_.backward(gtemb, accumulate_param_grads);
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        temb_.collect(prefix + ".temb", out);
        conv_in_.collect(prefix + ".conv_in", out);
        for (std::size_t l = 0; l < down_blocks_.size(); ++l)
            for (std::size_t r = 0; r < down_blocks_[l].size(); ++r)
                down_blocks_[l][r].collect(
                    prefix + ".down" + std::to_string(l) + ".block" + std::to_string(r), out);
        for (std::size_t l = 0; l < down_convs_.size(); ++l)
            down_convs_[l].collect(prefix + ".down" + std::to_string(l) + ".conv", out);
        mid1_.collect(prefix + ".mid1", out);
        mid2_.collect(prefix + ".mid2", out);
        for (std::size_t l = 0; l < up_blocks_.size(); ++l)
            for (std::size_t r = 0; r < up_blocks_[l].size(); ++r)
                up_blocks_[l][r].collect(
                    prefix + ".up" + std::to_string(l) + ".block" + std::to_string(r), out);
        for (std::size_t l = 0; l < up_convs_.size(); ++l)
            up_convs_[l].collect(prefix + ".up" + std::to_string(l + 1) + ".conv", out);
        gn_out_.collect(prefix + ".gn_out", out);
        conv_out_.collect(prefix + ".conv_out", out);
    }

private:
    static Tensor<T> pop(std::vector<Tensor<T>>& stack) {
        require(!stack.empty(), Status::kInternal, "denoiser backward: skip stack underflow");
        Tensor<T> t = std::move(stack.back());
        stack.pop_back();
        return t;
    }

    Tensor<T> run(const Tensor<T>& z, int t, const Tensor<T>& cond, bool train) {
        require(z.rank() == 3 && z.dim(2) == cfg_.latent_channels, Status::kInvalidArgument,
                "denoiser: latent channel mismatch");
        if (cfg_.cond_channels > 0) {
            require(!cond.empty() && cond.dim(0) == z.dim(0) && cond.dim(1) == z.dim(1) &&
                        cond.dim(2) == cfg_.cond_channels,
                    Status::kInvalidArgument,
                    "denoiser: conditioning shape must match the latent grid");
        } else {
            require(cond.empty(), Status::kInvalidArgument,
                    "denoiser: unexpected conditioning input for an unconditional model");
        }
        const int L = cfg_.levels();
        const int R = cfg_.res_per_level;
        const int stride_levels = 1 << (L - 1);
        require(z.dim(0) % stride_levels == 0 && z.dim(1) % stride_levels == 0,
                Status::kInvalidArgument,
                "denoiser: latent dims must be divisible by 2^(levels-1)");
        const bool in_concat =
            cfg_.cond_channels > 0 && cfg_.cond_injection == CondInjection::kInputConcat;
        const int cond_blk =
            cfg_.cond_injection == CondInjection::kPerBlock ? cfg_.cond_channels : 0;
        Tensor<T> temb = temb_.forward(static_cast<double>(t), train);
        Tensor<T> h = in_concat ? nn::concat_channels(z, cond) : z;
        h = conv_in_.forward(h, train);
        std::vector<Tensor<T>> skips;
        skips.push_back(h);
        for (int l = 0; l < L; ++l) {
            for (int r = 0; r < R; ++r) {
                if (cond_blk > 0 && r == 0)
                    h = nn::concat_channels(
                        h, resize(cond, h.dim(0), h.dim(1), ResizeFilter::kBilinear, false));
                h = down_blocks_[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)].forward(
                    h, temb, train);
                skips.push_back(h);
            }
            if (l < L - 1) {
                h = down_convs_[static_cast<std::size_t>(l)].forward(h, train);
                skips.push_back(h);
            }
        }
        h = mid1_.forward(h, temb, train);
        h = mid2_.forward(h, temb, train);
        for (int l = L - 1; l >= 0; --l) {
            for (int r = 0; r <= R; ++r) {
                Tensor<T> s = pop(skips);
                h = up_blocks_[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)].forward(
                    nn::concat_channels(h, s), temb, train);
            }
            if (l > 0)
                h = up_convs_[static_cast<std::size_t>(l - 1)].forward(nn::upsample_nearest2x(h),
                                                                       train);
        }
        require(skips.empty(), Status::kInternal, "denoiser forward: skip stack imbalance");
        h = conv_out_.forward(act_out_.forward(gn_out_.forward(h, train), train), train);
        return h;
    }

    DenoiserConfig cfg_;
    TimeEmbedding<T> temb_;
    nn::Conv2d<T> conv_in_;
    std::vector<std::vector<ResBlockT<T>>> down_blocks_;
    std::vector<nn::Conv2d<T>> down_convs_;
    ResBlockT<T> mid1_, mid2_;
    std::vector<std::vector<ResBlockT<T>>> up_blocks_;
    std::vector<nn::Conv2d<T>> up_convs_;
    nn::GroupNorm<T> gn_out_;
    nn::ActLayer<T> act_out_;
    nn::Conv2d<T> conv_out_;
};

} // namespace arbiscale
