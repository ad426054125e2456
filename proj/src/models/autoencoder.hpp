// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nn/layers.hpp"

namespace arbiscale {

struct AutoEncoderConfig {
    int downsample_log2 = 2;  // encoder spatial reduction 2^k
    int latent_channels = 16;
    int feature_channels = 64; // working width and output channels of the feature decoder
    int n_resblocks = 4;
    int norm_groups = 8;
    // Ablation switch: when false the feature decoder is bypassed and the
    // MLP decodes raw latents directly.
    bool use_feature_decoder = true;

    void validate() const {
        require(downsample_log2 >= 1, Status::kConfig, "autoencoder.downsample_log2 must be >= 1");
        require(latent_channels >= 1, Status::kConfig, "autoencoder.latent_channels must be >= 1");
        require(feature_channels >= 1, Status::kConfig,
                "autoencoder.feature_channels must be >= 1");
        require(n_resblocks >= 1, Status::kConfig, "autoencoder.n_resblocks must be >= 1");
        require(norm_groups >= 1 && feature_channels % norm_groups == 0, Status::kConfig,
                "autoencoder.norm_groups must divide feature_channels");
    }
};

// GroupNorm -> activation -> conv, twice, plus skip. A 1x1 projection joins
// the skip path when channel counts differ.
template <typename T>
class ResBlock {
public:
    ResBlock() = default;

    ResBlock(int in_ch, int out_ch, int groups, nn::Act act = nn::Act::kSilu)
        : gn1_(in_ch, groups), act1_(act), conv1_(in_ch, out_ch, 3), gn2_(out_ch, groups),
          act2_(act), conv2_(out_ch, out_ch, 3), project_(in_ch != out_ch) {
        if (project_) skip_ = nn::Conv2d<T>(in_ch, out_ch, 1, 1, 0);
    }

    void init(Rng& rng) {
        conv1_.init_he(rng);
        conv2_.init_he(rng);
        if (project_) skip_.init_he(rng);
    }

    Tensor<T> apply(const Tensor<T>& x) const {
        Tensor<T> h = conv1_.apply(act1_.apply(gn1_.apply(x)));
        h = conv2_.apply(act2_.apply(gn2_.apply(h)));
        return h + (project_ ? skip_.apply(x) : x);
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (!train) return apply(x);
        Tensor<T> h = conv1_.forward(act1_.forward(gn1_.forward(x, true), true), true);
        h = conv2_.forward(act2_.forward(gn2_.forward(h, true), true), true);
        return h + (project_ ? skip_.forward(x, true) : x);
    }

    Tensor<T> backward(const Tensor<T>& gy, bool accumulate_param_grads = true) {
        Tensor<T> g = conv2_.backward(gy, accumulate_param_grads);
        g = gn2_.backward(act2_.backward(g), accumulate_param_grads);
        g = conv1_.backward(g, accumulate_param_grads);
        Tensor<T> gx = gn1_.backward(act1_.backward(g), accumulate_param_grads);
        gx += project_ ? skip_.backward(gy, accumulate_param_grads) : gy;
        return gx;
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        gn1_.collect(prefix + ".gn1", out);
        conv1_.collect(prefix + ".conv1", out);
        gn2_.collect(prefix + ".gn2", out);
        conv2_.collect(prefix + ".conv2", out);
        if (project_) skip_.collect(prefix + ".skip", out);
    }

private:
    nn::GroupNorm<T> gn1_;
    nn::ActLayer<T> act1_;
    nn::Conv2d<T> conv1_;
    nn::GroupNorm<T> gn2_;
    nn::ActLayer<T> act2_;
    nn::Conv2d<T> conv2_;
    bool project_ = false;
    nn::Conv2d<T> skip_;
};

// Image encoder: stem conv, one residual block plus strided conv per
// halving, a residual block at the bottom, and a projection to the latent.
template <typename T>
class Encoder {
public:
    Encoder() = default;

    explicit Encoder(const AutoEncoderConfig& cfg) : cfg_(cfg) {
        const int w = cfg.feature_channels;
        stem_ = nn::Conv2d<T>(3, w, 3);
        for (int i = 0; i < cfg.downsample_log2; ++i) {
            blocks_.emplace_back(w, w, cfg.norm_groups);
            downs_.emplace_back(w, w, 3, 2);
        }
        bottom_ = ResBlock<T>(w, w, cfg.norm_groups);
        gn_out_ = nn::GroupNorm<T>(w, cfg.norm_groups);
        conv_out_ = nn::Conv2d<T>(w, cfg.latent_channels, 3);
    }

    void init(Rng& rng) {
        stem_.init_he(rng);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            blocks_[i].init(rng);
            downs_[i].init_he(rng);
        }
        bottom_.init(rng);
        conv_out_.init_he(rng);
    }

    void check_input(const Tensor<T>& image) const {
        require(image.rank() == 3 && image.dim(2) == 3, Status::kInvalidArgument,
                "encode: expected an HxWx3 image");
        const int f = 1 << cfg_.downsample_log2;
        require(image.dim(0) % f == 0 && image.dim(1) % f == 0, Status::kInvalidArgument,
                "encode: image sides must be divisible by 2^downsample_log2");
    }

    Tensor<T> apply(const Tensor<T>& image) const {
        check_input(image);
        Tensor<T> h = stem_.apply(image);
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            h = downs_[i].apply(blocks_[i].apply(h));
        h = bottom_.apply(h);
        return conv_out_.apply(act_out_.apply(gn_out_.apply(h)));
    }

    Tensor<T> forward(const Tensor<T>& image, bool train) {
        if (!train) return apply(image);
        check_input(image);
        Tensor<T> h = stem_.forward(image, true);
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            h = downs_[i].forward(blocks_[i].forward(h, true), true);
        h = bottom_.forward(h, true);
        return conv_out_.forward(act_out_.forward(gn_out_.forward(h, true), true), true);
    }

    void backward(const Tensor<T>& glatent) {
        Tensor<T> g = conv_out_.backward(glatent);
        g = gn_out_.backward(act_out_.backward(g));
        g = bottom_.backward(g);
        for (std::size_t i = blocks_.size(); i-- > 0;)
            g = blocks_[i].backward(downs_[i].backward(g));
        stem_.backward(g);
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        stem_.collect(prefix + ".stem", out);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
            downs_[i].collect(prefix + ".down" + std::to_string(i), out);
        }
        bottom_.collect(prefix + ".bottom", out);
        gn_out_.collect(prefix + ".gn_out", out);
        conv_out_.collect(prefix + ".conv_out", out);
    }

    const AutoEncoderConfig& config() const { return cfg_; }

private:
    AutoEncoderConfig cfg_;
    nn::Conv2d<T> stem_;
    std::vector<ResBlock<T>> blocks_;
    std::vector<nn::Conv2d<T>> downs_;
    ResBlock<T> bottom_;
    nn::GroupNorm<T> gn_out_;
    nn::ActLayer<T> act_out_;
    nn::Conv2d<T> conv_out_;
};

// Symmetric convolutional decoder with the upsampling removed: expands the
// latent into a rich feature map at the same spatial resolution.
template <typename T>
class FeatureDecoder {
public:
    FeatureDecoder() = default;

    explicit FeatureDecoder(const AutoEncoderConfig& cfg) : cfg_(cfg) {
        const int w = cfg.feature_channels;
        conv_in_ = nn::Conv2d<T>(cfg.latent_channels, w, 3);
        for (int i = 0; i < cfg.n_resblocks; ++i) blocks_.emplace_back(w, w, cfg.norm_groups);
        gn_out_ = nn::GroupNorm<T>(w, cfg.norm_groups);
        conv_out_ = nn::Conv2d<T>(w, w, 3);
    }

    void init(Rng& rng) {
        conv_in_.init_he(rng);
        for (auto& b : blocks_) b.init(rng);
        conv_out_.init_he(rng);
    }

    void check_input(const Tensor<T>& latent) const {
        require(latent.rank() == 3 && latent.dim(2) == cfg_.latent_channels,
                Status::kInvalidArgument, "decode_features: latent channel mismatch");
    }

    Tensor<T> apply(const Tensor<T>& latent) const {
        check_input(latent);
        Tensor<T> h = conv_in_.apply(latent);
        for (const auto& b : blocks_) h = b.apply(h);
        return conv_out_.apply(act_out_.apply(gn_out_.apply(h)));
    }

    Tensor<T> forward(const Tensor<T>& latent, bool train) {
        if (!train) return apply(latent);
        check_input(latent);
        Tensor<T> h = conv_in_.forward(latent, true);
        for (auto& b : blocks_) h = b.forward(h, true);
        return conv_out_.forward(act_out_.forward(gn_out_.forward(h, true), true), true);
    }

    Tensor<T> backward(const Tensor<T>& gfeat, bool accumulate_param_grads = true) {
        Tensor<T> g = conv_out_.backward(gfeat, accumulate_param_grads);
        g = gn_out_.backward(act_out_.backward(g), accumulate_param_grads);
        for (std::size_t i = blocks_.size(); i-- > 0;)
            g = blocks_[i].backward(g, accumulate_param_grads);
        return conv_in_.backward(g, accumulate_param_grads);
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        conv_in_.collect(prefix + ".conv_in", out);
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
        gn_out_.collect(prefix + ".gn_out", out);
        conv_out_.collect(prefix + ".conv_out", out);
    }

    const AutoEncoderConfig& config() const { return cfg_; }

private:
    AutoEncoderConfig cfg_;
    nn::Conv2d<T> conv_in_;
    std::vector<ResBlock<T>> blocks_;
    nn::GroupNorm<T> gn_out_;
    nn::ActLayer<T> act_out_;
    nn::Conv2d<T> conv_out_;
};

} // namespace arbiscale
