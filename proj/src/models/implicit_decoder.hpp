// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "coords.hpp"
#include "models/autoencoder.hpp"
#include "nn/ops.hpp"

namespace arbiscale {

struct MlpConfig {
    int hidden_layers = 4;
    int hidden_units = 256;
    nn::Act activation = nn::Act::kRelu;

    void validate() const {
        require(hidden_layers >= 1 && hidden_units >= 1, Status::kConfig,
                "mlp: hidden_layers and hidden_units must be positive");
    }
};

struct ImplicitDecoderConfig {
    MlpConfig mlp;
    bool feature_unfold = true;
    bool cell_decoding = true;
    // Lower bound on the feature-grid-scaled cell fed to the MLP. Rendering
    // beyond the trained scale range clamps to the smallest trained cell;
    // zero disables the clamp.
    double min_scaled_cell = 0.0;
};

// Coordinate MLP mapping [features, relative coord, cell] rows to RGB.
template <typename T>
class MlpDecoder {
public:
    MlpDecoder() = default;

    MlpDecoder(int in_dim, const MlpConfig& cfg) : in_dim_(in_dim), cfg_(cfg) {
        cfg.validate();
        int d = in_dim;
        for (int i = 0; i < cfg.hidden_layers; ++i) {
            layers_.emplace_back(d, cfg.hidden_units);
            acts_.emplace_back(cfg.activation);
            d = cfg.hidden_units;
        }
        head_ = nn::Linear<T>(d, 3);
    }

    void init(Rng& rng) {
        for (auto& l : layers_) l.init_he(rng);
        head_.init_he(rng);
    }

    int in_dim() const { return in_dim_; }

    Tensor<T> apply(const Tensor<T>& x) const {
        Tensor<T> h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) h = acts_[i].apply(layers_[i].apply(h));
        return head_.apply(h);
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (!train) return apply(x);
        Tensor<T> h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            h = acts_[i].forward(layers_[i].forward(h, true), true);
        return head_.forward(h, true);
    }

    Tensor<T> backward(const Tensor<T>& gy, bool accumulate_param_grads = true) {
        Tensor<T> g = head_.backward(gy, accumulate_param_grads);
        for (std::size_t i = layers_.size(); i-- > 0;)
            g = layers_[i].backward(acts_[i].backward(g), accumulate_param_grads);
        return g;
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i].collect(prefix + ".fc" + std::to_string(i), out);
        head_.collect(prefix + ".head", out);
    }

private:
    int in_dim_ = 0;
    MlpConfig cfg_;
    std::vector<nn::Linear<T>> layers_;
    std::vector<nn::ActLayer<T>> acts_;
    nn::Linear<T> head_;
};

namespace detail {

// Geometry of the four surrounding feature centers for one query. Indices
// clamp to the grid; ensemble weights come from the unclamped centers so
// they always partition the feature cell.
struct EnsembleMember {
    int row, col;        // clamped feature index
    double rel_row, rel_col; // scaled offset from the fetched center
    double weight;       // normalized, the 4 members sum to 1
};

inline void ensemble_members(double qr, double qc, int fh, int fw, EnsembleMember out[4]) {
    const double ur = (qr + 1.0) * 0.5 * fh - 0.5;
    const double uc = (qc + 1.0) * 0.5 * fw - 0.5;
    const int r0 = static_cast<int>(std::floor(ur));
    const int c0 = static_cast<int>(std::floor(uc));
    const double cr[2] = {axis_cell_center(r0, fh), axis_cell_center(r0 + 1, fh)};
    const double cc[2] = {axis_cell_center(c0, fw), axis_cell_center(c0 + 1, fw)};
    double total = 0.0;
    for (int sr = 0; sr < 2; ++sr) {
        for (int sc = 0; sc < 2; ++sc) {
            EnsembleMember& m = out[sr * 2 + sc];
            m.row = std::clamp(r0 + sr, 0, fh - 1);
            m.col = std::clamp(c0 + sc, 0, fw - 1);
            m.rel_row = (qr - axis_cell_center(m.row, fh)) * fh;
            m.rel_col = (qc - axis_cell_center(m.col, fw)) * fw;
            // Area of the rectangle spanned by the query and the opposite corner.
            m.weight = std::abs(qr - cr[1 - sr]) * std::abs(qc - cc[1 - sc]);
            total += m.weight;
        }
    }
    for (int i = 0; i < 4; ++i) out[i].weight /= total;
}

} // namespace detail

// The implicit neural decoder: the convolutional feature decoder followed by
// feature unfolding, a four-neighbor local ensemble and the decoding MLP.
// Maps a latent and continuous query coordinates to RGB at any resolution.
template <typename T>
class ImplicitDecoder {
public:
    static constexpr int kRenderTile = 1024; // fixed GEMM tile; keeps render
                                             // output independent of query_batch

    ImplicitDecoder() = default;

    ImplicitDecoder(const AutoEncoderConfig& acfg, const ImplicitDecoderConfig& icfg)
        : acfg_(acfg), icfg_(icfg), fdec_(acfg),
          mlp_(input_dim(acfg, icfg), icfg.mlp) {}

    static int feature_dim(const AutoEncoderConfig& acfg, const ImplicitDecoderConfig& icfg) {
        const int base = acfg.use_feature_decoder ? acfg.feature_channels : acfg.latent_channels;
        return icfg.feature_unfold ? 9 * base : base;
    }

    static int input_dim(const AutoEncoderConfig& acfg, const ImplicitDecoderConfig& icfg) {
        return feature_dim(acfg, icfg) + 2 + (icfg.cell_decoding ? 2 : 0);
    }

    void init(Rng& rng) {
        fdec_.init(rng);
        mlp_.init(rng);
    }

    FeatureDecoder<T>& feature_decoder() { return fdec_; }
    const FeatureDecoder<T>& feature_decoder() const { return fdec_; }
    MlpDecoder<T>& mlp() { return mlp_; }
    const MlpDecoder<T>& mlp() const { return mlp_; }
    const ImplicitDecoderConfig& config() const { return icfg_; }
    ImplicitDecoderConfig& config() { return icfg_; }
    const AutoEncoderConfig& autoencoder_config() const { return acfg_; }

    // D_phi plus optional unfolding. Pure inference path.
    Tensor<T> features(const Tensor<T>& latent) const {
        Tensor<T> f = acfg_.use_feature_decoder ? fdec_.apply(latent) : latent;
        return icfg_.feature_unfold ? nn::unfold3x3(f) : f;
    }

    Tensor<T> features_forward(const Tensor<T>& latent, bool train) {
        if (!train) return features(latent);
        feat_h_ = latent.dim(0);
        feat_w_ = latent.dim(1);
        Tensor<T> f = acfg_.use_feature_decoder ? fdec_.forward(latent, true) : latent;
        base_channels_ = f.dim(2);
        return icfg_.feature_unfold ? nn::unfold3x3(f) : f;
    }

    Tensor<T> features_backward(const Tensor<T>& gfeat, bool accumulate_param_grads = true) {
        Tensor<T> g = icfg_.feature_unfold
                          ? nn::unfold3x3_backward(gfeat, feat_h_, feat_w_, base_channels_)
                          : gfeat;
        if (!acfg_.use_feature_decoder) return g;
        return fdec_.backward(g, accumulate_param_grads);
    }

    // Local-ensemble query against an (already unfolded) feature map.
    Tensor<T> query_rgb(const Tensor<T>& fmap, const CoordGrid& coords, const Cell& cells,
                        bool train) {
        require(coords.size() == cells.sizes.dim(0), Status::kInvalidArgument,
                "query_rgb: coords and cells must have the same length");
        require(fmap.all_finite(), Status::kNumeric, "query_rgb: non-finite feature map");
        const std::int64_t n = coords.size();
        Tensor<T> x;
        std::vector<double> weights;
        std::vector<int> flat_index;
        build_inputs(fmap, coords, cells, 0, n, n, x, weights, flat_index);
        Tensor<T> y = train ? mlp_.forward(x, true) : mlp_.apply(x);
        Tensor<T> rgb({static_cast<int>(n), 3});
        combine(y, weights, n, rgb);
        if (train) {
            q_weights_ = std::move(weights);
            q_index_ = std::move(flat_index);
            q_n_ = n;
            q_fh_ = fmap.dim(0);
            q_fw_ = fmap.dim(1);
            q_fc_ = fmap.dim(2);
        }
        return rgb;
    }

    // Gradient w.r.t. the (unfolded) feature map; MLP parameter gradients
    // accumulate unless frozen.
    Tensor<T> query_rgb_backward(const Tensor<T>& grgb, bool accumulate_param_grads = true) {
        const std::int64_t n = q_n_;
        Tensor<T> gy({static_cast<int>(4 * n), 3});
        for (int m = 0; m < 4; ++m)
            for (std::int64_t i = 0; i < n; ++i) {
                const double w = q_weights_[static_cast<std::size_t>(m * n + i)];
                for (int ch = 0; ch < 3; ++ch)
                    gy.at(m * n + i, ch) = static_cast<T>(w * grgb.at(i, ch));
            }
        Tensor<T> gx = mlp_.backward(gy, accumulate_param_grads);
        const int fd = feature_dim(acfg_, icfg_);
        Tensor<T> gfmap({q_fh_, q_fw_, q_fc_});
        for (std::int64_t r = 0; r < 4 * n; ++r) {
            T* dst = gfmap.data() + static_cast<std::int64_t>(q_index_[static_cast<std::size_t>(r)]) * q_fc_;
            const T* src = gx.data() + r * mlp_.in_dim();
            for (int ch = 0; ch < fd; ++ch) dst[ch] += src[ch];
        }
        return gfmap;
    }

    // Render a latent to out_h x out_w. Pure; queries are evaluated in fixed
    // tiles so results do not depend on query_batch (which only has to be
    // positive; it is honored as an upper bound above the tile size).
    Tensor<T> render(const Tensor<T>& latent, int out_h, int out_w,
                     int query_batch = kRenderTile) const {
        require(out_h >= 1 && out_w >= 1, Status::kInvalidArgument,
                "render: output dims must be positive");
        require(query_batch >= 1, Status::kInvalidArgument, "render: query_batch must be >= 1");
        const Tensor<T> fmap = features(latent);
        const CoordGrid grid = make_coord_grid(out_h, out_w);
        const Cell cells = make_cell(out_h, out_w, grid.size());
        const std::int64_t n = grid.size();
        Tensor<T> out({out_h, out_w, 3});
        try {
            for (std::int64_t start = 0; start < n; start += kRenderTile) {
                const std::int64_t count = std::min<std::int64_t>(kRenderTile, n - start);
                Tensor<T> x;
                std::vector<double> weights;
                std::vector<int> flat_index;
                build_inputs(fmap, grid, cells, start, count, kRenderTile, x, weights, flat_index);
                Tensor<T> y = mlp_.apply(x);
                Tensor<T> rgb({static_cast<int>(count), 3});
                combine_tiled(y, weights, count, kRenderTile, rgb);
                std::copy(rgb.data(), rgb.data() + count * 3, out.data() + start * 3);
            }
        } catch (const std::bad_alloc&) {
            fail(Status::kResource,
                 "render: out of memory; retry with a smaller query_batch");
        }
        return out;
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        if (acfg_.use_feature_decoder) fdec_.collect(prefix + ".fdec", out);
        mlp_.collect(prefix + ".mlp", out);
    }

private:
    // Rows are member-major: member m occupies rows [m*stride, m*stride+count).
    // Padding rows beyond `count` are zero so tile GEMM shapes stay fixed.
    void build_inputs(const Tensor<T>& fmap, const CoordGrid& coords, const Cell& cells,
                      std::int64_t start, std::int64_t count, std::int64_t stride, Tensor<T>& x,
                      std::vector<double>& weights, std::vector<int>& flat_index) const {
        const int fh = fmap.dim(0), fw = fmap.dim(1), fc = fmap.dim(2);
        const int fd = feature_dim(acfg_, icfg_);
        require(fc == fd, Status::kInvalidArgument, "query_rgb: feature channel mismatch");
        const int in_dim = mlp_.in_dim();
        x = Tensor<T>({static_cast<int>(4 * stride), in_dim});
        weights.assign(static_cast<std::size_t>(4 * stride), 0.0);
        flat_index.assign(static_cast<std::size_t>(4 * stride), 0);
        for (std::int64_t i = 0; i < count; ++i) {
            const double qr = coords.coords.at(start + i, 0);
            const double qc = coords.coords.at(start + i, 1);
            detail::EnsembleMember members[4];
            detail::ensemble_members(qr, qc, fh, fw, members);
            for (int m = 0; m < 4; ++m) {
                const auto& em = members[m];
                const std::int64_t row = m * stride + i;
                T* dst = x.data() + row * in_dim;
                const T* src =
                    fmap.data() + (static_cast<std::int64_t>(em.row) * fw + em.col) * fc;
                std::copy(src, src + fc, dst);
                dst += fc;
                *dst++ = static_cast<T>(em.rel_row);
                *dst++ = static_cast<T>(em.rel_col);
                if (icfg_.cell_decoding) {
                    double cr = cells.sizes.at(start + i, 0) * fh;
                    double cc = cells.sizes.at(start + i, 1) * fw;
                    if (icfg_.min_scaled_cell > 0.0) {
                        cr = std::max(cr, icfg_.min_scaled_cell);
                        cc = std::max(cc, icfg_.min_scaled_cell);
                    }
                    *dst++ = static_cast<T>(cr);
                    *dst++ = static_cast<T>(cc);
                }
                weights[static_cast<std::size_t>(row)] = em.weight;
                flat_index[static_cast<std::size_t>(row)] = em.row * fw + em.col;
            }
        }
    }

    void combine(const Tensor<T>& y, const std::vector<double>& weights, std::int64_t n,
                 Tensor<T>& rgb) const {
        combine_tiled(y, weights, n, n, rgb);
    }

    void combine_tiled(const Tensor<T>& y, const std::vector<double>& weights, std::int64_t count,
                       std::int64_t stride, Tensor<T>& rgb) const {
        for (std::int64_t i = 0; i < count; ++i) {
            for (int ch = 0; ch < 3; ++ch) {
                double acc = 0.0;
                for (int m = 0; m < 4; ++m) {
                    const std::int64_t row = m * stride + i;
                    acc += weights[static_cast<std::size_t>(row)] *
                           static_cast<double>(y.at(row, ch));
                }
                rgb.at(i, ch) = static_cast<T>(acc);
            }
        }
    }

    AutoEncoderConfig acfg_;
    ImplicitDecoderConfig icfg_;
    FeatureDecoder<T> fdec_;
    MlpDecoder<T> mlp_;

    // query_rgb training cache
    std::vector<double> q_weights_;
    std::vector<int> q_index_;
    std::int64_t q_n_ = 0;
    int q_fh_ = 0, q_fw_ = 0, q_fc_ = 0;
    int feat_h_ = 0, feat_w_ = 0, base_channels_ = 0;
};

} // namespace arbiscale
