// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "metrics.hpp"
#include "models/implicit_decoder.hpp"

using namespace arbiscale;
using nn::Act;
using nn::ParamRef;

namespace {

AutoEncoderConfig tiny_ae() {
    AutoEncoderConfig cfg;
    cfg.downsample_log2 = 1;
    cfg.latent_channels = 3;
    cfg.feature_channels = 8;
    cfg.n_resblocks = 1;
    cfg.norm_groups = 2;
    return cfg;
}

ImplicitDecoderConfig tiny_idec(bool unfold = true, bool cell = true) {
    ImplicitDecoderConfig cfg;
    cfg.mlp.hidden_layers = 2;
    cfg.mlp.hidden_units = 16;
    cfg.mlp.activation = Act::kSilu;
    cfg.feature_unfold = unfold;
    cfg.cell_decoding = cell;
    return cfg;
}

// Straight-line oracle: enumerate the four surrounding centers explicitly,
// derive weights from opposite-corner areas, evaluate the MLP row by row.
Tensor<float> oracle_query(const ImplicitDecoder<float>& dec, const Tensor<float>& fmap,
                           const CoordGrid& coords, const Cell& cells) {
    const int fh = fmap.dim(0), fw = fmap.dim(1), fc = fmap.dim(2);
    const bool cell_in = dec.config().cell_decoding;
    const int in_dim = dec.mlp().in_dim();
    Tensor<float> out({static_cast<int>(coords.size()), 3});
    for (std::int64_t i = 0; i < coords.size(); ++i) {
        const double qr = coords.coords.at(i, 0);
        const double qc = coords.coords.at(i, 1);
        const int r0 = static_cast<int>(std::floor((qr + 1.0) * 0.5 * fh - 0.5));
        const int c0 = static_cast<int>(std::floor((qc + 1.0) * 0.5 * fw - 0.5));
        double acc[3] = {0, 0, 0};
        double wsum = 0.0;
        struct Member { int r, c; double w; };
        for (int sr = 0; sr <= 1; ++sr)
            for (int sc = 0; sc <= 1; ++sc) {
                const int orow = sr == 0 ? r0 + 1 : r0; // opposite corner
                const int ocol = sc == 0 ? c0 + 1 : c0;
                const double orr = -1.0 + (2.0 * orow + 1.0) / fh;
                const double occ = -1.0 + (2.0 * ocol + 1.0) / fw;
                const double w = std::abs(qr - orr) * std::abs(qc - occ);
                const int rr = std::clamp(r0 + sr, 0, fh - 1);
                const int cc = std::clamp(c0 + sc, 0, fw - 1);
                Tensor<float> x({1, in_dim});
                for (int ch = 0; ch < fc; ++ch) x.at(0, ch) = fmap.at(rr, cc, ch);
                const double crr = -1.0 + (2.0 * rr + 1.0) / fh;
                const double ccc = -1.0 + (2.0 * cc + 1.0) / fw;
                x.at(0, fc) = static_cast<float>((qr - crr) * fh);
                x.at(0, fc + 1) = static_cast<float>((qc - ccc) * fw);
                if (cell_in) {
                    x.at(0, fc + 2) = static_cast<float>(cells.sizes.at(i, 0) * fh);
                    x.at(0, fc + 3) = static_cast<float>(cells.sizes.at(i, 1) * fw);
                }
                const auto y = dec.mlp().apply(x);
                for (int ch = 0; ch < 3; ++ch) acc[ch] += w * y.at(0, ch);
                wsum += w;
            }
        for (int ch = 0; ch < 3; ++ch)
            out.at(i, ch) = static_cast<float>(acc[ch] / wsum);
    }
    return out;
}

} // namespace

TEST_SUITE("implicit_decoder") {

TEST_CASE("ensemble weights sum to one, including clamped edge queries") {
    for (int fh : {1, 2, 5}) {
        for (int fw : {1, 3, 8}) {
            const auto grid = make_coord_grid(13, 9); // includes near-edge queries
            for (std::int64_t i = 0; i < grid.size(); ++i) {
                detail::EnsembleMember m[4];
                detail::ensemble_members(grid.coords.at(i, 0), grid.coords.at(i, 1), fh, fw, m);
                double sum = 0.0;
                for (int k = 0; k < 4; ++k) {
                    CHECK(m[k].weight >= 0.0);
                    sum += m[k].weight;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
                for (int k = 0; k < 4; ++k) {
                    CHECK(std::abs(m[k].rel_row) <= 2.0 + 1e-9);
                    CHECK(std::abs(m[k].rel_col) <= 2.0 + 1e-9);
                }
            }
        }
    }
}

TEST_CASE("query_rgb matches the brute-force oracle on small maps") {
    Rng rng(11);
    for (int fh : {1, 3, 8}) {
        for (int fw : {2, 8}) {
            CAPTURE(fh);
            CAPTURE(fw);
            auto acfg = tiny_ae();
            auto icfg = tiny_idec(/*unfold=*/false);
            acfg.use_feature_decoder = false; // query raw latent features
            ImplicitDecoder<float> dec(acfg, icfg);
            dec.init(rng);
            const Tensor<float> fmap = rng.normal_tensor<float>({fh, fw, acfg.latent_channels});
            const auto grid = make_coord_grid(7, 5);
            const auto cells = make_cell(7, 5, grid.size());
            const auto got = dec.query_rgb(fmap, grid, cells, false);
            const auto expect = oracle_query(dec, fmap, grid, cells);
            for (std::int64_t i = 0; i < got.numel(); ++i)
                CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("constant feature map with a coordinate-blind MLP is constant") {
    Rng rng(12);
    auto acfg = tiny_ae();
    acfg.use_feature_decoder = false;
    auto icfg = tiny_idec(false);
    ImplicitDecoder<float> dec(acfg, icfg);
    dec.init(rng);
    // Zero the MLP entirely except the head bias: output ignores all inputs.
    std::vector<ParamRef<float>> params;
    dec.collect("dec", params);
    for (auto& p : params) p.value->zero();
    for (auto& p : params)
        if (p.name == "dec.mlp.head.bias") {
            (*p.value)[0] = 0.25f;
            (*p.value)[1] = -0.5f;
            (*p.value)[2] = 1.0f;
        }
    const Tensor<float> fmap = Tensor<float>::full({4, 4, 3}, 0.3f);
    const auto grid = make_coord_grid(9, 9);
    const auto cells = make_cell(9, 9, grid.size());
    const auto rgb = dec.query_rgb(fmap, grid, cells, false);
    for (std::int64_t i = 0; i < grid.size(); ++i) {
        // Exactly the head bias at every query: the ensemble weights sum to 1.
        CHECK(rgb.at(i, 0) == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(rgb.at(i, 1) == doctest::Approx(-0.5).epsilon(1e-6));
        CHECK(rgb.at(i, 2) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("render is bit-identical across query_batch settings") {
    Rng rng(13);
    auto acfg = tiny_ae();
    auto icfg = tiny_idec();
    ImplicitDecoder<float> dec(acfg, icfg);
    dec.init(rng);
    const Tensor<float> latent = rng.normal_tensor<float>({6, 6, acfg.latent_channels});
    const auto a = dec.render(latent, 50, 46, 64);
    const auto b = dec.render(latent, 50, 46, 1024);
    const auto c = dec.render(latent, 50, 46, 65536);
    REQUIRE(a.numel() == b.numel());
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(b[i] == c[i]);
    }
}

TEST_CASE("render agrees with query_rgb over the full grid") {
    Rng rng(14);
    auto acfg = tiny_ae();
    auto icfg = tiny_idec();
    ImplicitDecoder<float> dec(acfg, icfg);
    dec.init(rng);
    const Tensor<float> latent = rng.normal_tensor<float>({5, 5, acfg.latent_channels});
    const auto img = dec.render(latent, 11, 13);
    const auto fmap = dec.features(latent);
    const auto grid = make_coord_grid(11, 13);
    const auto cells = make_cell(11, 13, grid.size());
    const auto rgb = dec.query_rgb(fmap, grid, cells, false);
    for (std::int64_t i = 0; i < rgb.numel(); ++i)
        CHECK(img[i] == doctest::Approx(rgb[i]).epsilon(1e-6));
}

TEST_CASE("translation by one feature cell shifts the output") {
    Rng rng(15);
    auto acfg = tiny_ae();
    acfg.use_feature_decoder = false;
    auto icfg = tiny_idec(false, false);
    ImplicitDecoder<float> dec(acfg, icfg);
    dec.init(rng);
    const int n = 8;
    // Periodic feature map: column j equals column (j+1) mod n.
    Tensor<float> fmap({n, n, acfg.latent_channels});
    Rng content(99);
    Tensor<float> base = content.normal_tensor<float>({n, acfg.latent_channels});
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            for (int ch = 0; ch < acfg.latent_channels; ++ch)
                fmap.at(r, c, ch) = base.at(c % 4, ch); // period 4 along columns
    // Interior queries, one feature cell apart along columns.
    CoordGrid qa, qb;
    qa.coords = Tensor<double>({5, 2});
    qb.coords = Tensor<double>({5, 2});
    Rng qrng(7);
    for (int i = 0; i < 5; ++i) {
        const double r = -0.3 + 0.1 * i;
        const double c = -0.45 + 0.05 * i;
        qa.coords.at(i, 0) = r;
        qa.coords.at(i, 1) = c;
        qb.coords.at(i, 0) = r;
        qb.coords.at(i, 1) = c + 4 * (2.0 / n); // one period to the right
    }
    const auto cells = make_cell(n, n, 5);
    const auto ya = dec.query_rgb(fmap, qa, cells, false);
    const auto yb = dec.query_rgb(fmap, qb, cells, false);
    for (std::int64_t i = 0; i < ya.numel(); ++i)
        CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-5));
}

TEST_CASE("cell clamp floors the scaled cell input") {
    Rng rng(16);
    auto acfg = tiny_ae();
    acfg.use_feature_decoder = false;
    auto icfg = tiny_idec(false, true);
    ImplicitDecoder<float> clamped(acfg, icfg);
    clamped.init(rng);
    // Same parameters, no clamp.
    ImplicitDecoder<float> open(acfg, icfg);
    {
        std::vector<ParamRef<float>> a, b;
        clamped.collect("d", a);
        open.collect("d", b);
        for (std::size_t i = 0; i < a.size(); ++i) *b[i].value = *a[i].value;
    }
    clamped.config().min_scaled_cell = 0.5;
    const Tensor<float> latent = rng.normal_tensor<float>({4, 4, acfg.latent_channels});
    // 32x upscale: raw scaled cell = 2*4/128 = 0.0625, well below the floor.
    const auto big_clamped = clamped.render(latent, 128, 128);
    const auto big_open = open.render(latent, 128, 128);
    CHECK(max_abs_diff(big_clamped, big_open) > 0.0);
    // In-range rendering (scaled cell 2*4/8 = 1.0 > floor) is unaffected.
    const auto small_clamped = clamped.render(latent, 8, 8);
    const auto small_open = open.render(latent, 8, 8);
    CHECK(max_abs_diff(small_clamped, small_open) == 0.0);
}

TEST_CASE("stage-1 path gradients: encoder, feature decoder and MLP jointly") {
    Rng rng(17);
    auto acfg = tiny_ae();
    auto icfg = tiny_idec();
    icfg.mlp.activation = Act::kSilu;
    Encoder<double> enc(acfg);
    enc.init(rng);
    ImplicitDecoder<double> dec(acfg, icfg);
    dec.init(rng);

    const Tensor<double> image = rng.uniform_tensor<double>({6, 6, 3}, -1.0, 1.0);
    const auto grid = make_coord_grid(6, 6);
    const auto cells = make_cell(6, 6, grid.size());
    Tensor<double> w = rng.normal_tensor<double>({static_cast<int>(grid.size()), 3});

    std::vector<ParamRef<double>> params;
    enc.collect("enc", params);
    dec.collect("dec", params);

    auto loss = [&] {
        const auto latent = enc.apply(image);
        const auto fmap = dec.features(latent);
        ImplicitDecoder<double>& d = const_cast<ImplicitDecoder<double>&>(dec);
        const auto rgb = d.query_rgb(fmap, grid, cells, false);
        double acc = 0.0;
        for (std::int64_t i = 0; i < rgb.numel(); ++i) acc += rgb[i] * w[i];
        return acc;
    };

    nn::zero_grads(params);
    {
        const auto latent = enc.forward(image, true);
        const auto fmap = dec.features_forward(latent, true);
        dec.query_rgb(fmap, grid, cells, true);
        const Tensor<double> gfmap = dec.query_rgb_backward(w);
        const Tensor<double> glatent = dec.features_backward(gfmap);
        enc.backward(glatent);
    }
    std::vector<Tensor<double>> analytic;
    for (auto& p : params) analytic.push_back(*p.grad);
    const auto result = grad_check(loss, params, analytic, 1e-5);
    INFO("worst parameter: ", result.worst_param);
    CHECK(result.max_rel_error < 2e-5);
}

} // TEST_SUITE
