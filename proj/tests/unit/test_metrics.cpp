// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "metrics.hpp"

using namespace arbiscale;

TEST_SUITE("metrics") {

TEST_CASE("psnr") {
    Rng rng(41);
    const auto a = rng.uniform_tensor<float>({8, 8, 3}, -1.0, 1.0);

    SUBCASE("identical images hit the infinity sentinel") {
        CHECK(std::isinf(psnr(a, a, 1.0)));
    }
    SUBCASE("known MSE values") {
        Tensor<float> b = Tensor<float>::zeros({1, 100, 1});
        Tensor<float> c = Tensor<float>::full({1, 100, 1}, 0.1f);
        CHECK(psnr(b, c, 1.0) == doctest::Approx(20.0).epsilon(1e-4));
        Tensor<float> d = Tensor<float>::full({1, 100, 1}, 1.0f);
        CHECK(psnr(b, d, 1.0) == doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("symmetry") {
        const auto b = rng.uniform_tensor<float>({8, 8, 3}, -1.0, 1.0);
        CHECK(psnr(a, b, 2.0) == psnr(b, a, 2.0));
    }
    SUBCASE("shape mismatch throws") {
        const auto b = rng.uniform_tensor<float>({4, 8, 3}, -1.0, 1.0);
        CHECK_THROWS_AS(psnr(a, b, 1.0), Error);
    }
}

TEST_CASE("ssim") {
    Rng rng(42);
    const auto a = rng.uniform_tensor<float>({16, 16, 3}, -1.0, 1.0);

    SUBCASE("self similarity is one") { CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9)); }
    SUBCASE("constant images match the closed form") {
        const double v1 = 0.2, v2 = 0.6;
        const auto c1t = Tensor<float>::full({16, 16, 1}, static_cast<float>(v1));
        const auto c2t = Tensor<float>::full({16, 16, 1}, static_cast<float>(v2));
        SsimOptions opts;
        const double c1 = (opts.k1 * opts.data_range) * (opts.k1 * opts.data_range);
        const double expect = (2.0 * v1 * v2 + c1) / (v1 * v1 + v2 * v2 + c1);
        CHECK(ssim(c1t, c2t, opts) == doctest::Approx(expect).epsilon(1e-5));
        CHECK(ssim(c1t, c2t, opts) < 1.0);
    }
    SUBCASE("symmetry") {
        const auto b = rng.uniform_tensor<float>({16, 16, 3}, -1.0, 1.0);
        CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    }
    SUBCASE("bounded by one") {
        const auto b = rng.uniform_tensor<float>({16, 16, 3}, -1.0, 1.0);
        CHECK(ssim(a, b) <= 1.0);
        CHECK(ssim(a, b) < 1.0); // distinct random images
    }
    SUBCASE("window larger than image throws") {
        const auto small = rng.uniform_tensor<float>({8, 8, 1}, -1.0, 1.0);
        CHECK_THROWS_AS(ssim(small, small), Error);
        CHECK_THROWS_AS([&] {
            SsimOptions opts;
            opts.window = 4; // even
            ssim(a, a, opts);
        }(), Error);
    }
}

TEST_CASE("self_ssim") {
    SUBCASE("constant images of different sizes agree perfectly") {
        const auto a = Tensor<float>::full({64, 64, 3}, 0.3f);
        const auto b = Tensor<float>::full({96, 96, 3}, 0.3f);
        CHECK(self_ssim(a, b) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("argument order does not matter") {
        Rng rng(43);
        // A smooth synthetic image rendered at two sizes.
        auto render_at = [&](int n) {
            Tensor<float> img({n, n, 3});
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c)
                    for (int ch = 0; ch < 3; ++ch) {
                        const double y = (r + 0.5) / n, x = (c + 0.5) / n;
                        img.at(r, c, ch) = static_cast<float>(
                            std::sin(6.28 * (y + 0.3 * ch)) * std::cos(3.14 * x));
                    }
            return img;
        };
        const auto a = render_at(48);
        const auto b = render_at(72);
        const double ab = self_ssim(a, b);
        const double ba = self_ssim(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab > 0.98); // same underlying signal
    }
}

TEST_CASE("grad_check oracle sanity") {
    SUBCASE("exact for quadratics") {
        Rng rng(44);
        Tensor<double> p = rng.normal_tensor<double>({6});
        Tensor<double> g({6});
        std::vector<nn::ParamRef<double>> params{{"p", &p, &g}};
        auto loss = [&] { return squared_norm(p); };
        std::vector<Tensor<double>> analytic(1, Tensor<double>({6}));
        for (int i = 0; i < 6; ++i) analytic[0][i] = 2.0 * p[i];
        const auto r = grad_check(loss, params, analytic, 1e-5);
        CHECK(r.max_rel_error < 1e-8);
    }
    SUBCASE("truncation error grows as h^2 on a cubic") {
        Tensor<double> p = Tensor<double>::full({1}, 1.0);
        Tensor<double> g({1});
        std::vector<nn::ParamRef<double>> params{{"p", &p, &g}};
        auto loss = [&] { return p[0] * p[0] * p[0]; };
        std::vector<Tensor<double>> analytic(1, Tensor<double>({1}));
        analytic[0][0] = 3.0; // d/dp p^3 at p=1
        const double err_big = grad_check(loss, params, analytic, 0.1).max_rel_error;
        const double err_small = grad_check(loss, params, analytic, 1e-3).max_rel_error;
        CHECK(err_big > 100.0 * err_small);
        // central differences: error ~ h^2 f'''/6 = h^2 (ratio 10^4)
        CHECK(err_big / std::max(err_small, 1e-300) ==
              doctest::Approx(1e4).epsilon(0.2));
    }
}

} // TEST_SUITE
