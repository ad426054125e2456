// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "diffusion.hpp"

using namespace arbiscale;

namespace {

// Denoiser that always points at the true z0 given the current state.
template <typename T>
struct OracleDenoiser {
    const Tensor<T>& z0;
    const NoiseSchedule& sched;
    mutable int current_t = 0;

    Tensor<T> apply(const Tensor<T>& z_t, int t, const Tensor<T>&) const {
        const double ab = sched.alpha_bar(t);
        const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
        Tensor<T> eps(z_t.shape());
        for (std::int64_t i = 0; i < z_t.numel(); ++i)
            eps[i] = static_cast<T>((z_t[i] - a * z0[i]) / b);
        return eps;
    }
};

} // namespace

TEST_SUITE("diffusion") {

TEST_CASE("linear schedule values") {
    SUBCASE("default schedule") {
        const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
        CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-12));
        // Independent product as the oracle for abar_T.
        double prod = 1.0;
        for (int t = 0; t < 1000; ++t)
            prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * t / 999.0);
        CHECK(s.alpha_bar(1000) == doctest::Approx(prod).epsilon(1e-12));
        CHECK(s.alpha_bar(1000) < 1e-4);
    }
    SUBCASE("single step") {
        const auto s = NoiseSchedule::linear(1, 0.3, 0.9);
        CHECK(s.alpha_bar(1) == doctest::Approx(0.7));
    }
    SUBCASE("abar is strictly decreasing and positive") {
        const auto s = NoiseSchedule::linear(200, 1e-4, 0.02);
        CHECK(s.alpha_bar(0) == 1.0);
        for (int t = 1; t <= 200; ++t) {
            CHECK(s.alpha_bar(t) > 0.0);
            CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
            CHECK(s.beta(t) > 0.0);
            CHECK(s.beta(t) < 1.0);
        }
    }
    SUBCASE("invalid ranges throw") {
        CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.02), Error);
        CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), Error);
        CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 0.05), Error);
        CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 1.0), Error);
    }
}

TEST_CASE("q_sample limiting cases") {
    const auto s = NoiseSchedule::linear(100, 1e-4, 0.02);
    Rng rng(21);
    const auto z0 = rng.normal_tensor<double>({4, 4, 2});
    const auto zeros = Tensor<double>::zeros({4, 4, 2});
    const int t = 37;
    SUBCASE("zero noise") {
        const auto zt = q_sample(z0, t, zeros, s);
        const double a = std::sqrt(s.alpha_bar(t));
        for (std::int64_t i = 0; i < z0.numel(); ++i)
            CHECK(zt[i] == doctest::Approx(a * z0[i]).epsilon(1e-12));
    }
    SUBCASE("zero signal") {
        const auto eps = rng.normal_tensor<double>({4, 4, 2});
        const auto zt = q_sample(zeros, t, eps, s);
        const double b = std::sqrt(1.0 - s.alpha_bar(t));
        for (std::int64_t i = 0; i < eps.numel(); ++i)
            CHECK(zt[i] == doctest::Approx(b * eps[i]).epsilon(1e-12));
    }
    SUBCASE("t out of range throws") {
        const auto eps = rng.normal_tensor<double>({4, 4, 2});
        CHECK_THROWS_AS(q_sample(z0, 0, eps, s), Error);
        CHECK_THROWS_AS(q_sample(z0, 101, eps, s), Error);
    }
}

TEST_CASE("forward-process noise variance (quick Monte Carlo)") {
    const auto s = NoiseSchedule::linear(100, 1e-4, 0.02);
    Rng rng(22);
    const auto z0 = rng.normal_tensor<double>({4, 4, 1});
    for (int t : {1, 50, 100}) {
        const int draws = 2000;
        double acc = 0.0;
        std::int64_t count = 0;
        const double a = std::sqrt(s.alpha_bar(t));
        for (int d = 0; d < draws; ++d) {
            const auto eps = rng.normal_tensor<double>({4, 4, 1});
            const auto zt = q_sample(z0, t, eps, s);
            for (std::int64_t i = 0; i < zt.numel(); ++i) {
                const double r = zt[i] - a * z0[i];
                acc += r * r;
                ++count;
            }
        }
        const double var = acc / static_cast<double>(count);
        CHECK(var == doctest::Approx(1.0 - s.alpha_bar(t)).epsilon(0.03));
    }
}

TEST_CASE("predict_z0 inverts q_sample") {
    const auto s = NoiseSchedule::linear(200, 1e-4, 0.02);
    Rng rng(23);
    const auto z0 = rng.normal_tensor<double>({3, 3, 4});
    const auto eps = rng.normal_tensor<double>({3, 3, 4});
    for (int t : {1, 100, 200}) {
        const auto zt = q_sample(z0, t, eps, s);
        const auto rec = predict_z0(zt, t, eps, s);
        CHECK(relative_error(rec, z0) < 1e-6);
    }
    SUBCASE("zero noise estimate") {
        const int t = 60;
        const auto zt = q_sample(z0, t, eps, s);
        const auto rec = predict_z0(zt, t, Tensor<double>::zeros({3, 3, 4}), s);
        const double inv = 1.0 / std::sqrt(s.alpha_bar(t));
        for (std::int64_t i = 0; i < zt.numel(); ++i)
            CHECK(rec[i] == doctest::Approx(zt[i] * inv).epsilon(1e-12));
    }
}

TEST_CASE("epsilon-form and z0-form losses agree (schedule identity)") {
    const auto s = NoiseSchedule::linear(500, 1e-4, 0.02);
    Rng rng(24);
    for (int trial = 0; trial < 25; ++trial) {
        const int t = static_cast<int>(rng.uniform_int(1, 500));
        const auto z0 = rng.normal_tensor<double>({4, 4, 3});
        const auto eps = rng.normal_tensor<double>({4, 4, 3});
        const auto eps_hat = rng.normal_tensor<double>({4, 4, 3});
        const auto zt = q_sample(z0, t, eps, s);
        const auto z0_hat = predict_z0(zt, t, eps_hat, s);
        const double lhs = mean_squared_error(eps, eps_hat);
        const double rhs = s.snr_weight(t) * mean_squared_error(z0, z0_hat);
        CHECK(std::abs(lhs - rhs) / std::max(lhs, 1e-30) < 1e-6);
    }
}

TEST_CASE("ddpm posterior step") {
    Rng rng(25);
    const auto z0 = rng.normal_tensor<double>({4, 4, 2});
    SUBCASE("oracle chain recovers z0") {
        const auto s = NoiseSchedule::linear(200, 1e-4, 0.02);
        OracleDenoiser<double> oracle{z0, s};
        Rng chain(4);
        Tensor<double> z = chain.normal_tensor<double>({4, 4, 2});
        for (int t = 200; t >= 1; --t) {
            const auto eps_hat = oracle.apply(z, t, {});
            Tensor<double> noise;
            if (t > 1) noise = chain.normal_tensor<double>({4, 4, 2});
            z = posterior_step_ddpm(z, t, eps_hat, s, noise);
        }
        CHECK(relative_error(z, z0) < 0.05);
    }
    SUBCASE("vanishing beta approaches identity") {
        const auto s = NoiseSchedule::linear(10, 1e-9, 1e-9);
        const auto zt = rng.normal_tensor<double>({2, 2, 1});
        const auto eps_hat = rng.normal_tensor<double>({2, 2, 1});
        const auto prev =
            posterior_step_ddpm(zt, 1, eps_hat, s, Tensor<double>());
        CHECK(relative_error(prev, zt) < 1e-4);
    }
    SUBCASE("t = 0 is rejected") {
        const auto s = NoiseSchedule::linear(10, 1e-4, 0.02);
        CHECK_THROWS_AS(posterior_step_ddpm(z0, 0, z0, s, z0), Error);
    }
}

TEST_CASE("ddim step") {
    const auto s = NoiseSchedule::linear(200, 1e-4, 0.02);
    Rng rng(26);
    const auto z0 = rng.normal_tensor<double>({4, 4, 2});
    OracleDenoiser<double> oracle{z0, s};

    SUBCASE("oracle exactness for any step count") {
        for (int steps : {1, 10, 50}) {
            Rng chain(9);
            Tensor<double> z = chain.normal_tensor<double>({4, 4, 2});
            const auto ts = sampler_timesteps(200, steps);
            for (std::size_t i = 0; i < ts.size(); ++i) {
                const int t = ts[i];
                const int tp = i + 1 < ts.size() ? ts[i + 1] : 0;
                z = ddim_step(z, t, tp, oracle.apply(z, t, {}), s, 0.0);
            }
            CHECK(relative_error(z, z0) < 1e-5);
        }
    }
    SUBCASE("ordering violations throw") {
        const auto eps = rng.normal_tensor<double>({4, 4, 2});
        const auto zt = q_sample(z0, 10, eps, s);
        CHECK_THROWS_AS(ddim_step(zt, 10, 10, eps, s, 0.0), Error);
        CHECK_THROWS_AS(ddim_step(zt, 10, 12, eps, s, 0.0), Error);
        CHECK_THROWS_AS(ddim_step(zt, 10, 5, eps, s, 1.5), Error);
    }
}

TEST_CASE("sampler timestep subsequences") {
    const auto ts = sampler_timesteps(200, 10);
    CHECK(ts.front() == 200);
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    CHECK(ts.back() >= 1);
    const auto full = sampler_timesteps(50, 50);
    CHECK(full.size() == 50);
    CHECK(full.front() == 50);
    CHECK(full.back() == 1);
    CHECK_THROWS_AS(sampler_timesteps(50, 51), Error);
}

TEST_CASE("sample determinism and unconditional input") {
    const auto s = NoiseSchedule::linear(50, 1e-4, 0.02);
    Rng rng(27);
    const auto z0 = rng.normal_tensor<double>({4, 4, 2});
    OracleDenoiser<double> oracle{z0, s};
    Rng r1(77), r2(77), r3(78);
    const auto a = sample<double>(oracle, {4, 4, 2}, {}, s, 10, 0.0, r1);
    const auto b = sample<double>(oracle, {4, 4, 2}, {}, s, 10, 0.0, r2);
    const auto c = sample<double>(oracle, {4, 4, 2}, {}, s, 10, 0.0, r3);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(relative_error(a, z0) < 1e-5); // oracle: any start converges to z0
    CHECK(a.same_shape(c));
}

TEST_CASE("make_sr_condition shape contract") {
    Rng rng(28);
    AutoEncoderConfig cfg;
    cfg.downsample_log2 = 2;
    cfg.latent_channels = 4;
    cfg.feature_channels = 8;
    cfg.n_resblocks = 1;
    cfg.norm_groups = 2;
    Encoder<float> enc(cfg);
    enc.init(rng);
    const auto lr = rng.uniform_tensor<float>({16, 16, 3}, -1.0, 1.0);
    const auto cond = make_sr_condition(lr, enc, 16, 16, cfg.downsample_log2, 1.7);
    CHECK(cond.dim(0) == 16);
    CHECK(cond.dim(1) == 16);
    CHECK(cond.dim(2) == 4);

    SUBCASE("cond dims track the requested latent dims") {
        for (int hw : {8, 12, 16}) {
            const auto c2 = make_sr_condition(lr, enc, hw, hw, cfg.downsample_log2, 1.7);
            CHECK(c2.dim(0) == hw);
            CHECK(c2.dim(1) == hw);
        }
    }
    SUBCASE("constant LR image yields near-constant conditioning") {
        const auto flat = Tensor<float>::full({16, 16, 3}, 0.25f);
        const auto c2 = make_sr_condition(flat, enc, 16, 16, cfg.downsample_log2, 1.0);
        // Conv padding plus GroupNorm leave some border variation; the bound
        // below was recorded on random init (interior variance ~3e-5, versus
        // O(1) for structured inputs).
        double mean = 0.0;
        int count = 0;
        for (int r = 4; r < 12; ++r)
            for (int c = 4; c < 12; ++c) {
                mean += c2.at(r, c, 0);
                ++count;
            }
        mean /= count;
        double var = 0.0;
        for (int r = 4; r < 12; ++r)
            for (int c = 4; c < 12; ++c) {
                const double d = c2.at(r, c, 0) - mean;
                var += d * d;
            }
        var /= count;
        CHECK(var < 1e-3);
    }
}

TEST_CASE("denoising loss with stub denoisers") {
    const auto s = NoiseSchedule::linear(100, 1e-4, 0.02);
    Rng rng(29);
    const auto z0 = rng.normal_tensor<double>({4, 4, 2});
    const auto eps = rng.normal_tensor<double>({4, 4, 2});

    struct EchoNoise { // predicts exactly the injected noise
        const Tensor<double>& eps;
        Tensor<double> apply(const Tensor<double>&, int, const Tensor<double>&) const {
            return eps;
        }
    };
    struct Zero {
        Tensor<double> apply(const Tensor<double>& z, int, const Tensor<double>&) const {
            return Tensor<double>::zeros(z.shape());
        }
    };

    CHECK(denoising_loss<double>(EchoNoise{eps}, z0, 17, eps, {}, s) == 0.0);
    CHECK(denoising_loss<double>(Zero{}, z0, 17, eps, {}, s) ==
          doctest::Approx(mean_squared_error(eps, Tensor<double>::zeros({4, 4, 2}))));
}

} // TEST_SUITE
