// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "models/autoencoder.hpp"
#include "models/denoiser.hpp"

namespace arbiscale {

// Variance schedule: beta_t for t = 1..T with alpha_t = 1 - beta_t and
// alpha_bar_t the running product of alpha_s for s <= t. alpha_bar(0) = 1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    static NoiseSchedule linear(int steps, double beta_start, double beta_end) {
        require(steps >= 1, Status::kInvalidArgument, "schedule: T must be >= 1");
        require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                Status::kInvalidArgument,
                "schedule: need 0 < beta_start <= beta_end < 1");
        NoiseSchedule s;
        s.beta_.resize(static_cast<std::size_t>(steps));
        s.alpha_.resize(static_cast<std::size_t>(steps));
        s.alpha_bar_.resize(static_cast<std::size_t>(steps));
        double prod = 1.0;
        for (int t = 0; t < steps; ++t) {
            const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
            const double b = beta_start + (beta_end - beta_start) * frac;
            s.beta_[static_cast<std::size_t>(t)] = b;
            s.alpha_[static_cast<std::size_t>(t)] = 1.0 - b;
            prod *= 1.0 - b;
            s.alpha_bar_[static_cast<std::size_t>(t)] = prod;
        }
        return s;
    }

    int steps() const { return static_cast<int>(beta_.size()); }

    double beta(int t) const {
        check(t);
        return beta_[static_cast<std::size_t>(t - 1)];
    }

    double alpha(int t) const {
        check(t);
        return alpha_[static_cast<std::size_t>(t - 1)];
    }

    // alpha_bar(0) == 1 by convention; needed by the final sampler step.
    double alpha_bar(int t) const {
        require(t >= 0 && t <= steps(), Status::kInvalidArgument,
                "schedule: step index out of range");
        return t == 0 ? 1.0 : alpha_bar_[static_cast<std::size_t>(t - 1)];
    }

    // Weight shared by the latent and image reconstruction losses.
    double snr_weight(int t) const {
        const double ab = alpha_bar(t);
        return ab / (1.0 - ab);
    }

    const std::vector<double>& betas() const { return beta_; }

private:
    void check(int t) const {
        require(t >= 1 && t <= steps(), Status::kInvalidArgument,
                "schedule: step index out of range");
    }

    std::vector<double> beta_, alpha_, alpha_bar_;
};

// Closed-form forward process: sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
template <typename T>
Tensor<T> q_sample(const Tensor<T>& z0, int t, const Tensor<T>& eps, const NoiseSchedule& s) {
    require(eps.same_shape(z0), Status::kInvalidArgument, "q_sample: eps shape mismatch");
    const double ab = s.alpha_bar(t);
    require(t >= 1 && t <= s.steps(), Status::kInvalidArgument, "q_sample: t out of range");
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor<T> out(z0.shape());
    for (std::int64_t i = 0; i < z0.numel(); ++i)
        out[i] = static_cast<T>(a * z0[i] + b * eps[i]);
    return out;
}

// Invert the forward process given a noise estimate.
template <typename T>
Tensor<T> predict_z0(const Tensor<T>& z_t, int t, const Tensor<T>& eps_hat,
                     const NoiseSchedule& s) {
    require(eps_hat.same_shape(z_t), Status::kInvalidArgument, "predict_z0: shape mismatch");
    const double ab = s.alpha_bar(t);
    // Epsilon floor guards the division as abar underflows at late t.
    const double inv = 1.0 / std::max(std::sqrt(ab), 1e-12);
    const double b = std::sqrt(1.0 - ab);
    Tensor<T> out(z_t.shape());
    for (std::int64_t i = 0; i < z_t.numel(); ++i)
        out[i] = static_cast<T>((z_t[i] - b * eps_hat[i]) * inv);
    return out;
}

// Mean squared noise-prediction error (the epsilon-form training loss).
// Any denoiser exposing apply(z_t, t, cond) fits, which lets tests inject
// stub and oracle denoisers.
template <typename T, typename Denoiser>
double denoising_loss(const Denoiser& denoiser, const Tensor<T>& z0, int t,
                      const Tensor<T>& eps, const Tensor<T>& cond, const NoiseSchedule& s) {
    const Tensor<T> z_t = q_sample(z0, t, eps, s);
    const Tensor<T> eps_hat = denoiser.apply(z_t, t, cond);
    const double loss = mean_squared_error(eps_hat, eps);
    require(std::isfinite(loss), Status::kNumeric, "denoising_loss: non-finite loss");
    return loss;
}

// One reverse DDPM step. The posterior mean uses the minus sign consistent
// with the forward process; variance is beta_t, and t = 1 adds no noise.
template <typename T>
Tensor<T> posterior_step_ddpm(const Tensor<T>& z_t, int t, const Tensor<T>& eps_hat,
                              const NoiseSchedule& s, const Tensor<T>& noise) {
    require(t >= 1 && t <= s.steps(), Status::kInvalidArgument,
            "posterior_step_ddpm: t out of range");
    require(eps_hat.same_shape(z_t), Status::kInvalidArgument,
            "posterior_step_ddpm: eps shape mismatch");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    const double coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
    const double sigma = t > 1 ? std::sqrt(s.beta(t)) : 0.0;
    if (t > 1)
        require(noise.same_shape(z_t), Status::kInvalidArgument,
                "posterior_step_ddpm: noise shape mismatch");
    Tensor<T> out(z_t.shape());
    for (std::int64_t i = 0; i < z_t.numel(); ++i) {
        double v = inv_sqrt_alpha * (static_cast<double>(z_t[i]) - coef * eps_hat[i]);
        if (t > 1) v += sigma * noise[i];
        out[i] = static_cast<T>(v);
    }
    return out;
}

// One DDIM step from t to t_prev (t_prev may be 0). eta = 0 is deterministic.
template <typename T>
Tensor<T> ddim_step(const Tensor<T>& z_t, int t, int t_prev, const Tensor<T>& eps_hat,
                    const NoiseSchedule& s, double eta, const Tensor<T>* noise = nullptr) {
    require(t >= 1 && t <= s.steps(), Status::kInvalidArgument, "ddim_step: t out of range");
    require(t_prev >= 0 && t_prev < t, Status::kInvalidArgument,
            "ddim_step: t_prev must precede t");
    require(eta >= 0.0 && eta <= 1.0, Status::kInvalidArgument, "ddim_step: eta in [0,1]");
    const double ab_t = s.alpha_bar(t);
    const double ab_p = s.alpha_bar(t_prev);
    const double sigma =
        eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
    const double dir = std::sqrt(std::max(1.0 - ab_p - sigma * sigma, 0.0));
    const Tensor<T> z0_hat = predict_z0(z_t, t, eps_hat, s);
    const double a = std::sqrt(ab_p);
    Tensor<T> out(z_t.shape());
    for (std::int64_t i = 0; i < z_t.numel(); ++i) {
        double v = a * z0_hat[i] + dir * eps_hat[i];
        if (sigma > 0.0) {
            require(noise != nullptr && noise->same_shape(z_t), Status::kInvalidArgument,
                    "ddim_step: stochastic step needs noise");
            v += sigma * (*noise)[i];
        }
        out[i] = static_cast<T>(v);
    }
    return out;
}

enum class SamplerKind { kDdim, kDdpm };

// Descending step subsequence t_1 > ... > t_n, uniformly spread over [1, T]
// and always containing T. The sampler walks pairs (t_i -> t_{i+1}) and
// finishes at 0.
inline std::vector<int> sampler_timesteps(int total_steps, int steps) {
    require(steps >= 1 && steps <= total_steps, Status::kInvalidArgument,
            "sample: steps must be in [1, T]");
    std::vector<int> ts;
    ts.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        int t = static_cast<int>(std::lround(total_steps - frac * (total_steps - 1)));
        if (ts.empty() || t < ts.back()) ts.push_back(t);
    }
    return ts;
}

// Draw z_T ~ N(0, I) and run the reverse process; returns the z0 estimate in
// the normalized latent space. The caller multiplies by latent_scale before
// decoding. Resolution never enters here, which is what keeps sampling cost
// independent of the output scale.
template <typename T, typename Denoiser>
Tensor<T> sample(const Denoiser& denoiser, const std::vector<int>& latent_shape,
                 const Tensor<T>& cond, const NoiseSchedule& s, int steps, double eta, Rng& rng,
                 SamplerKind kind = SamplerKind::kDdim) {
    Tensor<T> z = rng.normal_tensor<T>(latent_shape);
    if (kind == SamplerKind::kDdpm) {
        require(steps == s.steps(), Status::kInvalidArgument,
                "sample: the DDPM sampler runs the full schedule");
        for (int t = s.steps(); t >= 1; --t) {
            const Tensor<T> eps_hat = denoiser.apply(z, t, cond);
            Tensor<T> noise;
            if (t > 1) noise = rng.normal_tensor<T>(latent_shape);
            z = posterior_step_ddpm(z, t, eps_hat, s, noise);
        }
        return z;
    }
    const std::vector<int> ts = sampler_timesteps(s.steps(), steps);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        const Tensor<T> eps_hat = denoiser.apply(z, t, cond);
        if (eta > 0.0) {
            const Tensor<T> noise = rng.normal_tensor<T>(latent_shape);
            z = ddim_step(z, t, t_prev, eps_hat, s, eta, &noise);
        } else {
            z = ddim_step(z, t, t_prev, eps_hat, s, eta);
        }
    }
    require(z.all_finite(), Status::kNumeric, "sample: non-finite latent");
    return z;
}

// LR-image conditioning: bilinearly lift the LR image to the encoder's input
// resolution for the target latent grid, encode with the frozen encoder and
// normalize into the diffusion latent space.
template <typename T>
Tensor<T> make_sr_condition(const Tensor<T>& lr_image, const Encoder<T>& encoder, int latent_h,
                            int latent_w, int downsample_log2, double latent_scale) {
    require(lr_image.rank() == 3 && lr_image.dim(2) == 3, Status::kInvalidArgument,
            "make_sr_condition: expected an HxWx3 LR image");
    const int f = 1 << downsample_log2;
    const Tensor<T> lifted =
        resize(lr_image, latent_h * f, latent_w * f, ResizeFilter::kBilinear, false);
    Tensor<T> cond = encoder.apply(lifted);
    const T inv = static_cast<T>(1.0 / latent_scale);
    cond *= inv;
    return cond;
}

} // namespace arbiscale
