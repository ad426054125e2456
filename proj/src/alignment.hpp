// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffusion.hpp"
#include "models/implicit_decoder.hpp"

namespace arbiscale {

enum class AlignMode { kRandomT, kTrajectory };

struct AlignConfig {
    double lambda1 = 1.0; // weight of the latent denoising term
    double lambda2 = 1.0; // weight of the image reconstruction term
    AlignMode mode = AlignMode::kTrajectory;
    int recon_h = 0, recon_w = 0; // 0 = stage-1 training resolution
    double finetune_lr = 1e-6;
    int ddim_steps = 20;
    int coord_samples = 1024; // sampled ground-truth pixels per batch
    int steps = 500;

    void validate() const {
        require(lambda1 >= 0.0 && lambda2 >= 0.0, Status::kConfig,
                "align: lambda weights must be non-negative");
        require(ddim_steps >= 1, Status::kConfig, "align: ddim_steps must be >= 1");
        require(coord_samples >= 1, Status::kConfig, "align: coord_samples must be >= 1");
        require(finetune_lr > 0.0, Status::kConfig, "align: finetune_lr must be positive");
    }
};

// Shared time-dependent weight applied to both the latent and the image
// reconstruction losses: abar_t / (1 - abar_t) times the mean squared error.
template <typename T>
double weighted_mse(const Tensor<T>& target, const Tensor<T>& estimate, int t,
                    const NoiseSchedule& s) {
    require(target.same_shape(estimate), Status::kInvalidArgument,
            "weighted_mse: shape mismatch");
    require(t >= 1 && t <= s.steps(), Status::kInvalidArgument, "weighted_mse: t out of range");
    return s.snr_weight(t) * mean_squared_error(target, estimate);
}

// Image-space reconstruction loss at step t.
template <typename T>
double recon_loss(const Tensor<T>& x0, const Tensor<T>& x0_hat, int t, const NoiseSchedule& s) {
    return weighted_mse(x0, x0_hat, t, s);
}

// z0-form denoising loss; equals the epsilon-form loss by the schedule
// identity, which the tests assert.
template <typename T>
double dm_loss_z0(const Tensor<T>& z0, const Tensor<T>& z0_hat, int t, const NoiseSchedule& s) {
    return weighted_mse(z0, z0_hat, t, s);
}

struct AlignLossParts {
    double total = 0.0;
    double dm = 0.0;
    double recon = 0.0;
};

// Combined alignment loss at a given chain state z_t, with gradients
// accumulated into the denoiser only. The implicit decoder is frozen:
// gradients flow through it into the latent estimate, but none of its
// parameters receive a gradient.
//
// Ground truth arrives as sampled pixels (gt_rgb at coords/cells), matching
// how fine-tuning batches are drawn. Trajectory-mode fine-tuning calls this
// directly with states visited by the reverse DDIM chain.
template <typename T, typename Denoiser>
AlignLossParts align_loss_at(Denoiser& denoiser, ImplicitDecoder<T>& decoder,
                             const Tensor<T>& gt_rgb, const CoordGrid& coords,
                             const Cell& cells, const Tensor<T>& z0, const Tensor<T>& z_t,
                             int t, const Tensor<T>& cond, const NoiseSchedule& sched,
                             double latent_scale, double lambda1, double lambda2,
                             bool compute_grads = true,
                             Tensor<T>* eps_hat_out = nullptr) {
    const Tensor<T> eps_hat = denoiser.forward(z_t, t, cond, compute_grads);
    if (eps_hat_out) *eps_hat_out = eps_hat;
    const Tensor<T> z0_hat = predict_z0(z_t, t, eps_hat, sched);
    const double w = sched.snr_weight(t);

    AlignLossParts parts;
    parts.dm = dm_loss_z0(z0, z0_hat, t, sched);

    Tensor<T> scaled = z0_hat;
    scaled *= static_cast<T>(latent_scale);
    const Tensor<T> fmap = decoder.features_forward(scaled, compute_grads);
    const Tensor<T> rgb = decoder.query_rgb(fmap, coords, cells, compute_grads);
    parts.recon = recon_loss(gt_rgb, rgb, t, sched);
    parts.total = lambda1 * parts.dm + lambda2 * parts.recon;
    require(std::isfinite(parts.total), Status::kNumeric,
            "align_loss: non-finite loss at t=" + std::to_string(t));
    if (!compute_grads) return parts;

    // d(recon)/d(rgb), through the frozen decoder stack into z0_hat.
    Tensor<T> grgb(rgb.shape());
    const double rs = lambda2 * w * 2.0 / static_cast<double>(rgb.numel());
    for (std::int64_t i = 0; i < rgb.numel(); ++i)
        grgb[i] = static_cast<T>(rs * (static_cast<double>(rgb[i]) - gt_rgb[i]));
    const Tensor<T> gfmap = decoder.query_rgb_backward(grgb, /*accumulate_param_grads=*/false);
    Tensor<T> gz0_hat = decoder.features_backward(gfmap, /*accumulate_param_grads=*/false);
    gz0_hat *= static_cast<T>(latent_scale);

    // Plus d(dm)/d(z0_hat).
    const double ds = lambda1 * w * 2.0 / static_cast<double>(z0.numel());
    for (std::int64_t i = 0; i < z0.numel(); ++i)
        gz0_hat[i] += static_cast<T>(ds * (static_cast<double>(z0_hat[i]) - z0[i]));

    // Through predict_z0 into the noise estimate.
    const double ab = sched.alpha_bar(t);
    const double deps = -std::sqrt(1.0 - ab) / std::max(std::sqrt(ab), 1e-12);
    Tensor<T> geps(gz0_hat.shape());
    for (std::int64_t i = 0; i < gz0_hat.numel(); ++i)
        geps[i] = static_cast<T>(deps * gz0_hat[i]);
    require(geps.all_finite(), Status::kNumeric,
            "align_loss: non-finite gradient at t=" + std::to_string(t));
    denoiser.backward(geps, /*accumulate_param_grads=*/true);
    return parts;
}

// Random-t form: noise z0 forward to step t first.
template <typename T, typename Denoiser>
AlignLossParts align_loss(Denoiser& denoiser, ImplicitDecoder<T>& decoder,
                          const Tensor<T>& gt_rgb, const CoordGrid& coords, const Cell& cells,
                          const Tensor<T>& z0, int t, const Tensor<T>& eps,
                          const Tensor<T>& cond, const NoiseSchedule& sched, double latent_scale,
                          double lambda1, double lambda2, bool compute_grads = true) {
    const Tensor<T> z_t = q_sample(z0, t, eps, sched);
    return align_loss_at(denoiser, decoder, gt_rgb, coords, cells, z0, z_t, t, cond, sched,
                         latent_scale, lambda1, lambda2, compute_grads);
}

} // namespace arbiscale
