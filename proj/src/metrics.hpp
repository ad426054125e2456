// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>

#include "core/resize.hpp"
#include "core/tensor.hpp"
#include "nn/layers.hpp"

namespace arbiscale {

struct MetricReport {
    std::string name;
    double value = 0.0;
    std::string units;
    std::map<std::string, std::string> context;
};

std::string metric_report_json(const MetricReport& report);

struct SsimOptions {
    int window = 11;
    double k1 = 0.01;
    double k2 = 0.03;
    double sigma = 1.5;
    double data_range = 2.0; // images live in [-1, 1]
};

// 10 log10(peak^2 / MSE); identical inputs return +infinity.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak) {
    require(a.same_shape(b), Status::kInvalidArgument, "psnr: shape mismatch");
    require(peak > 0.0, Status::kInvalidArgument, "psnr: peak must be positive");
    const double mse = mean_squared_error(a, b);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor<float>& a, const Tensor<float>& b, const SsimOptions& opts = {});

// Scale-consistency metric: bicubic-downsample both renders to the smaller
// of the two resolutions, then SSIM.
double self_ssim(const Tensor<float>& a, const Tensor<float>& b, const SsimOptions& opts = {});

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::int64_t worst_index = -1;
};

// Central finite differences per coordinate against the analytic gradient.
// `loss` re-evaluates the loss at the current parameter values; `analytic`
// holds one gradient tensor per registry entry, captured before the check.
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::vector<nn::ParamRef<double>>& params,
                           const std::vector<Tensor<double>>& analytic, double step);

} // namespace arbiscale
