// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <json.hpp>

namespace arbiscale {

std::string metric_report_json(const MetricReport& report) {
    nlohmann::json j;
    j["name"] = report.name;
    if (std::isinf(report.value))
        j["value"] = report.value > 0 ? "inf" : "-inf";
    else
        j["value"] = report.value;
    j["units"] = report.units;
    j["context"] = report.context;
    return j.dump();
}

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(n));
    const double c = (n - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Valid-mode separable filtering of one channel extracted as doubles.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& win, int& oh, int& ow) {
    const int n = static_cast<int>(win.size());
    oh = h - n + 1;
    ow = w - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(oh) * w, 0.0);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += win[static_cast<std::size_t>(k)] * img[static_cast<std::size_t>(r + k) * w + c];
            rows[static_cast<std::size_t>(r) * w + c] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += win[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(r) * w + c + k];
            out[static_cast<std::size_t>(r) * ow + c] = acc;
        }
    return out;
}

} // namespace

double ssim(const Tensor<float>& a, const Tensor<float>& b, const SsimOptions& opts) {
    require(a.same_shape(b), Status::kInvalidArgument, "ssim: shape mismatch");
    require(a.rank() == 3, Status::kInvalidArgument, "ssim: expected HxWxC images");
    require(opts.window % 2 == 1 && opts.window >= 3, Status::kInvalidArgument,
            "ssim: window must be odd and >= 3");
    const int h = a.dim(0), w = a.dim(1), ch = a.dim(2);
    require(h >= opts.window && w >= opts.window, Status::kInvalidArgument,
            "ssim: image smaller than the window");
    const auto win = gaussian_window(opts.window, opts.sigma);
    const double c1 = (opts.k1 * opts.data_range) * (opts.k1 * opts.data_range);
    const double c2 = (opts.k2 * opts.data_range) * (opts.k2 * opts.data_range);

    double total = 0.0;
    std::int64_t count = 0;
    std::vector<double> pa(static_cast<std::size_t>(h) * w), pb(pa.size()), paa(pa.size()),
        pbb(pa.size()), pab(pa.size());
    for (int c = 0; c < ch; ++c) {
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col) {
                const double va = a.at(r, col, c);
                const double vb = b.at(r, col, c);
                const std::size_t i = static_cast<std::size_t>(r) * w + col;
                pa[i] = va;
                pb[i] = vb;
                paa[i] = va * va;
                pbb[i] = vb * vb;
                pab[i] = va * vb;
            }
        int oh = 0, ow = 0;
        const auto mu1 = filter_valid(pa, h, w, win, oh, ow);
        const auto mu2 = filter_valid(pb, h, w, win, oh, ow);
        const auto m11 = filter_valid(paa, h, w, win, oh, ow);
        const auto m22 = filter_valid(pbb, h, w, win, oh, ow);
        const auto m12 = filter_valid(pab, h, w, win, oh, ow);
        for (std::size_t i = 0; i < mu1.size(); ++i) {
            const double v1 = m11[i] - mu1[i] * mu1[i];
            const double v2 = m22[i] - mu2[i] * mu2[i];
            const double cov = m12[i] - mu1[i] * mu2[i];
            const double num = (2.0 * mu1[i] * mu2[i] + c1) * (2.0 * cov + c2);
            const double den = (mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1) * (v1 + v2 + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double self_ssim(const Tensor<float>& a, const Tensor<float>& b, const SsimOptions& opts) {
    const int th = std::min(a.dim(0), b.dim(0));
    const int tw = std::min(a.dim(1), b.dim(1));
    const Tensor<float> da = (a.dim(0) == th && a.dim(1) == tw)
                                 ? a
                                 : resize(a, th, tw, ResizeFilter::kBicubic, true);
    const Tensor<float> db = (b.dim(0) == th && b.dim(1) == tw)
                                 ? b
                                 : resize(b, th, tw, ResizeFilter::kBicubic, true);
    return ssim(da, db, opts);
}

GradCheckResult grad_check(const std::function<double()>& loss,
                           std::vector<nn::ParamRef<double>>& params,
                           const std::vector<Tensor<double>>& analytic, double step) {
    require(step > 0.0, Status::kInvalidArgument, "grad_check: step must be positive");
    require(analytic.size() == params.size(), Status::kInvalidArgument,
            "grad_check: analytic gradient count mismatch");
    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor<double>& value = *params[p].value;
        require(analytic[p].same_shape(value), Status::kInvalidArgument,
                "grad_check: analytic gradient shape mismatch for " + params[p].name);
        for (std::int64_t i = 0; i < value.numel(); ++i) {
            const double saved = value[i];
            value[i] = saved + step;
            const double up = loss();
            value[i] = saved - step;
            const double down = loss();
            value[i] = saved;
            require(std::isfinite(up) && std::isfinite(down), Status::kNumeric,
                    "grad_check: non-finite loss while perturbing " + params[p].name);
            const double fd = (up - down) / (2.0 * step);
            const double g = analytic[p][i];
            const double rel =
                std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-8});
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = params[p].name;
                result.worst_index = i;
            }
        }
    }
    return result;
}

} // namespace arbiscale
