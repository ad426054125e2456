// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nn/layers.hpp"

namespace arbiscale::nn {

// Adam with bias correction. Moment buffers are indexed by position in the
// parameter registry, which is stable for a given model.
template <typename T>
class Adam {
public:
    Adam() = default;

    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    void step(std::vector<ParamRef<T>>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.value->shape());
                v_.emplace_back(p.value->shape());
            }
        }
        require(m_.size() == params.size(), Status::kInternal,
                "adam: parameter registry changed size");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& w = *params[i].value;
            Tensor<T>& g = *params[i].grad;
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (std::int64_t j = 0; j < w.numel(); ++j) {
                const double gj = static_cast<double>(g[j]);
                const double mj = beta1_ * m[j] + (1.0 - beta1_) * gj;
                const double vj = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                w[j] -= static_cast<T>(lr_ * (mj / bc1) / (std::sqrt(vj / bc2) + eps_));
            }
        }
    }

private:
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace arbiscale::nn
