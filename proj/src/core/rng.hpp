// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "core/tensor.hpp"

namespace arbiscale {

// Deterministic random stream. Uniform and normal draws are generated from
// the raw mt19937_64 output directly (no std::distribution) so that a given
// seed produces the same sequence on every platform. Gaussian draws use
// Box-Muller with a cached spare.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_base_(seed), engine_(mix(seed)) {}

    // Derive an independent stream, e.g. one per sampling chain or worker.
    // Pure function of (seed, stream); forked streams never advance the parent.
    Rng fork(std::uint64_t stream) const {
        return Rng(mix(seed_base_ ^ (0x9e3779b97f4a7c15ull * (stream + 1))));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        require(hi >= lo, Status::kInvalidArgument, "uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection sampling keeps the draw exactly uniform.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    Tensor<T> normal_tensor(std::vector<int> shape, double stddev = 1.0) {
        Tensor<T> t(std::move(shape));
        for (std::int64_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<T>(normal() * stddev);
        return t;
    }

    template <typename T>
    Tensor<T> uniform_tensor(std::vector<int> shape, double lo, double hi) {
        Tensor<T> t(std::move(shape));
        for (std::int64_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<T>(lo + uniform() * (hi - lo));
        return t;
    }

private:
    // splitmix64 finalizer; decorrelates adjacent integer seeds.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_base_ = 0;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace arbiscale
