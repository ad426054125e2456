// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "alignment.hpp"
#include "data/dataset.hpp"
#include "models/implicit_decoder.hpp"

namespace arbiscale {

struct DiffusionRunConfig {
    int timesteps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string schedule = "linear";
    bool conditional = false;
    int sample_steps = 50;
    double eta = 0.0;
    std::string sampler = "ddim"; // or "ddpm"
    DenoiserConfig denoiser;

    NoiseSchedule build_schedule() const {
        require(schedule == "linear", Status::kConfig, "diffusion.schedule must be 'linear'");
        return NoiseSchedule::linear(timesteps, beta_start, beta_end);
    }
};

struct TrainLoopConfig {
    int steps = 2000;
    int batch_size = 4;
    double lr = 5e-5;
    int log_every = 50;
    int checkpoint_every = 1000;
};

struct MetricsRunConfig {
    int ssim_window = 11;
    std::vector<double> eval_scales; // empty = paper grid filtered in-range
    int eval_images = 4;
    double selfssim_factor = 1.5;
};

struct RunConfig {
    std::string task;
    std::uint64_t seed = 0;
    bool deterministic = false;
    std::string out_dir = "runs/out";
    DatasetSpec data;
    AutoEncoderConfig autoencoder;
    ImplicitDecoderConfig decoder;
    bool cell_clamp = true;
    DiffusionRunConfig diffusion;
    AlignConfig align;
    TrainLoopConfig train;
    MetricsRunConfig metrics;

    // Native latent grid side for the training crop.
    int latent_side() const { return data.crop_size >> autoencoder.downsample_log2; }
};

// Strict parse: unknown keys are rejected with their field path; every value
// is type- and range-checked. Cross-field consistency is validated here too.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Canonical snapshot with all defaults materialized; re-parsing the snapshot
// reproduces the same configuration.
nlohmann::json run_config_to_json(const RunConfig& cfg);

// The published configuration schema (field paths, types, defaults).
std::string config_schema_json();

const std::vector<std::string>& known_tasks();

} // namespace arbiscale
