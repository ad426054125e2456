// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <fstream>
#include <set>

namespace arbiscale {

namespace {

using nlohmann::json;

class ObjReader {
public:
    ObjReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j_.is_object(), Status::kConfig, where() + " must be a JSON object");
    }

    std::string where() const { return path_.empty() ? "config" : path_; }

    std::string key_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    int get_int(const std::string& key, int def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_number_integer(), Status::kConfig,
                key_path(key) + " must be an integer");
        return v.get<int>();
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_number_unsigned() || v.is_number_integer(), Status::kConfig,
                key_path(key) + " must be a non-negative integer");
        require(v.get<std::int64_t>() >= 0, Status::kConfig,
                key_path(key) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    double get_double(const std::string& key, double def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_number(), Status::kConfig, key_path(key) + " must be a number");
        return v.get<double>();
    }

    bool get_bool(const std::string& key, bool def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_boolean(), Status::kConfig, key_path(key) + " must be a boolean");
        return v.get<bool>();
    }

    std::string get_string(const std::string& key, const std::string& def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_string(), Status::kConfig, key_path(key) + " must be a string");
        return v.get<std::string>();
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_array(), Status::kConfig, key_path(key) + " must be an array");
        std::vector<int> out;
        for (const auto& e : v) {
            require(e.is_number_integer(), Status::kConfig,
                    key_path(key) + " must contain integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        require(v.is_array(), Status::kConfig, key_path(key) + " must be an array");
        std::vector<double> out;
        for (const auto& e : v) {
            require(e.is_number(), Status::kConfig, key_path(key) + " must contain numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    const json* object(const std::string& key) {
        if (!mark(key)) return nullptr;
        const json& v = j_.at(key);
        require(v.is_object(), Status::kConfig, key_path(key) + " must be an object");
        return &v;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            require(seen_.count(it.key()) > 0, Status::kConfig,
                    "unknown key '" + key_path(it.key()) + "'");
    }

private:
    bool mark(const std::string& key) {
        if (!j_.contains(key)) return false;
        seen_.insert(key);
        return true;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

nn::Act parse_activation(const std::string& s, const std::string& where) {
    if (s == "relu") return nn::Act::kRelu;
    if (s == "silu") return nn::Act::kSilu;
    fail(Status::kConfig, where + " must be 'relu' or 'silu'");
}

std::string activation_name(nn::Act a) { return a == nn::Act::kRelu ? "relu" : "silu"; }

} // namespace

const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> tasks = {"train-stage1", "train-ldm", "align",
                                                   "sr",           "generate",  "eval",
                                                   "bench"};
    return tasks;
}

RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    ObjReader root(j, "");
    cfg.task = root.get_string("task", "");
    require(std::find(known_tasks().begin(), known_tasks().end(), cfg.task) !=
                known_tasks().end(),
            Status::kConfig,
            "task must be one of train-stage1|train-ldm|align|sr|generate|eval|bench");
    cfg.seed = root.get_u64("seed", 0);
    cfg.deterministic = root.get_bool("deterministic", false);
    cfg.out_dir = root.get_string("out_dir", "runs/out");

    if (const auto* sub = root.object("data")) {
        ObjReader r(*sub, "data");
        cfg.data.root = r.get_string("root", "");
        cfg.data.crop_size = r.get_int("crop_size", 64);
        cfg.data.scale_max = r.get_double("scale_max", 4.0);
        cfg.data.n_coord_samples = r.get_int("n_coord_samples", 1024);
        r.finish();
    }
    if (const auto* sub = root.object("autoencoder")) {
        ObjReader r(*sub, "autoencoder");
        cfg.autoencoder.downsample_log2 = r.get_int("downsample_log2", 2);
        cfg.autoencoder.latent_channels = r.get_int("latent_channels", 16);
        cfg.autoencoder.feature_channels = r.get_int("feature_channels", 64);
        cfg.autoencoder.n_resblocks = r.get_int("n_resblocks", 4);
        cfg.autoencoder.norm_groups = r.get_int("norm_groups", 8);
        cfg.autoencoder.use_feature_decoder = r.get_bool("use_feature_decoder", true);
        r.finish();
    }
    if (const auto* sub = root.object("mlp")) {
        ObjReader r(*sub, "mlp");
        cfg.decoder.mlp.hidden_layers = r.get_int("hidden_layers", 4);
        cfg.decoder.mlp.hidden_units = r.get_int("hidden_units", 256);
        cfg.decoder.mlp.activation =
            parse_activation(r.get_string("activation", "relu"), "mlp.activation");
        r.finish();
    }
    if (const auto* sub = root.object("decoder")) {
        ObjReader r(*sub, "decoder");
        cfg.decoder.feature_unfold = r.get_bool("feature_unfold", true);
        cfg.decoder.cell_decoding = r.get_bool("cell_decoding", true);
        cfg.cell_clamp = r.get_bool("cell_clamp", true);
        r.finish();
    }
    if (const auto* sub = root.object("diffusion")) {
        ObjReader r(*sub, "diffusion");
        cfg.diffusion.timesteps = r.get_int("timesteps", 200);
        cfg.diffusion.beta_start = r.get_double("beta_start", 1e-4);
        cfg.diffusion.beta_end = r.get_double("beta_end", 0.02);
        cfg.diffusion.schedule = r.get_string("schedule", "linear");
        cfg.diffusion.conditional = r.get_bool("conditional", false);
        cfg.diffusion.sample_steps = r.get_int("sample_steps", 50);
        cfg.diffusion.eta = r.get_double("eta", 0.0);
        cfg.diffusion.sampler = r.get_string("sampler", "ddim");
        require(cfg.diffusion.sampler == "ddim" || cfg.diffusion.sampler == "ddpm",
                Status::kConfig, "diffusion.sampler must be 'ddim' or 'ddpm'");
        if (const auto* dsub = r.object("denoiser")) {
            ObjReader d(*dsub, "diffusion.denoiser");
            cfg.diffusion.denoiser.base_width = d.get_int("base_width", 64);
            cfg.diffusion.denoiser.channel_mult =
                d.get_int_list("channel_mult", {1, 2, 2});
            cfg.diffusion.denoiser.res_per_level = d.get_int("res_per_level", 2);
            cfg.diffusion.denoiser.norm_groups = d.get_int("norm_groups", 8);
            const std::string inj = d.get_string("cond_injection", "input_concat");
            if (inj == "input_concat")
                cfg.diffusion.denoiser.cond_injection = CondInjection::kInputConcat;
            else if (inj == "per_block")
                cfg.diffusion.denoiser.cond_injection = CondInjection::kPerBlock;
            else
                fail(Status::kConfig,
                     "diffusion.denoiser.cond_injection must be 'input_concat' or 'per_block'");
            d.finish();
        }
        r.finish();
    }
    if (const auto* sub = root.object("align")) {
        ObjReader r(*sub, "align");
        cfg.align.lambda1 = r.get_double("lambda1", 1.0);
        cfg.align.lambda2 = r.get_double("lambda2", 1.0);
        const std::string mode = r.get_string("mode", "trajectory");
        if (mode == "random_t")
            cfg.align.mode = AlignMode::kRandomT;
        else if (mode == "trajectory")
            cfg.align.mode = AlignMode::kTrajectory;
        else
            fail(Status::kConfig, "align.mode must be 'random_t' or 'trajectory'");
        const int rr = r.get_int("recon_render", 0);
        require(rr >= 0, Status::kConfig, "align.recon_render must be >= 0");
        cfg.align.recon_h = cfg.align.recon_w = rr;
        cfg.align.finetune_lr = r.get_double("finetune_lr", 1e-6);
        cfg.align.ddim_steps = r.get_int("ddim_steps", 20);
        cfg.align.coord_samples = r.get_int("coord_samples", 1024);
        cfg.align.steps = r.get_int("steps", 500);
        r.finish();
    }
    if (const auto* sub = root.object("train")) {
        ObjReader r(*sub, "train");
        cfg.train.steps = r.get_int("steps", 2000);
        cfg.train.batch_size = r.get_int("batch_size", 4);
        cfg.train.lr = r.get_double("lr", 5e-5);
        cfg.train.log_every = r.get_int("log_every", 50);
        cfg.train.checkpoint_every = r.get_int("checkpoint_every", 1000);
        require(cfg.train.steps >= 1 && cfg.train.batch_size >= 1 && cfg.train.lr > 0.0 &&
                    cfg.train.log_every >= 1 && cfg.train.checkpoint_every >= 1,
                Status::kConfig, "train: steps, batch_size, log_every, checkpoint_every must "
                                 "be positive and lr > 0");
        r.finish();
    }
    if (const auto* sub = root.object("metrics")) {
        ObjReader r(*sub, "metrics");
        cfg.metrics.ssim_window = r.get_int("ssim_window", 11);
        cfg.metrics.eval_scales = r.get_double_list("eval_scales", {});
        cfg.metrics.eval_images = r.get_int("eval_images", 4);
        cfg.metrics.selfssim_factor = r.get_double("selfssim_factor", 1.5);
        require(cfg.metrics.selfssim_factor > 1.0, Status::kConfig,
                "metrics.selfssim_factor must exceed 1");
        r.finish();
    }
    root.finish();

    // Cross-field consistency.
    cfg.autoencoder.validate();
    cfg.decoder.mlp.validate();
    cfg.align.validate();
    const bool needs_data = cfg.task == "train-stage1" || cfg.task == "train-ldm" ||
                            cfg.task == "align" || cfg.task == "eval";
    if (needs_data) cfg.data.validate();
    const int factor = 1 << cfg.autoencoder.downsample_log2;
    require(cfg.data.crop_size % factor == 0, Status::kConfig,
            "data.crop_size must be divisible by 2^autoencoder.downsample_log2");
    cfg.diffusion.denoiser.latent_channels = cfg.autoencoder.latent_channels;
    cfg.diffusion.denoiser.cond_channels =
        cfg.diffusion.conditional ? cfg.autoencoder.latent_channels : 0;
    cfg.diffusion.denoiser.validate();
    const int level_stride = 1 << (cfg.diffusion.denoiser.levels() - 1);
    require(cfg.latent_side() % level_stride == 0, Status::kConfig,
            "latent grid (crop_size / 2^downsample_log2) must be divisible by "
            "2^(denoiser levels - 1)");
    require(cfg.diffusion.sample_steps >= 1 &&
                cfg.diffusion.sample_steps <= cfg.diffusion.timesteps,
            Status::kConfig, "diffusion.sample_steps must lie in [1, timesteps]");
    cfg.diffusion.build_schedule(); // validates beta range
    cfg.decoder.min_scaled_cell =
        cfg.cell_clamp ? 2.0 / (cfg.data.scale_max * factor) : 0.0;
    if (cfg.align.recon_h == 0) cfg.align.recon_h = cfg.data.crop_size;
    if (cfg.align.recon_w == 0) cfg.align.recon_w = cfg.data.crop_size;
    require(cfg.align.recon_h >= cfg.latent_side() && cfg.align.recon_w >= cfg.latent_side(),
            Status::kConfig, "align.recon_render must not fall below the latent grid size");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Status::kConfig, "cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        fail(Status::kConfig, "config is not valid JSON: " + std::string(e.what()));
    }
    return parse_run_config(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["task"] = cfg.task;
    j["seed"] = cfg.seed;
    j["deterministic"] = cfg.deterministic;
    j["out_dir"] = cfg.out_dir;
    j["data"] = {{"root", cfg.data.root},
                 {"crop_size", cfg.data.crop_size},
                 {"scale_max", cfg.data.scale_max},
                 {"n_coord_samples", cfg.data.n_coord_samples}};
    j["autoencoder"] = {{"downsample_log2", cfg.autoencoder.downsample_log2},
                        {"latent_channels", cfg.autoencoder.latent_channels},
                        {"feature_channels", cfg.autoencoder.feature_channels},
                        {"n_resblocks", cfg.autoencoder.n_resblocks},
                        {"norm_groups", cfg.autoencoder.norm_groups},
                        {"use_feature_decoder", cfg.autoencoder.use_feature_decoder}};
    j["mlp"] = {{"hidden_layers", cfg.decoder.mlp.hidden_layers},
                {"hidden_units", cfg.decoder.mlp.hidden_units},
                {"activation", activation_name(cfg.decoder.mlp.activation)}};
    j["decoder"] = {{"feature_unfold", cfg.decoder.feature_unfold},
                    {"cell_decoding", cfg.decoder.cell_decoding},
                    {"cell_clamp", cfg.cell_clamp}};
    j["diffusion"] = {
        {"timesteps", cfg.diffusion.timesteps},
        {"beta_start", cfg.diffusion.beta_start},
        {"beta_end", cfg.diffusion.beta_end},
        {"schedule", cfg.diffusion.schedule},
        {"conditional", cfg.diffusion.conditional},
        {"sample_steps", cfg.diffusion.sample_steps},
        {"eta", cfg.diffusion.eta},
        {"sampler", cfg.diffusion.sampler},
        {"denoiser",
         {{"base_width", cfg.diffusion.denoiser.base_width},
          {"channel_mult", cfg.diffusion.denoiser.channel_mult},
          {"res_per_level", cfg.diffusion.denoiser.res_per_level},
          {"norm_groups", cfg.diffusion.denoiser.norm_groups},
          {"cond_injection",
           cfg.diffusion.denoiser.cond_injection == CondInjection::kInputConcat
               ? "input_concat"
               : "per_block"}}}};
    j["align"] = {{"lambda1", cfg.align.lambda1},
                  {"lambda2", cfg.align.lambda2},
                  {"mode", cfg.align.mode == AlignMode::kRandomT ? "random_t" : "trajectory"},
                  {"recon_render", cfg.align.recon_h},
                  {"finetune_lr", cfg.align.finetune_lr},
                  {"ddim_steps", cfg.align.ddim_steps},
                  {"coord_samples", cfg.align.coord_samples},
                  {"steps", cfg.align.steps}};
    j["train"] = {{"steps", cfg.train.steps},
                  {"batch_size", cfg.train.batch_size},
                  {"lr", cfg.train.lr},
                  {"log_every", cfg.train.log_every},
                  {"checkpoint_every", cfg.train.checkpoint_every}};
    j["metrics"] = {{"ssim_window", cfg.metrics.ssim_window},
                    {"eval_scales", cfg.metrics.eval_scales},
                    {"eval_images", cfg.metrics.eval_images},
                    {"selfssim_factor", cfg.metrics.selfssim_factor}};
    return j;
}

std::string config_schema_json() {
    static const char* kSchema = R"JSON({
  "$comment": "arbiscale run configuration. Unknown keys are rejected.",
  "task": {"type": "string", "enum": ["train-stage1", "train-ldm", "align", "sr", "generate", "eval", "bench"], "required": true},
  "seed": {"type": "integer", "default": 0, "description": "master RNG seed"},
  "deterministic": {"type": "boolean", "default": false, "description": "bit-reproducible mode; omits wall-clock fields from records"},
  "out_dir": {"type": "string", "default": "runs/out"},
  "data": {
    "root": {"type": "string", "description": "directory tree of PNG/JPEG/BMP images"},
    "crop_size": {"type": "integer", "default": 64, "description": "square HR training crop; divisible by 2^autoencoder.downsample_log2"},
    "scale_max": {"type": "number", "default": 4.0, "description": "training scales drawn uniformly from (1, scale_max]"},
    "n_coord_samples": {"type": "integer", "default": 1024, "description": "ground-truth pixels sampled per training crop"}
  },
  "autoencoder": {
    "downsample_log2": {"type": "integer", "default": 2, "description": "encoder reduction 2^k"},
    "latent_channels": {"type": "integer", "default": 16},
    "feature_channels": {"type": "integer", "default": 64, "description": "feature decoder width and output channels"},
    "n_resblocks": {"type": "integer", "default": 4},
    "norm_groups": {"type": "integer", "default": 8},
    "use_feature_decoder": {"type": "boolean", "default": true, "description": "false = decode raw latents with the MLP alone (ablation)"}
  },
  "mlp": {
    "hidden_layers": {"type": "integer", "default": 4},
    "hidden_units": {"type": "integer", "default": 256},
    "activation": {"type": "string", "enum": ["relu", "silu"], "default": "relu"}
  },
  "decoder": {
    "feature_unfold": {"type": "boolean", "default": true, "description": "concatenate each 3x3 feature neighborhood (9x channels)"},
    "cell_decoding": {"type": "boolean", "default": true, "description": "feed target cell sizes to the MLP"},
    "cell_clamp": {"type": "boolean", "default": true, "description": "clamp scaled cells below by the smallest trained cell when rendering beyond the trained range"}
  },
  "diffusion": {
    "timesteps": {"type": "integer", "default": 200},
    "beta_start": {"type": "number", "default": 1e-4},
    "beta_end": {"type": "number", "default": 0.02},
    "schedule": {"type": "string", "enum": ["linear"], "default": "linear"},
    "conditional": {"type": "boolean", "default": false, "description": "true = LR-conditioned super-resolution denoiser"},
    "sample_steps": {"type": "integer", "default": 50, "description": "reverse steps at inference (DDIM subsequence)"},
    "eta": {"type": "number", "default": 0.0},
    "sampler": {"type": "string", "enum": ["ddim", "ddpm"], "default": "ddim"},
    "denoiser": {
      "base_width": {"type": "integer", "default": 64},
      "channel_mult": {"type": "array[integer]", "default": [1, 2, 2], "description": "one entry per resolution level"},
      "res_per_level": {"type": "integer", "default": 2},
      "norm_groups": {"type": "integer", "default": 8},
      "cond_injection": {"type": "string", "enum": ["input_concat", "per_block"], "default": "input_concat"}
    }
  },
  "align": {
    "lambda1": {"type": "number", "default": 1.0, "description": "latent denoising loss weight"},
    "lambda2": {"type": "number", "default": 1.0, "description": "image reconstruction loss weight"},
    "mode": {"type": "string", "enum": ["random_t", "trajectory"], "default": "trajectory"},
    "recon_render": {"type": "integer", "default": 0, "description": "square render size for the reconstruction loss; 0 = data.crop_size"},
    "finetune_lr": {"type": "number", "default": 1e-6},
    "ddim_steps": {"type": "integer", "default": 20, "description": "reverse steps per trajectory in trajectory mode"},
    "coord_samples": {"type": "integer", "default": 1024, "description": "ground-truth pixels sampled per alignment batch"},
    "steps": {"type": "integer", "default": 500, "description": "fine-tuning iterations"}
  },
  "train": {
    "steps": {"type": "integer", "default": 2000},
    "batch_size": {"type": "integer", "default": 4},
    "lr": {"type": "number", "default": 5e-5},
    "log_every": {"type": "integer", "default": 50},
    "checkpoint_every": {"type": "integer", "default": 1000}
  },
  "metrics": {
    "ssim_window": {"type": "integer", "default": 11},
    "eval_scales": {"type": "array[number]", "default": [], "description": "evaluation scale factors; empty = {5.3, 7, 10, 12} filtered to the trained range"},
    "eval_images": {"type": "integer", "default": 4},
    "selfssim_factor": {"type": "number", "default": 1.5, "description": "secondary render scale ratio for SelfSSIM"}
  }
})JSON";
    return kSchema;
}

} // namespace arbiscale
