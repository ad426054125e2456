// SPDX-License-Identifier: Apache-2.0
#include "data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "core/resize.hpp"
#include "data/image_io.hpp"

namespace fs = std::filesystem;

namespace arbiscale {

double sample_scale(Rng& rng, double scale_max) {
    require(scale_max > 1.0, Status::kInvalidArgument, "sample_scale: scale_max must exceed 1");
    // u in [0,1) maps to (1, scale_max] with the endpoint included.
    const double u = rng.uniform();
    return scale_max - u * (scale_max - 1.0);
}

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// Stable FNV-1a over the path string for cache keys.
std::uint64_t path_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string cache_file_for(const std::string& path) {
    const char* cache_root = std::getenv("ARBISCALE_CACHE");
    if (!cache_root || !*cache_root) return {};
    std::error_code ec;
    fs::create_directories(cache_root, ec);
    if (ec) return {};
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.img",
                  static_cast<unsigned long long>(path_hash(path)));
    return (fs::path(cache_root) / name).string();
}

bool read_cached(const std::string& cache_path, Tensor<float>& out) {
    std::ifstream in(cache_path, std::ios::binary);
    if (!in) return false;
    std::int32_t h = 0, w = 0;
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    if (!in || h <= 0 || w <= 0 || h > 1 << 20 || w > 1 << 20) return false;
    Tensor<float> img({h, w, 3});
    in.read(reinterpret_cast<char*>(img.data()), img.numel() * 4);
    if (!in) return false;
    out = std::move(img);
    return true;
}

void write_cached(const std::string& cache_path, const Tensor<float>& img) {
    std::ofstream out(cache_path, std::ios::binary | std::ios::trunc);
    if (!out) return;
    const std::int32_t h = img.dim(0), w = img.dim(1);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(img.data()), img.numel() * 4);
}

} // namespace

ImageFolder::ImageFolder(const DatasetSpec& spec) : spec_(spec) {
    spec.validate();
    require(fs::exists(spec.root), Status::kIo, "dataset root does not exist: " + spec.root);
    for (const auto& entry : fs::recursive_directory_iterator(spec.root)) {
        if (entry.is_regular_file() && has_image_extension(entry.path()))
            paths_.push_back(entry.path().string());
    }
    require(!paths_.empty(), Status::kIo, "no images found under: " + spec.root);
    std::sort(paths_.begin(), paths_.end());
    // Deterministic order per seed: Fisher-Yates driven by the spec seed.
    Rng rng(spec.seed);
    for (std::size_t i = paths_.size(); i > 1; --i)
        std::swap(paths_[i - 1],
                  paths_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    cache_.resize(paths_.size());
    loaded_.assign(paths_.size(), false);
}

const Tensor<float>& ImageFolder::image(std::size_t i) const {
    if (!loaded_[i]) {
        loaded_[i] = true;
        const std::string cache_path = cache_file_for(paths_[i]);
        if (!cache_path.empty() && read_cached(cache_path, cache_[i])) return cache_[i];
        try {
            cache_[i] = load_image(paths_[i]);
            if (!cache_path.empty()) write_cached(cache_path, cache_[i]);
        } catch (const Error& e) {
            std::fprintf(stderr, "[arbiscale] warning: skipping unreadable image %s (%s)\n",
                         paths_[i].c_str(), e.what());
            cache_[i] = Tensor<float>();
        }
    }
    return cache_[i];
}

std::vector<Tensor<float>> load_images(const DatasetSpec& spec) {
    ImageFolder folder(spec);
    std::vector<Tensor<float>> images;
    images.reserve(folder.size());
    for (std::size_t i = 0; i < folder.size(); ++i) {
        const Tensor<float>& img = folder.image(i);
        if (!img.empty()) images.push_back(img);
    }
    require(!images.empty(), Status::kIo, "no decodable images under: " + spec.root);
    return images;
}

Tensor<float> crop_image(const Tensor<float>& img, int crop, Rng& rng, bool centered) {
    require(img.rank() == 3 && img.dim(2) == 3, Status::kInvalidArgument,
            "crop_image: expected an HxWx3 image");
    const int h = img.dim(0), w = img.dim(1);
    require(h >= crop && w >= crop, Status::kInvalidArgument,
            "crop_image: image smaller than the crop size");
    const int r0 = centered ? (h - crop) / 2
                            : static_cast<int>(rng.uniform_int(0, h - crop));
    const int c0 = centered ? (w - crop) / 2
                            : static_cast<int>(rng.uniform_int(0, w - crop));
    Tensor<float> out({crop, crop, 3});
    for (int r = 0; r < crop; ++r)
        std::copy(img.data() + ((static_cast<std::int64_t>(r0) + r) * w + c0) * 3,
                  img.data() + ((static_cast<std::int64_t>(r0) + r) * w + c0 + crop) * 3,
                  out.data() + static_cast<std::int64_t>(r) * crop * 3);
    return out;
}

TrainSample make_pair(const Tensor<float>& hr_crop, double scale, int n_coord_samples,
                      Rng& rng) {
    require(hr_crop.rank() == 3 && hr_crop.dim(0) == hr_crop.dim(1) && hr_crop.dim(2) == 3,
            Status::kInvalidArgument, "make_pair: expected a square HxHx3 crop");
    require(scale > 1.0, Status::kInvalidArgument,
            "make_pair: scale must lie in the half-open range (1, scale_max]");
    const int crop = hr_crop.dim(0);
    const int lr_side = static_cast<int>(std::lround(crop / scale));
    require(lr_side >= 8, Status::kInvalidArgument,
            "make_pair: LR side would fall below 8 pixels");

    TrainSample sample;
    sample.scale = scale;
    sample.lr_image = lr_side == crop
                          ? hr_crop
                          : resize(hr_crop, lr_side, lr_side, ResizeFilter::kBicubic, true);

    const std::int64_t total = static_cast<std::int64_t>(crop) * crop;
    const std::int64_t n = std::min<std::int64_t>(n_coord_samples, total);
    // Distinct pixel indices via partial Fisher-Yates over [0, total).
    std::vector<std::int64_t> pool(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t j = rng.uniform_int(i, total - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }

    const CoordGrid full = make_coord_grid(crop, crop);
    sample.gt_coords.coords = Tensor<double>({static_cast<int>(n), 2});
    sample.gt_rgb = Tensor<float>({static_cast<int>(n), 3});
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t p = pool[static_cast<std::size_t>(i)];
        sample.gt_coords.coords.at(i, 0) = full.coords.at(p, 0);
        sample.gt_coords.coords.at(i, 1) = full.coords.at(p, 1);
        // Gather, not resample: ground truth is the crop's own pixels.
        for (int ch = 0; ch < 3; ++ch)
            sample.gt_rgb.at(i, ch) = hr_crop[p * 3 + ch];
    }
    sample.gt_cells = make_cell(crop, crop, n);
    return sample;
}

} // namespace arbiscale
