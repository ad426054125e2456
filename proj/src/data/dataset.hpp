// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "coords.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace arbiscale {

struct DatasetSpec {
    std::string root;
    int crop_size = 64;
    double scale_max = 4.0; // training scales drawn from (1, scale_max]
    int n_coord_samples = 1024;
    enum class Split { kTrain, kVal } split = Split::kTrain;
    std::uint64_t seed = 0;

    void validate() const {
        require(!root.empty(), Status::kConfig, "data.root must be set");
        require(crop_size >= 8, Status::kConfig, "data.crop_size must be >= 8");
        require(scale_max > 1.0, Status::kConfig, "data.scale_max must exceed 1");
        require(n_coord_samples >= 1, Status::kConfig, "data.n_coord_samples must be >= 1");
    }
};

// LR input plus ground-truth pixel samples gathered from the HR crop.
struct TrainSample {
    Tensor<float> lr_image;
    CoordGrid gt_coords;
    Cell gt_cells;
    Tensor<float> gt_rgb; // N x 3
    double scale = 1.0;
};

// Uniform draw over (1, scale_max].
double sample_scale(Rng& rng, double scale_max);

// Deterministic image collection: files under root (recursive, common raster
// formats), ordering shuffled by seed. Unreadable files are skipped with a
// warning at load time. Decoded images are memoized; when ARBISCALE_CACHE
// is set, decoded pixels are also cached on disk across runs.
class ImageFolder {
public:
    explicit ImageFolder(const DatasetSpec& spec);

    std::size_t size() const { return paths_.size(); }
    const std::string& path(std::size_t i) const { return paths_[i]; }

    // Decoded image, or an empty tensor if the file is unreadable.
    const Tensor<float>& image(std::size_t i) const;

private:
    DatasetSpec spec_;
    std::vector<std::string> paths_;
    mutable std::vector<Tensor<float>> cache_;
    mutable std::vector<bool> loaded_;
};

// Eagerly decode every readable image, in the folder's seed order.
// Every file unreadable -> io error.
std::vector<Tensor<float>> load_images(const DatasetSpec& spec);

// Square crop; random position for training, centered otherwise.
Tensor<float> crop_image(const Tensor<float>& img, int crop, Rng& rng, bool centered);

// LR/HR pair synthesis: bicubic-downsample the crop by a continuous scale
// (LR side = round(crop/scale)) and gather n ground-truth pixels.
TrainSample make_pair(const Tensor<float>& hr_crop, double scale, int n_coord_samples,
                      Rng& rng);

} // namespace arbiscale
