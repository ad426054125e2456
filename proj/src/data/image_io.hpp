// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "core/tensor.hpp"

namespace arbiscale {

// Decode a PNG, JPEG or BMP file to an HxWx3 tensor in [-1, 1].
Tensor<float> load_image(const std::string& path);

// Write an 8-bit RGB PNG. Values map from [-1, 1] by (v+1)*127.5, rounded
// half away from zero and clamped; PSNR comparisons depend on this mapping.
void save_png(const std::string& path, const Tensor<float>& image);

std::uint8_t quantize_pixel(float v);

} // namespace arbiscale
