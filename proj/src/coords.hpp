// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "core/tensor.hpp"

namespace arbiscale {

// Query coordinates in the continuous image domain. Each row is (row, col)
// in (-1, 1), laid out row-major over the output grid.
struct CoordGrid {
    Tensor<double> coords; // N x 2
    std::int64_t size() const { return coords.rank() == 2 ? coords.dim(0) : 0; }
};

// Per-query cell extents (2/H_out, 2/W_out) of the target resolution.
struct Cell {
    Tensor<double> sizes; // N x 2
};

// Query offsets from feature-cell centers, scaled per axis by the feature
// grid resolution so the decoding MLP sees scale-free inputs.
struct RelativeCoord {
    Tensor<double> rel; // N x 2
};

// Index pairs plus center coordinates of selected feature cells.
struct FeatureCellRef {
    Tensor<int> index;     // N x 2, clamped to the feature grid
    Tensor<double> center; // N x 2, centers of the clamped cells
};

// Center of cell i on an n-cell axis partition of [-1, 1]: -1 + (2i+1)/n.
double axis_cell_center(int index, int n);

// Index of the axis cell center nearest to q; exact ties resolve to the
// smaller index. Result is clamped to [0, n-1].
int nearest_axis_index(double q, int n);

CoordGrid make_coord_grid(int height, int width);

Cell make_cell(int height, int width, std::int64_t n_queries);

// Nearest feature cell per query, offset by (shift_row, shift_col) in
// {-1,0,+1} and clamped to the grid. Out-of-range shifts clamp, never wrap.
FeatureCellRef nearest_feature_index(const CoordGrid& query, int feat_h, int feat_w,
                                     int shift_row, int shift_col);

RelativeCoord relative_coord(const CoordGrid& query, const CoordGrid& center, int feat_h,
                             int feat_w);

} // namespace arbiscale
