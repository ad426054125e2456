// SPDX-License-Identifier: Apache-2.0
#include "coords.hpp"

#include <algorithm>
#include <cmath>

namespace arbiscale {

double axis_cell_center(int index, int n) {
    return -1.0 + (2.0 * index + 1.0) / static_cast<double>(n);
}

int nearest_axis_index(double q, int n) {
    // Fractional cell index of q; integer values sit exactly on centers.
    const double u = (q + 1.0) * 0.5 * n - 0.5;
    // Round half down so equidistant queries pick the smaller index.
    int i = static_cast<int>(std::ceil(u - 0.5));
    return std::clamp(i, 0, n - 1);
}

CoordGrid make_coord_grid(int height, int width) {
    require(height >= 1 && width >= 1, Status::kInvalidArgument,
            "make_coord_grid: dimensions must be positive");
    CoordGrid grid;
    grid.coords = Tensor<double>({height * width, 2});
    std::int64_t n = 0;
    for (int r = 0; r < height; ++r) {
        const double cr = axis_cell_center(r, height);
        for (int c = 0; c < width; ++c, ++n) {
            grid.coords.at(n, 0) = cr;
            grid.coords.at(n, 1) = axis_cell_center(c, width);
        }
    }
    return grid;
}

Cell make_cell(int height, int width, std::int64_t n_queries) {
    require(height >= 1 && width >= 1 && n_queries >= 1, Status::kInvalidArgument,
            "make_cell: dimensions and query count must be positive");
    Cell cell;
    cell.sizes = Tensor<double>({static_cast<int>(n_queries), 2});
    const double ch = 2.0 / height;
    const double cw = 2.0 / width;
    for (std::int64_t i = 0; i < n_queries; ++i) {
        cell.sizes.at(i, 0) = ch;
        cell.sizes.at(i, 1) = cw;
    }
    return cell;
}

FeatureCellRef nearest_feature_index(const CoordGrid& query, int feat_h, int feat_w,
                                     int shift_row, int shift_col) {
    require(feat_h >= 1 && feat_w >= 1, Status::kInvalidArgument,
            "nearest_feature_index: feature grid must be non-empty");
    const std::int64_t n = query.size();
    FeatureCellRef ref;
    ref.index = Tensor<int>({static_cast<int>(n), 2});
    ref.center = Tensor<double>({static_cast<int>(n), 2});
    for (std::int64_t i = 0; i < n; ++i) {
        const int r = std::clamp(nearest_axis_index(query.coords.at(i, 0), feat_h) + shift_row,
                                 0, feat_h - 1);
        const int c = std::clamp(nearest_axis_index(query.coords.at(i, 1), feat_w) + shift_col,
                                 0, feat_w - 1);
        ref.index.at(i, 0) = r;
        ref.index.at(i, 1) = c;
        ref.center.at(i, 0) = axis_cell_center(r, feat_h);
        ref.center.at(i, 1) = axis_cell_center(c, feat_w);
    }
    return ref;
}

RelativeCoord relative_coord(const CoordGrid& query, const CoordGrid& center, int feat_h,
                             int feat_w) {
    require(query.coords.same_shape(center.coords), Status::kInvalidArgument,
            "relative_coord: query/center shape mismatch");
    const std::int64_t n = query.size();
    RelativeCoord out;
    out.rel = Tensor<double>({static_cast<int>(n), 2});
    for (std::int64_t i = 0; i < n; ++i) {
        out.rel.at(i, 0) = (query.coords.at(i, 0) - center.coords.at(i, 0)) * feat_h;
        out.rel.at(i, 1) = (query.coords.at(i, 1) - center.coords.at(i, 1)) * feat_w;
    }
    return out;
}

} // namespace arbiscale
