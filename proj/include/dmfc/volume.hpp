#pragma once

#include "dmfc/types.hpp"

#include <array>

namespace dmfc {

// Regular scalar grid, voxels stored x-fastest.
struct Volume3 {
    std::array<Index, 3> dims{0, 0, 0};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();  // centre of voxel (0,0,0)
    VecX voxels;

    Index voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    Index linear_index(Index i, Index j, Index k) const {
        return i + dims[0] * (j + dims[1] * k);
    }

    double& at(Index i, Index j, Index k) { return voxels[linear_index(i, j, k)]; }
    double at(Index i, Index j, Index k) const { return voxels[linear_index(i, j, k)]; }

    Vec3 voxel_center(Index i, Index j, Index k) const {
        return origin + Vec3(i * spacing[0], j * spacing[1], k * spacing[2]);
    }

    // Grid coordinates of the voxel whose centre is closest to p (unclamped).
    std::array<Index, 3> nearest_voxel(const Vec3& p) const;

    bool in_bounds(const std::array<Index, 3>& v) const {
        return v[0] >= 0 && v[0] < dims[0] && v[1] >= 0 && v[1] < dims[1] && v[2] >= 0 &&
               v[2] < dims[2];
    }

    // Value at the nearest voxel centre; 0 outside the grid (background).
    double sample_nearest_or_background(const Vec3& p) const;

    // Value at the nearest voxel centre; error if p outside the grid.
    double sample_nearest(const Vec3& p) const;

    void validate() const;
};

struct Image2 {
    Index nx = 0, ny = 0;
    MatX pixels;  // ny x nx
};

// Orthographic line integrals along `axis` (0=x,1=y,2=z), premultiplied by the
// spacing along that axis. No normalization.
Image2 drr_raw(const Volume3& vol, int axis);

// drr_raw rescaled to [0,1]; an all-zero volume stays all-zero.
Image2 drr_project(const Volume3& vol, int axis);

}  // namespace dmfc
