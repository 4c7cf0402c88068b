#include "dmfc/volume.hpp"

#include <cmath>

namespace dmfc {

std::array<Index, 3> Volume3::nearest_voxel(const Vec3& p) const {
    std::array<Index, 3> v;
    for (int a = 0; a < 3; ++a)
        v[a] = static_cast<Index>(std::llround((p[a] - origin[a]) / spacing[a]));
    return v;
}

double Volume3::sample_nearest_or_background(const Vec3& p) const {
    const auto v = nearest_voxel(p);
    return in_bounds(v) ? at(v[0], v[1], v[2]) : 0.0;
}

double Volume3::sample_nearest(const Vec3& p) const {
    const auto v = nearest_voxel(p);
    if (!in_bounds(v)) throw DataError("Volume3: sample point outside volume bounds");
    return at(v[0], v[1], v[2]);
}

void Volume3::validate() const {
    if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw DataError("Volume3: empty dims");
    if ((spacing.array() <= 0).any()) throw DataError("Volume3: non-positive spacing");
    if (voxels.size() != voxel_count()) throw DataError("Volume3: voxel count mismatch");
    if (!voxels.allFinite()) throw DataError("Volume3: non-finite voxel");
}

Image2 drr_raw(const Volume3& vol, int axis) {
    vol.validate();
    if (axis < 0 || axis > 2) throw DataError("drr: axis must be 0, 1 or 2");
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    Image2 img;
    img.nx = vol.dims[u];
    img.ny = vol.dims[v];
    img.pixels = MatX::Zero(img.ny, img.nx);
    std::array<Index, 3> idx{};
    for (Index b = 0; b < vol.dims[v]; ++b)
        for (Index a = 0; a < vol.dims[u]; ++a) {
            double sum = 0.0;
            for (Index s = 0; s < vol.dims[axis]; ++s) {
                idx[axis] = s;
                idx[u] = a;
                idx[v] = b;
                sum += vol.at(idx[0], idx[1], idx[2]);
            }
            img.pixels(b, a) = sum * vol.spacing[axis];
        }
    return img;
}

Image2 drr_project(const Volume3& vol, int axis) {
    Image2 img = drr_raw(vol, axis);
    const double peak = img.pixels.maxCoeff();
    if (peak > 0) img.pixels /= peak;
    return img;
}

}  // namespace dmfc
