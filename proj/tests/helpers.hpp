#pragma once

#include "dmfc/model.hpp"
#include "dmfc/rng.hpp"

#include <cmath>

namespace dmfc::testing {

inline Mat3 random_rotation(Rng& rng) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-6) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const double angle = (2.0 * rng.uniform() - 1.0) * M_PI;
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline RigidTransform random_transform(Rng& rng, double tscale = 5.0) {
    return {random_rotation(rng),
            Vec3(rng.normal(), rng.normal(), rng.normal()) * tscale};
}

inline Points random_points(Rng& rng, Index n, double scale = 1.0) {
    Points p(3, n);
    for (Index i = 0; i < n; ++i)
        p.col(i) = Vec3(rng.normal(), rng.normal(), rng.normal()) * scale;
    return p;
}

// Small star-tetrahedralized ball: lat-long sphere surface plus the centre.
inline MultiObjectReference::Object make_ball_object(double radius, const Vec3& center,
                                                     Index bands, Index sectors,
                                                     const std::string& name) {
    MultiObjectReference::Object obj;
    obj.name = name;
    const Index nsurf = (bands - 1) * sectors + 2;
    obj.surface.vertices.resize(3, nsurf);
    Index v = 0;
    obj.surface.vertices.col(v++) = center + Vec3(0, 0, radius);
    for (Index i = 1; i < bands; ++i) {
        const double u = M_PI * static_cast<double>(i) / bands;
        for (Index k = 0; k < sectors; ++k) {
            const double phi = 2.0 * M_PI * static_cast<double>(k) / sectors;
            obj.surface.vertices.col(v++) =
                center + radius * Vec3(std::sin(u) * std::cos(phi),
                                       std::sin(u) * std::sin(phi), std::cos(u));
        }
    }
    obj.surface.vertices.col(v++) = center + Vec3(0, 0, -radius);
    auto ring = [&](Index i, Index k) {
        return static_cast<int>(1 + (i - 1) * sectors + (k % sectors));
    };
    for (Index k = 0; k < sectors; ++k)
        obj.surface.triangles.push_back({0, ring(1, k), ring(1, k + 1)});
    for (Index i = 1; i + 1 < bands; ++i)
        for (Index k = 0; k < sectors; ++k) {
            obj.surface.triangles.push_back({ring(i, k), ring(i + 1, k), ring(i + 1, k + 1)});
            obj.surface.triangles.push_back({ring(i, k), ring(i + 1, k + 1), ring(i, k + 1)});
        }
    const int south = static_cast<int>(nsurf - 1);
    for (Index k = 0; k < sectors; ++k)
        obj.surface.triangles.push_back({south, ring(bands - 1, k + 1), ring(bands - 1, k)});
    obj.surface.validate();

    obj.tetra.vertices.resize(3, nsurf + 1);
    obj.tetra.vertices.leftCols(nsurf) = obj.surface.vertices;
    obj.tetra.vertices.col(nsurf) = center;
    for (const auto& t : obj.surface.triangles) {
        std::array<int, 4> tet{static_cast<int>(nsurf), t[0], t[1], t[2]};
        const Vec3 c = obj.tetra.vertices.col(tet[0]);
        const Vec3 a = obj.tetra.vertices.col(tet[1]);
        const Vec3 b = obj.tetra.vertices.col(tet[2]);
        const Vec3 d = obj.tetra.vertices.col(tet[3]);
        if ((a - c).dot((b - c).cross(d - c)) < 0) std::swap(tet[2], tet[3]);
        obj.tetra.tets.push_back(tet);
    }
    obj.tetra.intensity = (obj.tetra.vertices.colwise() - center).colwise().norm().transpose();
    obj.tetra.validate();
    return obj;
}

// Two 15-point balls: a 30-point toy domain.
inline ReferencePtr make_toy_reference() {
    auto ref = std::make_shared<MultiObjectReference>();
    ref->objects.push_back(make_ball_object(1.0, Vec3(0, 0, 0), 3, 6, "a"));
    ref->objects.push_back(make_ball_object(1.5, Vec3(4, 0, 0), 3, 6, "b"));
    ref->validate();
    return ref;
}

// Random in-correspondence training samples over the toy reference: small
// random rigid motions, smooth-ish random shape bumps, random intensity
// offsets.
inline std::vector<JointData> make_toy_samples(const ReferencePtr& ref, Index n,
                                               std::uint64_t seed, double pose_scale = 0.2,
                                               double shape_scale = 0.05,
                                               double intensity_scale = 0.3) {
    Rng rng(seed);
    std::vector<JointData> samples;
    for (Index i = 0; i < n; ++i) {
        JointData d;
        for (Index j = 0; j < ref->object_count(); ++j) {
            const Points& base = ref->objects[j].tetra.vertices;
            const Vec3 c = base.rowwise().mean();
            Vec3 axis(rng.normal(), rng.normal(), rng.normal());
            axis.normalize();
            const Mat3 rot =
                Eigen::AngleAxisd(pose_scale * rng.normal(), axis).toRotationMatrix();
            const Vec3 shift(pose_scale * rng.normal(), pose_scale * rng.normal(),
                             pose_scale * rng.normal());
            Points verts = base;
            const Vec3 bump(rng.normal(), rng.normal(), rng.normal());
            for (Index p = 0; p < verts.cols(); ++p) {
                const Vec3 x = verts.col(p) - c;
                verts.col(p) += shape_scale * bump * x.squaredNorm();
            }
            verts = ((rot * (verts.colwise() - c)).colwise() + (c + shift)).eval();
            d.vertices.push_back(verts);
            const double offset = intensity_scale * rng.normal();
            const double slope = intensity_scale * rng.normal();
            VecX inten = ref->objects[j].tetra.intensity;
            for (Index p = 0; p < inten.size(); ++p)
                inten[p] += offset + slope * base(2, p);
            d.intensity.push_back(inten);
        }
        samples.push_back(std::move(d));
    }
    return samples;
}

}  // namespace dmfc::testing
