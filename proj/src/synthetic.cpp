#include "dmfc/synthetic.hpp"

#include <cmath>

namespace dmfc {

namespace {

constexpr double kHeadRadius = 2.0;    // equatorial semi-axis
constexpr double kStickRadius = 1.0;
constexpr double kStickLength = 10.0;
constexpr double kStickEmbed = 1.0;    // stick top sits this far inside the head

void append_star_tets(TetMesh& tetra, const std::vector<std::array<int, 3>>& tris,
                      int center) {
    for (const auto& t : tris) {
        std::array<int, 4> tet{center, t[0], t[1], t[2]};
        const Vec3 c = tetra.vertices.col(tet[0]);
        const Vec3 a = tetra.vertices.col(tet[1]);
        const Vec3 b = tetra.vertices.col(tet[2]);
        const Vec3 d = tetra.vertices.col(tet[3]);
        if ((a - c).dot((b - c).cross(d - c)) < 0) std::swap(tet[2], tet[3]);
        tetra.tets.push_back(tet);
    }
}

}  // namespace

Index lollipop_head_vertex_count(int resolution) {
    const Index bands = 4ll << resolution;
    const Index sectors = 8ll << resolution;
    return (bands - 1) * sectors + 2;
}

Index lollipop_stick_vertex_count(int resolution) {
    const Index segs = 2ll << resolution;
    const Index sectors = 8ll << resolution;
    return (segs + 1) * sectors + 2;
}

LollipopMesh lollipop_mesh(const LollipopSpec& spec) {
    if (spec.r <= 0) throw DataError("lollipop_mesh: r must be positive");
    if (spec.resolution < 0) throw DataError("lollipop_mesh: negative resolution");
    const double r = spec.r;
    const Index bands = 4ll << spec.resolution;
    const Index sectors = 8ll << spec.resolution;
    const Index segs = 2ll << spec.resolution;

    LollipopMesh out;
    const Index nh = lollipop_head_vertex_count(spec.resolution);
    const Index ns = lollipop_stick_vertex_count(spec.resolution);
    out.head_vertex_count = nh;
    out.surface.vertices.resize(3, nh + ns);

    // head: lat-long ellipsoid, north pole first (vertex 0), south pole last
    Index v = 0;
    out.surface.vertices.col(v++) = Vec3(0, 0, r);
    for (Index i = 1; i < bands; ++i) {
        const double u = M_PI * static_cast<double>(i) / bands;
        for (Index k = 0; k < sectors; ++k) {
            const double phi = 2.0 * M_PI * static_cast<double>(k) / sectors;
            out.surface.vertices.col(v++) = Vec3(kHeadRadius * std::sin(u) * std::cos(phi),
                                                 kHeadRadius * std::sin(u) * std::sin(phi),
                                                 r * std::cos(u));
        }
    }
    out.surface.vertices.col(v++) = Vec3(0, 0, -r);

    auto head_ring = [&](Index i, Index k) {
        return static_cast<int>(1 + (i - 1) * sectors + (k % sectors));
    };
    for (Index k = 0; k < sectors; ++k)
        out.surface.triangles.push_back({0, head_ring(1, k), head_ring(1, k + 1)});
    for (Index i = 1; i + 1 < bands; ++i)
        for (Index k = 0; k < sectors; ++k) {
            const int a = head_ring(i, k), b = head_ring(i, k + 1);
            const int c = head_ring(i + 1, k), d = head_ring(i + 1, k + 1);
            out.surface.triangles.push_back({a, c, d});
            out.surface.triangles.push_back({a, d, b});
        }
    const int south = static_cast<int>(nh - 1);
    for (Index k = 0; k < sectors; ++k)
        out.surface.triangles.push_back({south, head_ring(bands - 1, k + 1), head_ring(bands - 1, k)});

    // stick: cylinder along -z, top ring first
    const double ztop = -(r - kStickEmbed);
    const Index stick0 = nh;
    for (Index s = 0; s <= segs; ++s) {
        const double z = ztop - kStickLength * static_cast<double>(s) / segs;
        for (Index k = 0; k < sectors; ++k) {
            const double phi = 2.0 * M_PI * static_cast<double>(k) / sectors;
            out.surface.vertices.col(v++) =
                Vec3(kStickRadius * std::cos(phi), kStickRadius * std::sin(phi), z);
        }
    }
    const Index top_center = v;
    out.surface.vertices.col(v++) = Vec3(0, 0, ztop);
    const Index bot_center = v;
    out.surface.vertices.col(v++) = Vec3(0, 0, ztop - kStickLength);

    auto stick_ring = [&](Index s, Index k) {
        return static_cast<int>(stick0 + s * sectors + (k % sectors));
    };
    for (Index s = 0; s < segs; ++s)
        for (Index k = 0; k < sectors; ++k) {
            const int a = stick_ring(s, k), b = stick_ring(s, k + 1);
            const int c = stick_ring(s + 1, k), d = stick_ring(s + 1, k + 1);
            out.surface.triangles.push_back({a, c, d});
            out.surface.triangles.push_back({a, d, b});
        }
    for (Index k = 0; k < sectors; ++k) {
        out.surface.triangles.push_back(
            {static_cast<int>(top_center), stick_ring(0, k), stick_ring(0, k + 1)});
        out.surface.triangles.push_back(
            {static_cast<int>(bot_center), stick_ring(segs, k + 1), stick_ring(segs, k)});
    }
    out.surface.validate();

    // tet mesh: surface vertices + the two component star centres
    const Index nsurf = nh + ns;
    out.tetra.vertices.resize(3, nsurf + 2);
    out.tetra.vertices.leftCols(nsurf) = out.surface.vertices;
    out.head_center = nsurf;
    out.stick_center = nsurf + 1;
    out.tetra.vertices.col(out.head_center) = Vec3(0, 0, 0);
    out.tetra.vertices.col(out.stick_center) = Vec3(0, 0, ztop - 0.5 * kStickLength);

    std::vector<std::array<int, 3>> head_tris(out.surface.triangles.begin(),
                                              out.surface.triangles.begin() + 2 * sectors +
                                                  (bands - 2) * sectors * 2);
    std::vector<std::array<int, 3>> stick_tris(out.surface.triangles.begin() + head_tris.size(),
                                               out.surface.triangles.end());
    append_star_tets(out.tetra, head_tris, static_cast<int>(out.head_center));
    append_star_tets(out.tetra, stick_tris, static_cast<int>(out.stick_center));

    // Eq. 24 intensity: distance to the head centre (rigid-invariant)
    out.tetra.intensity = out.tetra.vertices.colwise().norm().transpose();
    out.tetra.validate();
    return out;
}

SyntheticJoint generate_joint(const JointSpec& spec) {
    if (spec.r1 <= 0 || spec.r2 <= 0 || spec.r3 <= 0)
        throw DataError("generate_joint: radii must be positive");
    SyntheticJoint joint;
    joint.spec = spec;

    const std::array<double, 3> radii{spec.r1, spec.r2, spec.r3};
    std::vector<RigidTransform> place(3);
    place[0] = {Mat3::Identity(), kJointBase};
    place[1] = RigidTransform{Mat3::Identity(), kJointBase + kObject2Offset} *
               RigidTransform{rot_x(M_PI), Vec3::Zero()};
    place[2] = RigidTransform{Mat3::Identity(), kJointBase + kObject3Center} *
               RigidTransform{rot_x(-M_PI / 2), Vec3::Zero()};

    std::vector<RigidTransform> pose(3);
    pose[0] = RigidTransform::identity();
    pose[1] = rotation_about(rot_x(spec.theta2), kJointBase);
    pose[2] = rotation_about(rot_x(spec.theta3), kJointBase + kObject3Pivot);

    for (int j = 0; j < 3; ++j) {
        LollipopMesh lp = lollipop_mesh({radii[j], spec.resolution});
        const RigidTransform world = pose[j] * place[j];
        lp.surface.vertices = world(lp.surface.vertices);
        lp.tetra.vertices = world(lp.tetra.vertices);
        joint.anchors.push_back(lp.tetra.vertices.col(lp.head_center));
        joint.surfaces.push_back(std::move(lp.surface));
        joint.tetras.push_back(std::move(lp.tetra));
    }
    joint.placement = std::move(place);
    joint.pose = std::move(pose);
    return joint;
}

JointData SyntheticJoint::data() const {
    JointData d;
    for (const auto& t : tetras) {
        d.vertices.push_back(t.vertices);
        d.intensity.push_back(t.intensity);
    }
    return d;
}

ReferencePtr make_reference(int resolution, double r1, double r2, double r3) {
    JointSpec spec;
    spec.r1 = r1;
    spec.r2 = r2;
    spec.r3 = r3;
    spec.resolution = resolution;
    const SyntheticJoint joint = generate_joint(spec);
    auto ref = std::make_shared<MultiObjectReference>();
    const char* names[3] = {"object1", "object2", "object3"};
    for (int j = 0; j < 3; ++j) {
        MultiObjectReference::Object obj;
        obj.name = names[j];
        obj.surface = joint.surfaces[j];
        obj.tetra = joint.tetras[j];
        ref->objects.push_back(std::move(obj));
    }
    ref->validate();
    return ref;
}

double default_spacing(const SyntheticJoint& joint) {
    Aabb box;
    for (const auto& t : joint.tetras) box.expand(bounding_box(t.vertices));
    return box.extent().maxCoeff() / 64.0;
}

Volume3 render_volume(const SyntheticJoint& joint, double spacing) {
    if (spacing <= 0) throw DataError("render_volume: spacing must be positive");
    Aabb box;
    for (const auto& t : joint.tetras) box.expand(bounding_box(t.vertices));
    const double pad = 2.0 * spacing;

    Volume3 vol;
    vol.spacing = Vec3::Constant(spacing);
    vol.origin = box.lo - Vec3::Constant(pad);
    for (int a = 0; a < 3; ++a)
        vol.dims[a] =
            static_cast<Index>(std::ceil((box.hi[a] + pad - vol.origin[a]) / spacing)) + 1;
    vol.voxels = VecX::Zero(vol.voxel_count());

    std::vector<int8_t> label(static_cast<size_t>(vol.voxel_count()), -1);

    // objects in index order; earlier objects keep contested voxels
    for (size_t j = 0; j < joint.tetras.size(); ++j) {
        const TetMesh& tm = joint.tetras[j];
        const Vec3 anchor = joint.anchors[j];
        for (const auto& t : tm.tets) {
            Aabb tb;
            for (int k = 0; k < 4; ++k) tb.expand(tm.vertices.col(t[k]));
            std::array<Index, 3> lo{}, hi{};
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::max<Index>(
                    0, static_cast<Index>(std::floor((tb.lo[a] - vol.origin[a]) / spacing)));
                hi[a] = std::min<Index>(
                    vol.dims[a] - 1,
                    static_cast<Index>(std::ceil((tb.hi[a] - vol.origin[a]) / spacing)));
            }
            for (Index k = lo[2]; k <= hi[2]; ++k)
                for (Index jj = lo[1]; jj <= hi[1]; ++jj)
                    for (Index i = lo[0]; i <= hi[0]; ++i) {
                        const Index lin = vol.linear_index(i, jj, k);
                        if (label[lin] >= 0) continue;
                        const Vec3 c = vol.voxel_center(i, jj, k);
                        if (point_in_tet(c, tm.vertices.col(t[0]), tm.vertices.col(t[1]),
                                         tm.vertices.col(t[2]), tm.vertices.col(t[3]), 1e-9)) {
                            label[lin] = static_cast<int8_t>(j);
                            vol.voxels[lin] = (c - anchor).norm();
                        }
                    }
        }
    }

    // claim each tet vertex's nearest voxel so vertex sampling never reads
    // background
    for (size_t j = 0; j < joint.tetras.size(); ++j) {
        const TetMesh& tm = joint.tetras[j];
        const Vec3 anchor = joint.anchors[j];
        for (Index p = 0; p < tm.vertex_count(); ++p) {
            const auto nv = vol.nearest_voxel(tm.vertices.col(p));
            if (!vol.in_bounds(nv)) continue;
            const Index lin = vol.linear_index(nv[0], nv[1], nv[2]);
            if (label[lin] >= 0) continue;
            label[lin] = static_cast<int8_t>(j);
            vol.voxels[lin] = (vol.voxel_center(nv[0], nv[1], nv[2]) - anchor).norm();
        }
    }
    return vol;
}

VecX tet_intensity_correspondence(const Volume3& volume, const TetMesh& posed) {
    VecX out(posed.vertex_count());
    for (Index p = 0; p < posed.vertex_count(); ++p)
        out[p] = volume.sample_nearest(posed.vertices.col(p));
    return out;
}

std::vector<JointSpec> paper_training_specs(int resolution) {
    const std::array<double, 4> theta2{M_PI / 5, 2 * M_PI / 5, 3 * M_PI / 5, 4 * M_PI / 5};
    const std::array<double, 4> theta3{M_PI / 3, M_PI / 2, M_PI / 9, 2 * M_PI / 9};
    std::vector<JointSpec> specs;
    specs.reserve(60);
    for (int i = 1; i <= 15; ++i)
        for (int k = 0; k < 4; ++k) {
            JointSpec s;
            s.r1 = static_cast<double>(i);
            s.r2 = 31.0 - s.r1;
            s.r3 = 17.0 - s.r1;
            s.theta2 = theta2[k];
            s.theta3 = theta3[k];
            s.resolution = resolution;
            specs.push_back(s);
        }
    return specs;
}

std::vector<JointSpec> heldout_pose_specs(int resolution) {
    const std::array<std::pair<double, double>, 3> poses{
        std::pair{0.30 * M_PI, 0.40 * M_PI},
        std::pair{0.50 * M_PI, 0.28 * M_PI},
        std::pair{0.70 * M_PI, 0.17 * M_PI},
    };
    std::vector<JointSpec> specs;
    for (double r : {5.5, 10.5})
        for (const auto& [t2, t3] : poses) {
            JointSpec s;
            s.r1 = r;
            s.r2 = 31.0 - r;
            s.r3 = 17.0 - r;
            s.theta2 = t2;
            s.theta3 = t3;
            s.resolution = resolution;
            specs.push_back(s);
        }
    return specs;
}

std::vector<LollipopLandmarks> lollipop_landmarks(int resolution) {
    LollipopLandmarks lm;
    lm.north = 0;
    lm.south = lollipop_head_vertex_count(resolution) - 1;
    return {lm, lm, lm};
}

}  // namespace dmfc
