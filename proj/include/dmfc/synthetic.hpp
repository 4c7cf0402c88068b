#pragma once

#include "dmfc/field.hpp"
#include "dmfc/model.hpp"
#include "dmfc/volume.hpp"

#include <vector>

namespace dmfc {

// Lollipop primitive: ellipsoidal head with semi-axes (2, 2, r) about the
// local origin, cylindrical stick of radius 1 and length 10 hanging along -z
// (embedded 1 unit into the head). `resolution` is the subdivision level:
// the head is a lat-long sphere with 4*2^L bands x 8*2^L sectors, the stick a
// cylinder with 2*2^L segments x 8*2^L sectors. Vertex counts are closed
// form: head (4*2^L-1)*8*2^L+2, stick (2*2^L+1)*8*2^L+2.
struct LollipopSpec {
    double r = 1.0;
    int resolution = 1;
};

struct LollipopMesh {
    TriMesh surface;  // head block first, then stick block
    TetMesh tetra;    // surface vertices + head centre + stick centre; Eq-24 intensities
    Index head_vertex_count = 0;
    Index head_center = 0;   // tet-vertex id of the head centre (the intensity anchor)
    Index stick_center = 0;
};

Index lollipop_head_vertex_count(int resolution);
Index lollipop_stick_vertex_count(int resolution);

LollipopMesh lollipop_mesh(const LollipopSpec& spec);

// One synthetic joint: three lollipops.
struct JointSpec {
    double r1 = 8, r2 = 23, r3 = 9;
    double theta2 = 0, theta3 = 0;  // yz-plane rotations of objects 2 and 3
    int resolution = 1;
};

// Canonical layout (world frame). Object 1 sits head-centre at kJointBase
// with its stick down; object 2 is flipped (stick up) with head centre 44
// above object 1's (the chain clearance is 44 - r1 - r2 = 13 for the whole
// shape span since r1 + r2 = 31); object 3 lies along +y near the top of
// object 2's stick. Pivots: object 2 rotates about object 1's head centre,
// object 3 about the reference configuration's object-2 stick end.
inline const Vec3 kJointBase{0.0, 0.0, -40.0};
inline const Vec3 kObject2Offset{0.0, 0.0, 44.0};
inline const Vec3 kObject3Pivot{0.0, 0.0, 76.0};   // relative to kJointBase
inline const Vec3 kObject3Center{0.0, 4.0, 78.0};  // relative to kJointBase

struct SyntheticJoint {
    std::vector<TriMesh> surfaces;          // posed
    std::vector<TetMesh> tetras;            // posed, intensities per Eq. 24
    std::vector<RigidTransform> placement;  // canonical local -> world
    std::vector<RigidTransform> pose;       // canonical world -> posed world
    std::vector<Vec3> anchors;              // posed head centres
    JointSpec spec;

    JointData data() const;
};

SyntheticJoint generate_joint(const JointSpec& spec);

ReferencePtr make_reference(int resolution = 1, double r1 = 8, double r2 = 23, double r3 = 9);

// Eq. 24 volume of a posed joint: voxel value is the distance to the owning
// object's head centre, objects tested in index order, 0 outside. Every tet
// vertex's nearest voxel is additionally claimed by its object so that
// nearest-voxel intensity sampling stays within half-voxel of Eq. 24.
Volume3 render_volume(const SyntheticJoint& joint, double spacing);

// Default spacing: longest bounding-box axis / 64.
double default_spacing(const SyntheticJoint& joint);

// Nearest-voxel intensity sampling at the posed tet vertices.
VecX tet_intensity_correspondence(const Volume3& volume, const TetMesh& posed);

// The paper's training span: 15 shape triples (r, 31-r, 17-r) x 4 pose pairs.
// theta2 = (1/5, 2/5, 3/5, 4/5)pi; theta3 takes the values (1/2, 1/3, 2/9,
// 1/9)pi paired in the order (1/3, 1/2, 1/9, 2/9)pi.
std::vector<JointSpec> paper_training_specs(int resolution = 1);

// Six joints at poses outside the training set (generalisation targets).
std::vector<JointSpec> heldout_pose_specs(int resolution = 1);

// Landmark vertex ids (per object, local tet-vertex ids): the head poles.
struct LollipopLandmarks {
    Index north = 0;
    Index south = 0;
};
std::vector<LollipopLandmarks> lollipop_landmarks(int resolution);

}  // namespace dmfc
