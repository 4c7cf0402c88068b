#pragma once

#include "dmfc/types.hpp"

#include <vector>

namespace dmfc {

// Closed-form rigid alignment (no scaling): returns the SE(3) element
// minimizing ||h(source) - target||^2 over corresponding columns.
// Centroid subtraction + SVD of the cross-covariance; a reflection is
// corrected by flipping the smallest singular direction.
RigidTransform procrustes_align(const Points& source, const Points& target);

struct GpaResult {
    std::vector<Points> aligned;
    std::vector<RigidTransform> transforms;  // transforms[i](shapes[i]) == aligned[i]
    Points consensus;                        // centred at the origin
    int iterations = 0;
};

// Generalized Procrustes analysis: iterative align-to-mean until the
// consensus RMS movement drops below tol or max_iter is reached.
GpaResult gpa(const std::vector<Points>& shapes, double tol = 1e-10, int max_iter = 100);

// EDR log map: displacement field x -> h^{-1}(T(x)) - x over the reference
// points. T is the centroid-restoring translation of the alignment; for
// Procrustes-estimated h it is the identity, which is what this evaluates.
Points edr_log(const RigidTransform& h, const Points& ref_points);

// EDR exp map: the rigid transform whose action on the reference best
// reproduces ref_points + field, i.e. procrustes_align(ref+field, ref)^{-1}.
RigidTransform edr_exp(const Points& field, const Points& ref_points);

// Squared pose metric d^2(h, Id): sum of squared field magnitudes (Eq. 2 form).
double pose_distance_sq(const Points& field);

struct FrechetMeanPose {
    RigidTransform transform;
    Points mean_field;
};

// Pointwise mean of the fields followed by one exp map.
FrechetMeanPose frechet_mean_pose(const std::vector<Points>& fields, const Points& ref_points);

// Angles (a,b,c) with R = Rx(a)*Ry(b)*Rz(c).
Vec3 euler_xyz_from_rotation(const Mat3& r);
Mat3 rotation_from_euler_xyz(const Vec3& angles);

// Rotation angle of the yz-plane block: atan2(R(2,1), R(1,1)). Reads the
// planar angle of (near-)x-axis rotations.
double planar_angle_yz(const Mat3& r);

}  // namespace dmfc
