#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dmfc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Points = Eigen::Matrix3Xd;  // one point per column
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Index = Eigen::Index;

// Bad or inconsistent input data (CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure: degenerate alignment, singular system (CLI exit code 4).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const MatX>& m) {
    return m.allFinite();
}

// Element of SE(3). rotation must stay orthonormal with det +1 (1e-10).
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 operator()(const Vec3& p) const { return rotation * p + translation; }

    Points operator()(const Points& pts) const {
        return (rotation * pts).colwise() + translation;
    }

    RigidTransform inverse() const {
        return {rotation.transpose(), -(rotation.transpose() * translation)};
    }

    // this ∘ other: apply `other` first.
    RigidTransform operator*(const RigidTransform& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }

    double rotation_defect() const {
        return (rotation.transpose() * rotation - Mat3::Identity()).norm();
    }

    bool is_valid(double tol = 1e-10) const {
        return rotation.allFinite() && translation.allFinite() &&
               rotation_defect() <= tol * 10 && std::abs(rotation.determinant() - 1.0) <= tol * 10;
    }
};

inline RigidTransform rotation_about(const Mat3& rot, const Vec3& pivot) {
    return {rot, pivot - rot * pivot};
}

inline Mat3 rot_x(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix();
}

}  // namespace dmfc
