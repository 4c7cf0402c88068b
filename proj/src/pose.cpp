#include "dmfc/pose.hpp"

#include <cmath>

namespace dmfc {

RigidTransform procrustes_align(const Points& source, const Points& target) {
    if (source.cols() != target.cols())
        throw DataError("procrustes_align: point counts differ");
    if (source.cols() < 3) throw NumericalError("procrustes_align: fewer than 3 points");
    if (!all_finite(source) || !all_finite(target))
        throw DataError("procrustes_align: non-finite input");

    const Vec3 cs = source.rowwise().mean();
    const Vec3 ct = target.rowwise().mean();
    const Mat3 cross = (target.colwise() - ct) * (source.colwise() - cs).transpose();

    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    // rank < 2 leaves a rotation about the dominant axis unconstrained
    if (sv[1] <= 1e-12 * std::max(sv[0], 1e-300))
        throw NumericalError("procrustes_align: degenerate (collinear) configuration");

    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
    const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
    return {r, ct - r * cs};
}

GpaResult gpa(const std::vector<Points>& shapes, double tol, int max_iter) {
    if (shapes.size() < 2) throw DataError("gpa: at least 2 shapes required");
    const Index n = shapes.front().cols();
    for (const auto& s : shapes)
        if (s.cols() != n) throw DataError("gpa: point counts differ");

    GpaResult res;
    res.consensus = shapes.front().colwise() - Vec3(shapes.front().rowwise().mean());
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        Points sum = Points::Zero(3, n);
        for (const auto& s : shapes) sum += procrustes_align(s, res.consensus)(s);
        Points next = sum / static_cast<double>(shapes.size());
        next = next.colwise() - Vec3(next.rowwise().mean());
        const double movement = std::sqrt((next - res.consensus).squaredNorm() / n);
        res.consensus = next;
        if (movement < tol) break;
    }
    res.transforms.reserve(shapes.size());
    res.aligned.reserve(shapes.size());
    for (const auto& s : shapes) {
        res.transforms.push_back(procrustes_align(s, res.consensus));
        res.aligned.push_back(res.transforms.back()(s));
    }
    return res;
}

Points edr_log(const RigidTransform& h, const Points& ref_points) {
    return h.inverse()(ref_points) - ref_points;
}

RigidTransform edr_exp(const Points& field, const Points& ref_points) {
    if (field.cols() != ref_points.cols())
        throw DataError("edr_exp: field length does not match reference");
    return procrustes_align(Points(ref_points + field), ref_points).inverse();
}

double pose_distance_sq(const Points& field) {
    return field.squaredNorm();
}

FrechetMeanPose frechet_mean_pose(const std::vector<Points>& fields, const Points& ref_points) {
    if (fields.empty()) throw DataError("frechet_mean_pose: no fields");
    Points mean = Points::Zero(3, ref_points.cols());
    for (const auto& f : fields) {
        if (f.cols() != ref_points.cols())
            throw DataError("frechet_mean_pose: field length mismatch");
        mean += f;
    }
    mean /= static_cast<double>(fields.size());
    return {edr_exp(mean, ref_points), mean};
}

Vec3 euler_xyz_from_rotation(const Mat3& r) {
    // R = Rx(a) Ry(b) Rz(c); r(0,2) = sin(b)
    Vec3 angles;
    angles[1] = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
    if (std::abs(std::cos(angles[1])) > 1e-9) {
        angles[0] = std::atan2(-r(1, 2), r(2, 2));
        angles[2] = std::atan2(-r(0, 1), r(0, 0));
    } else {
        // gimbal: fold everything into a
        angles[0] = std::atan2(r(2, 1), r(1, 1));
        angles[2] = 0.0;
    }
    return angles;
}

Mat3 rotation_from_euler_xyz(const Vec3& angles) {
    return (Eigen::AngleAxisd(angles[0], Vec3::UnitX()) *
            Eigen::AngleAxisd(angles[1], Vec3::UnitY()) *
            Eigen::AngleAxisd(angles[2], Vec3::UnitZ()))
        .toRotationMatrix();
}

double planar_angle_yz(const Mat3& r) {
    return std::atan2(r(2, 1), r(1, 1));
}

}  // namespace dmfc
