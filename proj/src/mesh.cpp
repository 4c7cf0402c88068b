#include "dmfc/mesh.hpp"

namespace dmfc {

void TriMesh::validate() const {
    if (!all_finite(vertices)) throw DataError("TriMesh: non-finite vertex");
    if (vertex_count() < 3) throw DataError("TriMesh: fewer than 3 vertices");
    const int n = static_cast<int>(vertex_count());
    for (const auto& t : triangles) {
        for (int idx : t)
            if (idx < 0 || idx >= n) throw DataError("TriMesh: triangle index out of range");
        if (triangle_area(vertices.col(t[0]), vertices.col(t[1]), vertices.col(t[2])) <= 0.0)
            throw DataError("TriMesh: degenerate triangle");
    }
}

void TetMesh::validate() const {
    if (!all_finite(vertices)) throw DataError("TetMesh: non-finite vertex");
    if (!intensity.allFinite()) throw DataError("TetMesh: non-finite intensity");
    if (intensity.size() != vertex_count())
        throw DataError("TetMesh: intensity length does not match vertex count");
    const int n = static_cast<int>(vertex_count());
    for (const auto& t : tets)
        for (int idx : t)
            if (idx < 0 || idx >= n) throw DataError("TetMesh: tet index out of range");
}

Vec3 centroid(const Points& pts) {
    if (pts.cols() < 1) throw DataError("centroid: empty point set");
    return pts.rowwise().mean();
}

std::vector<Vec3> apply_rigid(const RigidTransform& t, const std::vector<Vec3>& pts) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(t(p));
    return out;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

void Aabb::expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
}

void Aabb::expand(const Aabb& other) {
    lo = lo.cwiseMin(other.lo);
    hi = hi.cwiseMax(other.hi);
}

Aabb bounding_box(const Points& pts) {
    Aabb box;
    for (Index i = 0; i < pts.cols(); ++i) box.expand(pts.col(i));
    return box;
}

Eigen::Vector4d tet_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                const Vec3& d) {
    Mat3 m;
    m.col(0) = b - a;
    m.col(1) = c - a;
    m.col(2) = d - a;
    const Vec3 w = m.fullPivLu().solve(p - a);
    return {1.0 - w.sum(), w[0], w[1], w[2]};
}

bool point_in_tet(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                  double tol) {
    const Eigen::Vector4d bc = tet_barycentric(p, a, b, c, d);
    return bc.allFinite() && (bc.array() >= -tol).all();
}

int locate_tet(const TetMesh& mesh, const Vec3& p, Eigen::Vector4d* barycentric, double tol) {
    for (size_t i = 0; i < mesh.tets.size(); ++i) {
        const auto& t = mesh.tets[i];
        const Eigen::Vector4d bc =
            tet_barycentric(p, mesh.vertices.col(t[0]), mesh.vertices.col(t[1]),
                            mesh.vertices.col(t[2]), mesh.vertices.col(t[3]));
        if (bc.allFinite() && (bc.array() >= -tol).all()) {
            if (barycentric) *barycentric = bc;
            return static_cast<int>(i);
        }
    }
    return -1;
}

bool point_in_tet_mesh(const TetMesh& mesh, const Vec3& p, double tol) {
    return locate_tet(mesh, p, nullptr, tol) >= 0;
}

Index nearest_vertex(const Points& pts, const Vec3& query) {
    if (pts.cols() == 0) throw DataError("nearest_vertex: empty point set");
    Index best = 0;
    (pts.colwise() - query).colwise().squaredNorm().minCoeff(&best);
    return best;
}

}  // namespace dmfc
