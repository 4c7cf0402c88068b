#pragma once

#include "dmfc/types.hpp"

#include <array>
#include <vector>

namespace dmfc {

struct TriMesh {
    Points vertices;  // 3 x V
    std::vector<std::array<int, 3>> triangles;

    Index vertex_count() const { return vertices.cols(); }
    void validate() const;
};

// Tetrahedral mesh carrying one intensity value per vertex.
struct TetMesh {
    Points vertices;  // 3 x V
    std::vector<std::array<int, 4>> tets;
    VecX intensity;  // V

    Index vertex_count() const { return vertices.cols(); }
    void validate() const;
};

Vec3 centroid(const Points& pts);
inline Vec3 centroid(const TriMesh& m) { return centroid(m.vertices); }

// R*x + t for every point.
std::vector<Vec3> apply_rigid(const RigidTransform& t, const std::vector<Vec3>& pts);
inline Points apply_rigid(const RigidTransform& t, const Points& pts) { return t(pts); }

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    void expand(const Vec3& p);
    void expand(const Aabb& other);
    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return extent().norm(); }
    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};

Aabb bounding_box(const Points& pts);

// Barycentric coordinates of p in tet (a,b,c,d); all >= -tol means inside.
Eigen::Vector4d tet_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                const Vec3& d);

bool point_in_tet(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                  double tol = 1e-12);

// Linear scan over tets; returns tet index or -1. barycentric output optional.
int locate_tet(const TetMesh& mesh, const Vec3& p, Eigen::Vector4d* barycentric = nullptr,
               double tol = 1e-12);

bool point_in_tet_mesh(const TetMesh& mesh, const Vec3& p, double tol = 1e-12);

Index nearest_vertex(const Points& pts, const Vec3& query);

}  // namespace dmfc
