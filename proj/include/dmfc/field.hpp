#pragma once

#include "dmfc/mesh.hpp"

#include <memory>
#include <string>
#include <vector>

namespace dmfc {

// Reference joint: one surface + tetra pair per object. The discrete domain of
// every field is the concatenation of the objects' tet-mesh vertices; the
// surface vertices are the leading block of each tet mesh (shared indexing).
struct MultiObjectReference {
    struct Object {
        std::string name;
        TriMesh surface;
        TetMesh tetra;  // tetra.intensity holds the reference intensity profile
    };

    std::vector<Object> objects;

    Index object_count() const { return static_cast<Index>(objects.size()); }

    Index object_domain_size(Index j) const { return objects[j].tetra.vertex_count(); }

    Index domain_size() const {
        Index n = 0;
        for (const auto& o : objects) n += o.tetra.vertex_count();
        return n;
    }

    // First global domain index of object j.
    Index object_offset(Index j) const {
        Index off = 0;
        for (Index i = 0; i < j; ++i) off += objects[i].tetra.vertex_count();
        return off;
    }

    // Object owning global domain index id (ids partition by object).
    Index object_of_point(Index id) const;

    // 3 x domain_size() matrix of all domain points, object blocks in order.
    Points domain_points() const;

    Points object_points(Index j) const { return objects[j].tetra.vertices; }

    VecX reference_intensity() const;

    Aabb bounding_box() const;

    void validate() const;
};

using ReferencePtr = std::shared_ptr<const MultiObjectReference>;

// Discrete realization of one training/sample function: per-domain-point
// shape displacement, pose displacement and intensity offset.
struct FeatureField {
    ReferencePtr domain;
    Points shape;   // 3 x N
    Points pose;    // 3 x N
    VecX intensity; // N

    Index size() const { return shape.cols(); }

    static FeatureField zero(ReferencePtr ref);

    void validate() const;

    // Channel block views for one object.
    auto shape_block(Index j) {
        return shape.middleCols(domain->object_offset(j), domain->object_domain_size(j));
    }
    auto shape_block(Index j) const {
        return shape.middleCols(domain->object_offset(j), domain->object_domain_size(j));
    }
    auto pose_block(Index j) {
        return pose.middleCols(domain->object_offset(j), domain->object_domain_size(j));
    }
    auto pose_block(Index j) const {
        return pose.middleCols(domain->object_offset(j), domain->object_domain_size(j));
    }
    auto intensity_block(Index j) {
        return intensity.segment(domain->object_offset(j), domain->object_domain_size(j));
    }

    Vec7 value_at(Index point) const {
        Vec7 v;
        v << shape.col(point), pose.col(point), intensity[point];
        return v;
    }
};

enum class InterpScheme { Nearest, Barycentric };

// Evaluate the 7-channel field at an arbitrary spatial query. Barycentric
// interpolates inside the enclosing tet and falls back to nearest outside the
// mesh. Queries beyond `max_range_factor` times the domain bounding-box
// diagonal (measured from the box) are out-of-domain errors.
Vec7 interpolate_field(const FeatureField& field, const Vec3& query, InterpScheme scheme,
                       double max_range_factor = 2.0);

// Per object j: pose[j] applied to (x + shape(x)) over the whole domain.
Points compose_fields(const MultiObjectReference& ref, const Points& shape,
                      const std::vector<RigidTransform>& pose);

}  // namespace dmfc
