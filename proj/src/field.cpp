#include "dmfc/field.hpp"

namespace dmfc {

Index MultiObjectReference::object_of_point(Index id) const {
    Index off = 0;
    for (Index j = 0; j < object_count(); ++j) {
        off += objects[j].tetra.vertex_count();
        if (id < off) return j;
    }
    throw DataError("object_of_point: domain index out of range");
}

Points MultiObjectReference::domain_points() const {
    Points pts(3, domain_size());
    Index off = 0;
    for (const auto& o : objects) {
        pts.middleCols(off, o.tetra.vertex_count()) = o.tetra.vertices;
        off += o.tetra.vertex_count();
    }
    return pts;
}

VecX MultiObjectReference::reference_intensity() const {
    VecX out(domain_size());
    Index off = 0;
    for (const auto& o : objects) {
        out.segment(off, o.tetra.vertex_count()) = o.tetra.intensity;
        off += o.tetra.vertex_count();
    }
    return out;
}

Aabb MultiObjectReference::bounding_box() const {
    Aabb box;
    for (const auto& o : objects) box.expand(dmfc::bounding_box(o.tetra.vertices));
    return box;
}

void MultiObjectReference::validate() const {
    if (objects.empty()) throw DataError("MultiObjectReference: no objects");
    for (const auto& o : objects) {
        o.surface.validate();
        o.tetra.validate();
        const Index ns = o.surface.vertex_count();
        if (o.tetra.vertex_count() < ns)
            throw DataError("MultiObjectReference: tet mesh smaller than surface");
        if ((o.tetra.vertices.leftCols(ns) - o.surface.vertices).norm() > 1e-12)
            throw DataError("MultiObjectReference: surface vertices are not the tet-mesh prefix");
    }
}

FeatureField FeatureField::zero(ReferencePtr ref) {
    FeatureField f;
    const Index n = ref->domain_size();
    f.domain = std::move(ref);
    f.shape = Points::Zero(3, n);
    f.pose = Points::Zero(3, n);
    f.intensity = VecX::Zero(n);
    return f;
}

void FeatureField::validate() const {
    if (!domain) throw DataError("FeatureField: missing domain");
    const Index n = domain->domain_size();
    if (shape.cols() != n || pose.cols() != n || intensity.size() != n)
        throw DataError("FeatureField: channel length does not match domain size");
    if (!all_finite(shape) || !all_finite(pose) || !intensity.allFinite())
        throw DataError("FeatureField: non-finite value");
}

Vec7 interpolate_field(const FeatureField& field, const Vec3& query, InterpScheme scheme,
                       double max_range_factor) {
    field.validate();
    const auto& ref = *field.domain;
    Aabb box = ref.bounding_box();
    const double range = max_range_factor * box.diagonal();
    const Vec3 clamped = query.cwiseMax(box.lo).cwiseMin(box.hi);
    if ((query - clamped).norm() > range)
        throw DataError("interpolate_field: query beyond bounded domain expansion");

    if (scheme == InterpScheme::Barycentric) {
        for (Index j = 0; j < ref.object_count(); ++j) {
            const auto& tetra = ref.objects[j].tetra;
            Eigen::Vector4d bc;
            const int t = locate_tet(tetra, query, &bc, 1e-9);
            if (t >= 0) {
                const Index off = ref.object_offset(j);
                Vec7 out = Vec7::Zero();
                for (int k = 0; k < 4; ++k)
                    out += bc[k] * field.value_at(off + tetra.tets[t][k]);
                return out;
            }
        }
        // outside every tet mesh: nearest-point fallback
    }
    const Points pts = ref.domain_points();
    return field.value_at(nearest_vertex(pts, query));
}

Points compose_fields(const MultiObjectReference& ref, const Points& shape,
                      const std::vector<RigidTransform>& pose) {
    if (shape.cols() != ref.domain_size())
        throw DataError("compose_fields: shape field length does not match domain");
    if (static_cast<Index>(pose.size()) != ref.object_count())
        throw DataError("compose_fields: one transform per object required");
    Points out(3, ref.domain_size());
    for (Index j = 0; j < ref.object_count(); ++j) {
        const Index off = ref.object_offset(j);
        const Index n = ref.object_domain_size(j);
        out.middleCols(off, n) =
            pose[j](Points(ref.objects[j].tetra.vertices + shape.middleCols(off, n)));
    }
    return out;
}

}  // namespace dmfc
