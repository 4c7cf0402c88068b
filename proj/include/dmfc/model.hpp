#pragma once

#include "dmfc/field.hpp"
#include "dmfc/pose.hpp"

#include <array>
#include <optional>
#include <vector>

namespace dmfc {

// How rigid pose enters the statistical space.
//   Edr: pose displacement fields, exp-mapped back to SE(3) when sampling.
//   Sr:  XYZ Euler angles + translation, 6 numbers per object, treated linearly.
//   Pdm: pose displacement fields added linearly to the points (no exp map).
enum class PoseMode { Edr, Sr, Pdm };

struct ClassWeights {
    double shape = 1.0;
    double pose = 1.0;
    double intensity = 1.0;
};

// One observed joint in correspondence with the reference: per-object posed
// tet-mesh vertices and per-vertex intensities.
struct JointData {
    std::vector<Points> vertices;
    std::vector<VecX> intensity;
};

struct TrainingSet {
    ReferencePtr reference;
    std::vector<FeatureField> fields;                 // shape/pose(EDR log)/intensity
    std::vector<std::vector<RigidTransform>> poses;   // reference -> observed, per sample/object
    Index n() const { return static_cast<Index>(fields.size()); }
};

struct RankSpec {
    enum class Kind { Full, Auto, Fixed };
    Kind kind = Kind::Full;
    Index value = 0;
    static RankSpec full() { return {}; }
    static RankSpec auto_fraction() { return {Kind::Auto, 0}; }
    static RankSpec fixed(Index m) { return {Kind::Fixed, m}; }
};

// Trained low-rank Gaussian-process model over the stacked feature vector.
// Layout: 7 scalars per domain point (Sx Sy Sz Px Py Pz I), followed in SR
// mode by 6 scalars per object (Euler xyz, translation xyz). The basis is
// stored in raw units and is orthonormal under the class-weighted inner
// product.
struct DmfcGpm {
    ReferencePtr reference;
    PoseMode mode = PoseMode::Edr;
    ClassWeights weights;
    VecX mean;         // dim()
    VecX eigenvalues;  // rank(), non-increasing, >= 0
    MatX basis;        // dim() x rank()

    Index point_dim() const { return 7 * reference->domain_size(); }
    Index sr_dim() const {
        return mode == PoseMode::Sr ? 6 * reference->object_count() : 0;
    }
    Index dim() const { return point_dim() + sr_dim(); }
    Index rank() const { return eigenvalues.size(); }

    Index sr_offset(Index j) const { return point_dim() + 6 * j; }

    // Per-component weight vector matching the stacked layout.
    VecX weight_vector() const;

    void validate() const;
};

// A concrete sampled joint.
struct JointInstance {
    ReferencePtr reference;
    std::vector<TriMesh> surfaces;            // posed surface meshes
    std::vector<TetMesh> tetras;              // posed tet meshes with intensities
    std::vector<RigidTransform> poses;
    FeatureField field;                       // the raw sampled field
};

// Shape fields as GPA-style alignment residuals, pose fields via the EDR log
// map, intensity fields as pointwise differences from the reference profile.
TrainingSet assemble_training_functions(const std::vector<JointData>& samples, ReferencePtr ref);

ClassWeights default_class_weights(const TrainingSet& ts, PoseMode mode = PoseMode::Edr);

DmfcGpm build(const TrainingSet& ts, std::optional<ClassWeights> weights = std::nullopt,
              RankSpec rank = RankSpec::full(), PoseMode mode = PoseMode::Edr);

JointInstance sample(const DmfcGpm& model, const VecX& theta);

std::pair<VecX, JointInstance> random_sample(const DmfcGpm& model, std::uint64_t seed);

DmfcGpm marginalize_domain(const DmfcGpm& model, const std::vector<Index>& point_ids);

struct ClassSet {
    bool shape = false;
    bool pose = false;
    bool intensity = false;
    bool any() const { return shape || pose || intensity; }
    static ClassSet all() { return {true, true, true}; }
};

DmfcGpm marginalize_class(const DmfcGpm& model, ClassSet classes);

// Partial observation of the deformation field at one domain point.
struct PointObservation {
    Index point = 0;
    std::array<bool, 7> mask{};  // Sx Sy Sz Px Py Pz I
    Vec7 value = Vec7::Zero();

    static PointObservation full(Index point, const Vec7& v) {
        PointObservation o;
        o.point = point;
        o.mask = {true, true, true, true, true, true, true};
        o.value = v;
        return o;
    }
};

DmfcGpm posterior(const DmfcGpm& model, const std::vector<PointObservation>& observations,
                  double sigma2);

TrainingSet permute_poses(const TrainingSet& ts,
                          std::optional<double> similarity_threshold = std::nullopt);

VecX variance_explained(const DmfcGpm& model);

// --- helpers shared with tests and tools ---

// Stack a field (and, in SR mode, pose transforms) into the model layout.
VecX stack_row(const MultiObjectReference& ref, PoseMode mode, const FeatureField& field,
               const std::vector<RigidTransform>* poses);

// Coefficients reproducing `row` as closely as the span allows.
VecX encode(const DmfcGpm& model, const VecX& row);

// Raw-unit feature vector for coefficients theta (mean + sum of modes).
VecX decode(const DmfcGpm& model, const VecX& theta);

// Low-rank kernel block sum_m lambda_m Phi_m(x) Phi_m(y)^T (raw units).
Eigen::Matrix<double, 7, 7> kernel_block(const DmfcGpm& model, Index x, Index y);

// Pointwise prior variance per component of the stacked vector.
VecX pointwise_variance(const DmfcGpm& model);

JointInstance instance_from_vector(const DmfcGpm& model, const VecX& v);

}  // namespace dmfc
