#include "dmfc/model.hpp"

#include "dmfc/rng.hpp"

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dmfc {

namespace {

// Ratio of pose to shape weighted variance the default weighting targets;
// matches the reported variance attribution of the two leading modes.
constexpr double kPoseShapeVarianceRatio = 9.3 / 86.0;

void apply_sign_convention(MatX& basis) {
    for (Index m = 0; m < basis.cols(); ++m) {
        Index imax = 0;
        basis.col(m).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, m) < 0) basis.col(m) = -basis.col(m);
    }
}

// Rebuild an orthonormal eigenbasis from the lambda-scaled, weighted columns.
void reorthonormalize(DmfcGpm& m) {
    const VecX w = m.weight_vector();
    MatX b = m.basis;
    for (Index c = 0; c < b.cols(); ++c)
        b.col(c) = w.cwiseProduct(b.col(c)) * std::sqrt(std::max(m.eigenvalues[c], 0.0));
    Eigen::BDCSVD<MatX> svd(b, Eigen::ComputeThinU);
    const VecX sv = svd.singularValues();
    Index keep = 0;
    const double cutoff = sv.size() ? sv[0] * 1e-9 : 0.0;
    while (keep < sv.size() && sv[keep] > cutoff) ++keep;
    if (keep == 0) keep = std::min<Index>(1, sv.size());
    m.eigenvalues = sv.head(keep).array().square();
    m.basis = svd.matrixU().leftCols(keep).array().colwise() / w.array();
    apply_sign_convention(m.basis);
}

}  // namespace

VecX DmfcGpm::weight_vector() const {
    VecX w(dim());
    const Index n = reference->domain_size();
    for (Index p = 0; p < n; ++p) {
        w.segment(7 * p, 3).setConstant(weights.shape);
        w.segment(7 * p + 3, 3).setConstant(weights.pose);
        w[7 * p + 6] = weights.intensity;
    }
    if (sr_dim() > 0) w.tail(sr_dim()).setConstant(weights.pose);
    return w;
}

void DmfcGpm::validate() const {
    if (!reference) throw DataError("DmfcGpm: missing reference");
    if (mean.size() != dim()) throw DataError("DmfcGpm: mean length mismatch");
    if (basis.rows() != dim() || basis.cols() != eigenvalues.size())
        throw DataError("DmfcGpm: basis shape mismatch");
    for (Index m = 0; m + 1 < eigenvalues.size(); ++m)
        if (eigenvalues[m] + 1e-12 < eigenvalues[m + 1])
            throw DataError("DmfcGpm: eigenvalues not sorted");
    if (weights.shape <= 0 || weights.pose <= 0 || weights.intensity <= 0)
        throw DataError("DmfcGpm: non-positive class weight");
}

VecX stack_row(const MultiObjectReference& ref, PoseMode mode, const FeatureField& field,
               const std::vector<RigidTransform>* poses) {
    const Index n = ref.domain_size();
    const Index sr = mode == PoseMode::Sr ? 6 * ref.object_count() : 0;
    VecX row = VecX::Zero(7 * n + sr);
    const bool point_pose = mode != PoseMode::Sr;
    for (Index p = 0; p < n; ++p) {
        row.segment(7 * p, 3) = field.shape.col(p);
        if (point_pose) row.segment(7 * p + 3, 3) = field.pose.col(p);
        row[7 * p + 6] = field.intensity[p];
    }
    if (sr > 0) {
        if (!poses) throw DataError("stack_row: SR mode requires pose transforms");
        for (Index j = 0; j < ref.object_count(); ++j) {
            row.segment(7 * n + 6 * j, 3) = euler_xyz_from_rotation((*poses)[j].rotation);
            row.segment(7 * n + 6 * j + 3, 3) = (*poses)[j].translation;
        }
    }
    return row;
}

TrainingSet assemble_training_functions(const std::vector<JointData>& samples, ReferencePtr ref) {
    ref->validate();
    if (samples.empty()) throw DataError("assemble_training_functions: no samples");
    TrainingSet ts;
    ts.reference = ref;
    for (const auto& s : samples) {
        if (static_cast<Index>(s.vertices.size()) != ref->object_count() ||
            static_cast<Index>(s.intensity.size()) != ref->object_count())
            throw DataError("assemble_training_functions: object count mismatch");
        FeatureField f = FeatureField::zero(ref);
        std::vector<RigidTransform> pose_transforms;
        for (Index j = 0; j < ref->object_count(); ++j) {
            const Points& refpts = ref->objects[j].tetra.vertices;
            if (s.vertices[j].cols() != refpts.cols() ||
                s.intensity[j].size() != refpts.cols())
                throw DataError("assemble_training_functions: correspondence mismatch");
            const RigidTransform h = procrustes_align(s.vertices[j], refpts);
            f.shape_block(j) = h(s.vertices[j]) - refpts;
            f.pose_block(j) = edr_log(h, refpts);
            f.intensity_block(j) = s.intensity[j] - ref->objects[j].tetra.intensity;
            pose_transforms.push_back(h.inverse());
        }
        f.validate();
        ts.fields.push_back(std::move(f));
        ts.poses.push_back(std::move(pose_transforms));
    }
    return ts;
}

ClassWeights default_class_weights(const TrainingSet& ts, PoseMode mode) {
    const Index n = ts.n();
    const Index npts = ts.reference->domain_size();
    Points mean_shape = Points::Zero(3, npts);
    Points mean_pose = Points::Zero(3, npts);
    VecX mean_int = VecX::Zero(npts);
    for (const auto& f : ts.fields) {
        mean_shape += f.shape;
        mean_pose += f.pose;
        mean_int += f.intensity;
    }
    mean_shape /= n;
    mean_pose /= n;
    mean_int /= n;

    double vs = 0, vp = 0, vi = 0;
    for (const auto& f : ts.fields) {
        vs += (f.shape - mean_shape).squaredNorm();
        vi += (f.intensity - mean_int).squaredNorm();
    }
    if (mode == PoseMode::Sr) {
        // pose class = the 6 SR numbers per object
        MatX sr(6 * ts.reference->object_count(), n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < ts.reference->object_count(); ++j) {
                sr.block(6 * j, i, 3, 1) = euler_xyz_from_rotation(ts.poses[i][j].rotation);
                sr.block(6 * j + 3, i, 3, 1) = ts.poses[i][j].translation;
            }
        const MatX centered = sr.colwise() - VecX(sr.rowwise().mean());
        vp = centered.squaredNorm();
    } else {
        for (const auto& f : ts.fields) vp += (f.pose - mean_pose).squaredNorm();
    }

    ClassWeights w;
    w.pose = vp > 0 ? std::sqrt(kPoseShapeVarianceRatio * vs / vp) : 1.0;
    // intensity per-scalar RMS matched to the weighted shape+pose block
    const double sp_per_scalar = (vs + w.pose * w.pose * vp) / 6.0;
    w.intensity = vi > 0 ? std::sqrt(sp_per_scalar / vi) : 1.0;
    if (w.pose <= 0 || !std::isfinite(w.pose)) w.pose = 1.0;
    if (w.intensity <= 0 || !std::isfinite(w.intensity)) w.intensity = 1.0;
    return w;
}

DmfcGpm build(const TrainingSet& ts, std::optional<ClassWeights> weights, RankSpec rank,
              PoseMode mode) {
    const Index n = ts.n();
    if (n < 2) throw DataError("build: at least 2 training samples required");
    if (mode == PoseMode::Sr && static_cast<Index>(ts.poses.size()) != n)
        throw DataError("build: SR mode requires pose transforms for every sample");

    DmfcGpm model;
    model.reference = ts.reference;
    model.mode = mode;
    model.weights = weights ? *weights : default_class_weights(ts, mode);

    const Index dim = model.dim();
    MatX rows(n, dim);
    for (Index i = 0; i < n; ++i)
        rows.row(i) =
            stack_row(*ts.reference, mode, ts.fields[i], ts.poses.empty() ? nullptr : &ts.poses[i])
                .transpose();

    model.mean = rows.colwise().mean().transpose();
    const VecX w = model.weight_vector();
    MatX centered = rows.rowwise() - model.mean.transpose();
    centered = centered.array().rowwise() * w.transpose().array();

    const double total_variance = centered.squaredNorm() / (n - 1);
    if (total_variance <= 0) throw NumericalError("build: zero total variance");

    Eigen::BDCSVD<MatX> svd(centered, Eigen::ComputeThinV);
    const VecX sv = svd.singularValues();
    VecX lambda = sv.array().square() / (n - 1);

    Index available = std::min<Index>(n - 1, dim);
    Index m = available;
    switch (rank.kind) {
        case RankSpec::Kind::Full:
            break;
        case RankSpec::Kind::Fixed:
            if (rank.value < 1) throw DataError("build: rank must be >= 1");
            m = std::min<Index>(rank.value, available);
            break;
        case RankSpec::Kind::Auto: {
            const double target = 0.98 * lambda.head(available).sum();
            double acc = 0;
            m = available;
            for (Index k = 0; k < available; ++k) {
                acc += lambda[k];
                if (acc >= target) {
                    m = k + 1;
                    break;
                }
            }
            break;
        }
    }

    model.eigenvalues = lambda.head(m);
    model.basis = svd.matrixV().leftCols(m).array().colwise() / w.array();
    apply_sign_convention(model.basis);
    model.validate();
    return model;
}

VecX decode(const DmfcGpm& model, const VecX& theta) {
    if (theta.size() > model.rank()) throw DataError("decode: more coefficients than modes");
    VecX v = model.mean;
    for (Index m = 0; m < theta.size(); ++m)
        v += theta[m] * std::sqrt(std::max(model.eigenvalues[m], 0.0)) * model.basis.col(m);
    return v;
}

VecX encode(const DmfcGpm& model, const VecX& row) {
    if (row.size() != model.dim()) throw DataError("encode: row length mismatch");
    const VecX w = model.weight_vector();
    const VecX res = w.cwiseProduct(row - model.mean);
    VecX theta(model.rank());
    for (Index m = 0; m < model.rank(); ++m) {
        const double s = std::sqrt(std::max(model.eigenvalues[m], 0.0));
        const double proj = w.cwiseProduct(model.basis.col(m)).dot(res);
        theta[m] = s > 1e-14 ? proj / s : 0.0;
    }
    return theta;
}

JointInstance instance_from_vector(const DmfcGpm& model, const VecX& v) {
    const auto& ref = *model.reference;
    const Index npts = ref.domain_size();

    FeatureField f = FeatureField::zero(model.reference);
    for (Index p = 0; p < npts; ++p) {
        f.shape.col(p) = v.segment(7 * p, 3);
        f.pose.col(p) = v.segment(7 * p + 3, 3);
        f.intensity[p] = v[7 * p + 6];
    }

    JointInstance inst;
    inst.reference = model.reference;
    inst.field = f;

    std::vector<RigidTransform> poses(ref.object_count());
    for (Index j = 0; j < ref.object_count(); ++j) {
        switch (model.mode) {
            case PoseMode::Edr:
                poses[j] = edr_exp(f.pose_block(j), ref.objects[j].tetra.vertices);
                break;
            case PoseMode::Sr: {
                const Index off = model.sr_offset(j);
                poses[j].rotation = rotation_from_euler_xyz(v.segment(off, 3));
                poses[j].translation = v.segment(off + 3, 3);
                break;
            }
            case PoseMode::Pdm:
                poses[j] = RigidTransform::identity();
                break;
        }
    }

    Points posed;
    if (model.mode == PoseMode::Pdm) {
        // pose fields treated as plain displacements
        posed = ref.domain_points() + f.shape + f.pose;
    } else {
        posed = compose_fields(ref, f.shape, poses);
    }

    const VecX intensity = ref.reference_intensity() + f.intensity;
    for (Index j = 0; j < ref.object_count(); ++j) {
        const Index off = ref.object_offset(j);
        const Index nj = ref.object_domain_size(j);
        const Index ns = ref.objects[j].surface.vertex_count();
        TriMesh surf;
        surf.vertices = posed.middleCols(off, ns);
        surf.triangles = ref.objects[j].surface.triangles;
        TetMesh tet;
        tet.vertices = posed.middleCols(off, nj);
        tet.tets = ref.objects[j].tetra.tets;
        tet.intensity = intensity.segment(off, nj);
        inst.surfaces.push_back(std::move(surf));
        inst.tetras.push_back(std::move(tet));
    }
    inst.poses = std::move(poses);
    return inst;
}

JointInstance sample(const DmfcGpm& model, const VecX& theta) {
    return instance_from_vector(model, decode(model, theta));
}

std::pair<VecX, JointInstance> random_sample(const DmfcGpm& model, std::uint64_t seed) {
    Rng rng(seed);
    VecX theta(model.rank());
    for (Index m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
    return {theta, sample(model, theta)};
}

DmfcGpm marginalize_domain(const DmfcGpm& model, const std::vector<Index>& point_ids) {
    if (point_ids.empty()) throw DataError("marginalize_domain: empty point set");
    std::vector<Index> ids = point_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const Index npts = model.reference->domain_size();
    if (ids.front() < 0 || ids.back() >= npts)
        throw DataError("marginalize_domain: point id out of range");

    const auto& ref = *model.reference;
    auto restricted = std::make_shared<MultiObjectReference>();
    std::vector<Index> kept_objects;
    std::vector<Index> new_point_of_old(npts, -1);
    Index next = 0;
    for (Index j = 0; j < ref.object_count(); ++j) {
        const Index off = ref.object_offset(j);
        const Index nj = ref.object_domain_size(j);
        std::vector<Index> local;
        for (Index id : ids)
            if (id >= off && id < off + nj) local.push_back(id - off);
        if (local.empty()) continue;
        kept_objects.push_back(j);

        std::vector<Index> local_new(nj, -1);
        MultiObjectReference::Object obj;
        obj.name = ref.objects[j].name;
        obj.tetra.vertices.resize(3, static_cast<Index>(local.size()));
        obj.tetra.intensity.resize(static_cast<Index>(local.size()));
        Index ns_kept = 0;
        for (size_t k = 0; k < local.size(); ++k) {
            local_new[local[k]] = static_cast<Index>(k);
            obj.tetra.vertices.col(static_cast<Index>(k)) = ref.objects[j].tetra.vertices.col(local[k]);
            obj.tetra.intensity[static_cast<Index>(k)] = ref.objects[j].tetra.intensity[local[k]];
            if (local[k] < ref.objects[j].surface.vertex_count()) ++ns_kept;
            new_point_of_old[off + local[k]] = next + static_cast<Index>(k);
        }
        // surface vertices are the leading ids, so the kept prefix stays a prefix
        obj.surface.vertices = obj.tetra.vertices.leftCols(ns_kept);
        for (const auto& t : ref.objects[j].surface.triangles) {
            std::array<int, 3> nt{};
            bool keep = true;
            for (int k = 0; k < 3; ++k) {
                const Index v = local_new[t[k]];
                if (v < 0 || v >= ns_kept) keep = false;
                else nt[k] = static_cast<int>(v);
            }
            if (keep) obj.surface.triangles.push_back(nt);
        }
        for (const auto& t : ref.objects[j].tetra.tets) {
            std::array<int, 4> nt{};
            bool keep = true;
            for (int k = 0; k < 4; ++k) {
                const Index v = local_new[t[k]];
                if (v < 0) keep = false;
                else nt[k] = static_cast<int>(v);
            }
            if (keep) obj.tetra.tets.push_back(nt);
        }
        restricted->objects.push_back(std::move(obj));
        next += static_cast<Index>(local.size());
    }

    DmfcGpm out;
    out.reference = restricted;
    out.mode = model.mode;
    out.weights = model.weights;
    const Index kept = static_cast<Index>(ids.size());
    out.mean.resize(out.dim());
    out.basis.resize(out.dim(), model.rank());
    for (Index k = 0; k < kept; ++k) {
        out.mean.segment(7 * k, 7) = model.mean.segment(7 * ids[k], 7);
        out.basis.middleRows(7 * k, 7) = model.basis.middleRows(7 * ids[k], 7);
    }
    if (model.mode == PoseMode::Sr) {
        for (size_t jj = 0; jj < kept_objects.size(); ++jj) {
            out.mean.segment(out.point_dim() + 6 * jj, 6) =
                model.mean.segment(model.sr_offset(kept_objects[jj]), 6);
            out.basis.middleRows(out.point_dim() + 6 * jj, 6) =
                model.basis.middleRows(model.sr_offset(kept_objects[jj]), 6);
        }
    }
    out.eigenvalues = model.eigenvalues;
    reorthonormalize(out);
    out.validate();
    return out;
}

DmfcGpm marginalize_class(const DmfcGpm& model, ClassSet classes) {
    if (!classes.any()) throw DataError("marginalize_class: empty class subset");
    DmfcGpm out = model;
    const Index npts = model.reference->domain_size();
    auto zero_rows = [&](Index start, Index count) {
        out.mean.segment(start, count).setZero();
        out.basis.middleRows(start, count).setZero();
    };
    for (Index p = 0; p < npts; ++p) {
        if (!classes.shape) zero_rows(7 * p, 3);
        if (!classes.pose) zero_rows(7 * p + 3, 3);
        if (!classes.intensity) zero_rows(7 * p + 6, 1);
    }
    if (!classes.pose && model.sr_dim() > 0) zero_rows(model.point_dim(), model.sr_dim());
    reorthonormalize(out);
    out.validate();
    return out;
}

DmfcGpm posterior(const DmfcGpm& model, const std::vector<PointObservation>& observations,
                  double sigma2) {
    if (sigma2 <= 0) throw NumericalError("posterior: noise variance must be positive");
    if (observations.empty()) return model;

    std::vector<Index> comps;
    std::vector<double> values;
    for (const auto& o : observations) {
        if (o.point < 0 || o.point >= model.reference->domain_size())
            throw DataError("posterior: observation point out of range");
        for (int c = 0; c < 7; ++c)
            if (o.mask[c]) {
                comps.push_back(7 * o.point + c);
                values.push_back(o.value[c]);
            }
    }
    if (comps.empty()) return model;

    const Index q = static_cast<Index>(comps.size());
    const Index M = model.rank();
    const VecX sqrt_l = model.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    MatX a_obs(q, M);
    VecX residual(q);
    for (Index r = 0; r < q; ++r) {
        a_obs.row(r) = model.basis.row(comps[r]).cwiseProduct(sqrt_l.transpose());
        residual[r] = values[r] - model.mean[comps[r]];
    }

    MatX c = MatX::Identity(M, M) + a_obs.transpose() * a_obs / sigma2;
    Eigen::LDLT<MatX> solver(c);
    if (solver.info() != Eigen::Success)
        throw NumericalError("posterior: singular observation system");
    const MatX sigma_theta = solver.solve(MatX::Identity(M, M));
    const VecX mu_theta = sigma_theta * (a_obs.transpose() * residual) / sigma2;

    DmfcGpm out = model;
    out.mean = model.mean + model.basis * sqrt_l.cwiseProduct(mu_theta);

    // re-diagonalize: B = diag(sqrt_l) Sigma_theta diag(sqrt_l)
    MatX b = sqrt_l.asDiagonal() * sigma_theta * sqrt_l.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (b + b.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("posterior: eigensolver failed");
    const VecX nu = eig.eigenvalues().reverse();
    const MatX e = eig.eigenvectors().rowwise().reverse();
    out.eigenvalues = nu.cwiseMax(0.0);
    out.basis = model.basis * e;
    apply_sign_convention(out.basis);
    out.validate();
    return out;
}

TrainingSet permute_poses(const TrainingSet& ts, std::optional<double> similarity_threshold) {
    if (ts.n() < 1) throw DataError("permute_poses: empty training set");
    const Index n = ts.n();
    const Index npts = ts.reference->domain_size();
    TrainingSet out;
    out.reference = ts.reference;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (similarity_threshold) {
                const double rms = std::sqrt(
                    (ts.fields[i].shape - ts.fields[j].shape).squaredNorm() / npts);
                if (rms > *similarity_threshold) continue;
            }
            FeatureField f = ts.fields[i];
            f.pose = ts.fields[j].pose;
            out.fields.push_back(std::move(f));
            out.poses.push_back(ts.poses.empty() ? std::vector<RigidTransform>{} : ts.poses[j]);
        }
    return out;
}

VecX variance_explained(const DmfcGpm& model) {
    const double total = model.eigenvalues.sum();
    if (total <= 0) throw NumericalError("variance_explained: zero total variance");
    return model.eigenvalues / total;
}

Eigen::Matrix<double, 7, 7> kernel_block(const DmfcGpm& model, Index x, Index y) {
    Eigen::Matrix<double, 7, 7> k = Eigen::Matrix<double, 7, 7>::Zero();
    for (Index m = 0; m < model.rank(); ++m)
        k += model.eigenvalues[m] * model.basis.block<7, 1>(7 * x, m) *
             model.basis.block<7, 1>(7 * y, m).transpose();
    return k;
}

VecX pointwise_variance(const DmfcGpm& model) {
    return (model.basis.array().square().rowwise() *
            model.eigenvalues.transpose().array())
        .rowwise()
        .sum();
}

}  // namespace dmfc
