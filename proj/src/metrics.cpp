#include "dmfc/metrics.hpp"

#include <cmath>

namespace dmfc {

double pearson(const VecX& a, const VecX& b) {
    if (a.size() != b.size()) throw DataError("pearson: length mismatch");
    if (a.size() < 3) throw DataError("pearson: need at least 3 samples");
    const VecX da = a.array() - a.mean();
    const VecX db = b.array() - b.mean();
    const double va = da.squaredNorm(), vb = db.squaredNorm();
    if (va <= 0 || vb <= 0) throw NumericalError("pearson: zero variance");
    return std::clamp(da.dot(db) / std::sqrt(va * vb), -1.0, 1.0);
}

namespace {

double directed_rms(const Points& from, const Points& to) {
    double sq = 0;
    for (Index i = 0; i < from.cols(); ++i)
        sq += (to.colwise() - Vec3(from.col(i))).colwise().squaredNorm().minCoeff();
    return std::sqrt(sq / from.cols());
}

double directed_max(const Points& from, const Points& to) {
    double worst = 0;
    for (Index i = 0; i < from.cols(); ++i) {
        const double d = (to.colwise() - Vec3(from.col(i))).colwise().squaredNorm().minCoeff();
        worst = std::max(worst, d);
    }
    return std::sqrt(worst);
}

}  // namespace

double rms_surface_distance(const TriMesh& a, const TriMesh& b) {
    if (a.vertex_count() == 0 || b.vertex_count() == 0)
        throw DataError("rms_surface_distance: empty mesh");
    return 0.5 * (directed_rms(a.vertices, b.vertices) + directed_rms(b.vertices, a.vertices));
}

double hausdorff(const TriMesh& a, const TriMesh& b) {
    if (a.vertex_count() == 0 || b.vertex_count() == 0) throw DataError("hausdorff: empty mesh");
    return std::max(directed_max(a.vertices, b.vertices), directed_max(b.vertices, a.vertices));
}

JointQuantities extract_quantities(const std::vector<TetMesh>& tetras,
                                   const std::vector<RigidTransform>& poses,
                                   const std::vector<LollipopLandmarks>& landmarks) {
    if (tetras.size() != landmarks.size() || poses.size() != tetras.size())
        throw DataError("extract_quantities: per-object inputs mismatch");
    JointQuantities q;
    for (size_t j = 0; j < tetras.size(); ++j) {
        const auto& lm = landmarks[j];
        const auto& t = tetras[j];
        q.axis_length.push_back((t.vertices.col(lm.north) - t.vertices.col(lm.south)).norm());
        q.landmark_intensity.push_back(0.5 * (t.intensity[lm.north] + t.intensity[lm.south]));
        q.pose_angle.push_back(planar_angle_yz(poses[j].rotation));
    }
    return q;
}

CorrelationTable correlation_table(const std::vector<JointQuantities>& quantities) {
    const Index n = static_cast<Index>(quantities.size());
    if (n < 3) throw DataError("correlation_table: need at least 3 joints");
    auto column = [&](auto getter) {
        VecX v(n);
        for (Index i = 0; i < n; ++i) v[i] = getter(quantities[static_cast<size_t>(i)]);
        return v;
    };
    const VecX r1 = column([](const JointQuantities& q) { return q.axis_length[0]; });
    const VecX r2 = column([](const JointQuantities& q) { return q.axis_length[1]; });
    const VecX r3 = column([](const JointQuantities& q) { return q.axis_length[2]; });
    const VecX d1 = column([](const JointQuantities& q) { return q.landmark_intensity[0]; });
    const VecX d2 = column([](const JointQuantities& q) { return q.landmark_intensity[1]; });
    const VecX d3 = column([](const JointQuantities& q) { return q.landmark_intensity[2]; });
    const VecX a2 = column([](const JointQuantities& q) { return q.pose_angle[1]; });
    const VecX a3 = column([](const JointQuantities& q) { return q.pose_angle[2]; });

    CorrelationTable t;
    t.r1_d1 = std::abs(pearson(r1, d1));
    t.r2_d2 = std::abs(pearson(r2, d2));
    t.r3_d3 = std::abs(pearson(r3, d3));
    t.theta2_theta3 = std::abs(pearson(a2, a3));
    t.r1_r2 = std::abs(pearson(r1, r2));
    t.r2_r3 = std::abs(pearson(r2, r3));
    return t;
}

CorrelationTable correlation_report(const DmfcGpm& model, Index n_samples, std::uint64_t seed,
                                    const std::vector<LollipopLandmarks>& landmarks) {
    if (n_samples < 30) throw DataError("correlation_report: need at least 30 samples");
    Rng rng(seed);
    std::vector<JointQuantities> qs;
    qs.reserve(static_cast<size_t>(n_samples));
    for (Index i = 0; i < n_samples; ++i) {
        VecX theta(model.rank());
        for (Index m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
        qs.push_back(extract_quantities(sample(model, theta), landmarks));
    }
    return correlation_table(qs);
}

CorrelationTable training_correlations(const TrainingSet& ts, const std::vector<JointData>& data,
                                       const std::vector<LollipopLandmarks>& landmarks) {
    if (data.size() != static_cast<size_t>(ts.n()))
        throw DataError("training_correlations: sample count mismatch");
    std::vector<JointQuantities> qs;
    for (size_t i = 0; i < data.size(); ++i) {
        std::vector<TetMesh> tetras;
        for (Index j = 0; j < ts.reference->object_count(); ++j) {
            TetMesh t;
            t.vertices = data[i].vertices[j];
            t.intensity = data[i].intensity[j];
            tetras.push_back(std::move(t));
        }
        qs.push_back(extract_quantities(tetras, ts.poses[i], landmarks));
    }
    return correlation_table(qs);
}

double intensity_rms(const JointInstance& inst, Index object, const Volume3& vol) {
    const auto& tet = inst.tetras[object];
    double sq = 0;
    for (Index p = 0; p < tet.vertex_count(); ++p) {
        const double r =
            vol.sample_nearest_or_background(tet.vertices.col(p)) - tet.intensity[p];
        sq += r * r;
    }
    return std::sqrt(sq / tet.vertex_count());
}

std::vector<std::vector<double>> specificity(const DmfcGpm& model,
                                             const std::vector<Volume3>& held_in,
                                             Index n_samples, std::uint64_t seed) {
    const Index nobj = model.reference->object_count();
    std::vector<std::vector<double>> errors(static_cast<size_t>(nobj));
    if (n_samples == 0) return errors;
    if (held_in.empty()) throw DataError("specificity: no held-in observations");
    Rng rng(seed);
    for (Index i = 0; i < n_samples; ++i) {
        VecX theta(model.rank());
        for (Index m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
        const JointInstance inst = sample(model, theta);
        for (Index j = 0; j < nobj; ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& vol : held_in) best = std::min(best, intensity_rms(inst, j, vol));
            errors[static_cast<size_t>(j)].push_back(best);
        }
    }
    return errors;
}

std::vector<std::vector<double>> generality(const DmfcGpm& model,
                                            const std::vector<Volume3>& held_out,
                                            const GeneralityOptions& opts) {
    if (held_out.empty()) throw DataError("generality: no held-out observations");
    const Index nobj = model.reference->object_count();
    std::vector<std::vector<double>> errors(static_cast<size_t>(nobj));
    for (size_t v = 0; v < held_out.size(); ++v) {
        const auto& vol = held_out[v];
        double sigma = opts.sigma;
        if (sigma <= 0) {
            const double range = vol.voxels.maxCoeff() - vol.voxels.minCoeff();
            sigma = std::max(0.1 * range, 1e-6);
        }
        const Observation obs = Observation::from_volume(vol, sigma);
        const Proposal prop =
            opts.proposal ? *opts.proposal : default_proposal(model, sigma);
        const Chain chain =
            run_chains(model, obs, prop, opts.iterations, opts.seed + 1000 * v, opts.chains);
        const auto [theta, inst] = best_sample(model, chain);
        for (Index j = 0; j < nobj; ++j)
            errors[static_cast<size_t>(j)].push_back(intensity_rms(inst, j, vol));
    }
    return errors;
}

}  // namespace dmfc
