#pragma once

#include "dmfc/fitting.hpp"
#include "dmfc/model.hpp"
#include "dmfc/synthetic.hpp"

#include <array>
#include <string>
#include <vector>

namespace dmfc {

// Sample Pearson correlation coefficient; both vectors need length >= 3 and
// nonzero variance.
double pearson(const VecX& a, const VecX& b);

// Symmetric RMS of vertex closest-point distances (average of the two
// directed RMS values).
double rms_surface_distance(const TriMesh& a, const TriMesh& b);

// Max over both directed max-min vertex distances.
double hausdorff(const TriMesh& a, const TriMesh& b);

// Per-object derived quantities of one joint: head major-axis length between
// the pole landmarks, mean intensity at the same landmarks, planar rotation
// angle of the pose transform.
struct JointQuantities {
    std::vector<double> axis_length;
    std::vector<double> landmark_intensity;
    std::vector<double> pose_angle;
};

JointQuantities extract_quantities(const std::vector<TetMesh>& tetras,
                                   const std::vector<RigidTransform>& poses,
                                   const std::vector<LollipopLandmarks>& landmarks);

inline JointQuantities extract_quantities(const JointInstance& inst,
                                          const std::vector<LollipopLandmarks>& landmarks) {
    return extract_quantities(inst.tetras, inst.poses, landmarks);
}

// |r| for the six reported pairs.
struct CorrelationTable {
    double r1_d1 = 0, r2_d2 = 0, r3_d3 = 0;
    double theta2_theta3 = 0;
    double r1_r2 = 0, r2_r3 = 0;

    std::array<double, 6> values() const {
        return {r1_d1, r2_d2, r3_d3, theta2_theta3, r1_r2, r2_r3};
    }
    static std::array<std::string, 6> names() {
        return {"r1_d1", "r2_d2", "r3_d3", "theta2_theta3", "r1_r2", "r2_r3"};
    }
};

CorrelationTable correlation_table(const std::vector<JointQuantities>& quantities);

// Draw n random instances from the model and correlate the derived
// quantities. Deterministic given the seed.
CorrelationTable correlation_report(const DmfcGpm& model, Index n_samples, std::uint64_t seed,
                                    const std::vector<LollipopLandmarks>& landmarks);

// The same extractor applied to the training samples (the "training row").
CorrelationTable training_correlations(const TrainingSet& ts, const std::vector<JointData>& data,
                                       const std::vector<LollipopLandmarks>& landmarks);

// Specificity: per random model sample and object, intensity-RMS distance to
// the nearest held-in volume.
std::vector<std::vector<double>> specificity(const DmfcGpm& model,
                                             const std::vector<Volume3>& held_in,
                                             Index n_samples, std::uint64_t seed);

struct GeneralityOptions {
    Index iterations = 2000;
    Index chains = 1;
    std::uint64_t seed = 0;
    double sigma = 0;  // <=0: 10% of each observed volume's dynamic range
    // empty coefficient_scales: use the spectrum-preconditioned default
    std::optional<Proposal> proposal;
};

// Generality: per held-out volume and object, the best-fit intensity RMS
// after an MCMC fit.
std::vector<std::vector<double>> generality(const DmfcGpm& model,
                                            const std::vector<Volume3>& held_out,
                                            const GeneralityOptions& opts);

// Intensity RMS between an instance's object and a volume.
double intensity_rms(const JointInstance& inst, Index object, const Volume3& vol);

}  // namespace dmfc
