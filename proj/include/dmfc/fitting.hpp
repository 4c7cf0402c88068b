#pragma once

#include "dmfc/model.hpp"
#include "dmfc/rng.hpp"
#include "dmfc/volume.hpp"

#include <vector>

namespace dmfc {

// Gaussian random-walk proposal: a mixture of diagonal-covariance step
// kinds. Per-coefficient base scales (Sigma_theta diagonal) multiply each
// component's sigma; a single_coordinate component perturbs one uniformly
// chosen coefficient, otherwise all coefficients step together. Both kinds
// are symmetric, so the Metropolis proposal ratio stays 1.
struct Proposal {
    struct Component {
        double weight;
        double sigma;
        bool single_coordinate = false;
    };
    std::vector<Component> components{{0.8, 0.05, false}, {0.2, 0.2, false}};
    VecX coefficient_scales;  // empty = unit scale for every coefficient

    void validate() const;
    const Component& pick(Rng& rng) const;
    // theta + one mixture draw
    VecX step(const VecX& theta, Rng& rng) const;
};

// Proposal preconditioned by the model spectrum: coefficient m steps at
// min(1, sigma_obs/sqrt(lambda_m)), i.e. roughly uniformly in predicted
// observation units, capped by the prior width. The mixture combines
// 2.38/sqrt(M)-scaled global moves with single-coordinate refinements.
Proposal default_proposal(const DmfcGpm& model, double sigma_obs);

// Fitting target: either an intensity volume or per-object surface point sets
// (possibly partial). sigma is the Gaussian likelihood scale.
struct Observation {
    enum class Mode { Volume, Surface };
    Mode mode = Mode::Volume;
    Volume3 volume;
    std::vector<Points> surfaces;
    double sigma = 1.0;

    static Observation from_volume(Volume3 v, double sigma);
    static Observation from_surfaces(std::vector<Points> s, double sigma);
    void validate() const;
};

// Per-point Gaussian log-density of the residuals of object j.
// Volume mode: instance intensity vs volume value at the posed point
// (background 0 outside the grid). Surface mode: symmetric closest-point
// distances between the instance surface and the target set.
double local_log_likelihood(const DmfcGpm& model, const VecX& theta, const Observation& obs,
                            Index object);
double local_log_likelihood(const JointInstance& instance, const Observation& obs, Index object);

double global_log_likelihood(const DmfcGpm& model, const VecX& theta, const Observation& obs);
double global_log_likelihood(const JointInstance& instance, const Observation& obs);

double log_prior(const VecX& theta);

struct StepResult {
    VecX theta;                     // state after the step
    bool accepted = false;          // proposal survived every filter
    std::vector<bool> filter_pass;  // local filters in object order, then global
};

// One Metropolis step through the filter cascade (local filters in object
// order, then the global one; symmetric proposal, standard-normal prior).
// local_filters=false keeps only the global decision (plain MH).
StepResult metropolis_step(const DmfcGpm& model, const Observation& obs, const Proposal& proposal,
                           const VecX& theta, Rng& rng, bool local_filters = true);

struct Chain {
    struct State {
        VecX theta;
        double log_prob;  // global log-likelihood + log prior
        Index iteration;  // iteration at which the state was accepted
    };
    std::vector<State> accepted;
    std::vector<Index> acceptance_counts;  // per filter
    Index iterations = 0;
};

Chain run_chain(const DmfcGpm& model, const Observation& obs, const Proposal& proposal,
                Index n_iterations, std::uint64_t seed, const VecX& theta0 = VecX(),
                bool local_filters = true);

// Chain state with the highest recorded log probability (earliest on ties).
std::pair<VecX, JointInstance> best_sample(const DmfcGpm& model, const Chain& chain);

// k independent chains (seeds seed..seed+k-1) run concurrently and merged in
// seed order; deterministic.
Chain run_chains(const DmfcGpm& model, const Observation& obs, const Proposal& proposal,
                 Index n_iterations, std::uint64_t seed, Index n_chains);

}  // namespace dmfc
