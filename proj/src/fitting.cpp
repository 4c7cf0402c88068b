#include "dmfc/fitting.hpp"

#include <cmath>
#include <future>

namespace dmfc {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double gaussian_loglik(double sq_residual_sum, Index count, double sigma) {
    return -0.5 * sq_residual_sum / (sigma * sigma) -
           0.5 * static_cast<double>(count) * (kLog2Pi + 2.0 * std::log(sigma));
}

double closest_sq_distance(const Points& set, const Vec3& p) {
    return (set.colwise() - p).colwise().squaredNorm().minCoeff();
}

std::vector<double> all_local_logliks(const JointInstance& instance, const Observation& obs) {
    std::vector<double> out;
    const Index nobj = static_cast<Index>(instance.tetras.size());
    for (Index j = 0; j < nobj; ++j) out.push_back(local_log_likelihood(instance, obs, j));
    return out;
}

}  // namespace

void Proposal::validate() const {
    if (components.empty()) throw DataError("Proposal: no components");
    double wsum = 0;
    for (const auto& c : components) {
        if (c.sigma <= 0) throw DataError("Proposal: step scale must be positive");
        if (c.weight < 0) throw DataError("Proposal: negative mixture weight");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw DataError("Proposal: mixture weights must sum to 1");
}

const Proposal::Component& Proposal::pick(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0;
    for (const auto& c : components) {
        acc += c.weight;
        if (u <= acc) return c;
    }
    return components.back();
}

VecX Proposal::step(const VecX& theta, Rng& rng) const {
    const Component& c = pick(rng);
    auto base = [&](Index m) {
        return coefficient_scales.size() ? coefficient_scales[m] : 1.0;
    };
    VecX out = theta;
    if (c.single_coordinate && theta.size() > 0) {
        const Index m = static_cast<Index>(rng.integer() % static_cast<std::uint64_t>(theta.size()));
        out[m] += c.sigma * base(m) * rng.normal();
    } else {
        for (Index m = 0; m < out.size(); ++m) out[m] += c.sigma * base(m) * rng.normal();
    }
    return out;
}

Proposal default_proposal(const DmfcGpm& model, double sigma_obs) {
    if (sigma_obs <= 0) throw DataError("default_proposal: sigma_obs must be positive");
    const Index n = model.reference->domain_size();
    const Index nobj = model.reference->object_count();

    Proposal p;
    p.coefficient_scales.resize(model.rank());
    for (Index m = 0; m < model.rank(); ++m) {
        // per-unit-theta RMS change of a predicted observation value: spatial
        // displacement (shape+pose move the read position; the rendered
        // distance field has unit gradient) plus the direct intensity offset
        double s2 = 0;
        for (Index q = 0; q < n; ++q) {
            const Vec3 move = model.basis.template block<3, 1>(7 * q, m) +
                              model.basis.template block<3, 1>(7 * q + 3, m);
            const double di = model.basis(7 * q + 6, m);
            s2 += move.squaredNorm() + di * di;
        }
        if (model.mode == PoseMode::Sr) {
            const double lever = 0.25 * model.reference->bounding_box().diagonal();
            for (Index j = 0; j < nobj; ++j) {
                const Index off = model.sr_offset(j);
                const double w = static_cast<double>(model.reference->object_domain_size(j));
                s2 += w * (lever * lever *
                               model.basis.col(m).segment(off, 3).squaredNorm() +
                           model.basis.col(m).segment(off + 3, 3).squaredNorm());
            }
        }
        const double sens =
            std::sqrt(std::max(model.eigenvalues[m], 1e-12) * s2 / static_cast<double>(n));
        // likelihood width of coordinate m over ~n residuals, capped at the
        // prior width
        p.coefficient_scales[m] =
            std::min(1.0, sigma_obs / (sens * std::sqrt(static_cast<double>(n)) + 1e-12));
    }
    const double global = 2.38 / std::sqrt(static_cast<double>(std::max<Index>(model.rank(), 1)));
    p.components = {{0.55, global, false},
                    {0.25, 1.0, true},
                    {0.10, 0.3 * global, false},
                    {0.10, 3.0, true}};
    return p;
}

Observation Observation::from_volume(Volume3 v, double sigma) {
    Observation o;
    o.mode = Mode::Volume;
    o.volume = std::move(v);
    o.sigma = sigma;
    o.validate();
    return o;
}

Observation Observation::from_surfaces(std::vector<Points> s, double sigma) {
    Observation o;
    o.mode = Mode::Surface;
    o.surfaces = std::move(s);
    o.sigma = sigma;
    o.validate();
    return o;
}

void Observation::validate() const {
    if (sigma <= 0) throw DataError("Observation: sigma must be positive");
    if (mode == Mode::Volume) volume.validate();
}

double local_log_likelihood(const JointInstance& instance, const Observation& obs, Index object) {
    if (object < 0 || object >= static_cast<Index>(instance.tetras.size()))
        throw DataError("local_log_likelihood: object index out of range");
    const auto& tet = instance.tetras[object];
    double sq = 0;
    Index count = 0;
    if (obs.mode == Observation::Mode::Volume) {
        for (Index p = 0; p < tet.vertex_count(); ++p) {
            const double observed = obs.volume.sample_nearest_or_background(tet.vertices.col(p));
            const double r = observed - tet.intensity[p];
            sq += r * r;
        }
        count = tet.vertex_count();
    } else {
        const auto& surf = instance.surfaces[object];
        const Points& target = obs.surfaces.at(static_cast<size_t>(object));
        if (target.cols() == 0) return 0.0;  // fully masked object
        for (Index p = 0; p < surf.vertex_count(); ++p)
            sq += closest_sq_distance(target, surf.vertices.col(p));
        for (Index p = 0; p < target.cols(); ++p)
            sq += closest_sq_distance(surf.vertices, target.col(p));
        count = surf.vertex_count() + target.cols();
    }
    return gaussian_loglik(sq, count, obs.sigma);
}

double local_log_likelihood(const DmfcGpm& model, const VecX& theta, const Observation& obs,
                            Index object) {
    return local_log_likelihood(sample(model, theta), obs, object);
}

double global_log_likelihood(const JointInstance& instance, const Observation& obs) {
    double sum = 0;
    for (Index j = 0; j < static_cast<Index>(instance.tetras.size()); ++j)
        sum += local_log_likelihood(instance, obs, j);
    return sum;
}

double global_log_likelihood(const DmfcGpm& model, const VecX& theta, const Observation& obs) {
    return global_log_likelihood(sample(model, theta), obs);
}

double log_prior(const VecX& theta) {
    return -0.5 * theta.squaredNorm() - 0.5 * theta.size() * kLog2Pi;
}

namespace {

struct CascadeOutcome {
    bool accepted;
    std::vector<bool> filter_pass;
    std::vector<double> proposed_locals;
    double proposed_global;
};

// Local filters in object order, then the global one; every filter uses the
// full standard-normal prior. The symmetric proposal ratio cancels.
CascadeOutcome run_cascade(const std::vector<double>& cur_locals, double cur_prior,
                           const std::vector<double>& prop_locals, double prop_prior, Rng& rng,
                           bool local_filters) {
    CascadeOutcome out;
    out.proposed_locals = prop_locals;
    out.proposed_global = 0;
    for (double l : prop_locals) out.proposed_global += l;
    double cur_global = 0;
    for (double l : cur_locals) cur_global += l;

    const Index nfilters = static_cast<Index>(cur_locals.size()) + 1;
    out.filter_pass.assign(nfilters, false);
    out.accepted = true;
    for (Index f = 0; f < nfilters; ++f) {
        const bool is_global = f + 1 == nfilters;
        if (!is_global && !local_filters) {
            out.filter_pass[f] = true;
            continue;
        }
        const double cur = is_global ? cur_global : cur_locals[f];
        const double prop = is_global ? out.proposed_global : prop_locals[f];
        const double log_alpha = (prop + prop_prior) - (cur + cur_prior);
        const bool pass = log_alpha >= 0.0 || rng.uniform() < std::exp(log_alpha);
        out.filter_pass[f] = pass;
        if (!pass) {
            out.accepted = false;
            break;
        }
    }
    return out;
}

}  // namespace

StepResult metropolis_step(const DmfcGpm& model, const Observation& obs, const Proposal& proposal,
                           const VecX& theta, Rng& rng, bool local_filters) {
    proposal.validate();
    const VecX proposed = proposal.step(theta, rng);

    const auto cur_locals = all_local_logliks(sample(model, theta), obs);
    const auto prop_locals = all_local_logliks(sample(model, proposed), obs);
    const auto outcome = run_cascade(cur_locals, log_prior(theta), prop_locals,
                                     log_prior(proposed), rng, local_filters);

    StepResult res;
    res.accepted = outcome.accepted;
    res.filter_pass = outcome.filter_pass;
    res.theta = outcome.accepted ? proposed : theta;
    return res;
}

Chain run_chain(const DmfcGpm& model, const Observation& obs, const Proposal& proposal,
                Index n_iterations, std::uint64_t seed, const VecX& theta0, bool local_filters) {
    if (n_iterations < 1) throw DataError("run_chain: n_iterations must be >= 1");
    proposal.validate();
    obs.validate();
    Rng rng(seed);

    VecX theta = theta0.size() ? theta0 : VecX::Zero(model.rank());
    if (theta.size() != model.rank()) throw DataError("run_chain: theta0 length mismatch");

    Chain chain;
    const Index nobj = model.reference->object_count();
    chain.acceptance_counts.assign(static_cast<size_t>(nobj) + 1, 0);
    chain.iterations = n_iterations;

    std::vector<double> cur_locals = all_local_logliks(sample(model, theta), obs);
    double cur_prior = log_prior(theta);

    for (Index it = 0; it < n_iterations; ++it) {
        const VecX proposed = proposal.step(theta, rng);

        const auto prop_locals = all_local_logliks(sample(model, proposed), obs);
        const double prop_prior = log_prior(proposed);
        const auto outcome =
            run_cascade(cur_locals, cur_prior, prop_locals, prop_prior, rng, local_filters);
        for (size_t f = 0; f < outcome.filter_pass.size(); ++f)
            if (outcome.filter_pass[f]) ++chain.acceptance_counts[f];
        if (outcome.accepted) {
            theta = proposed;
            cur_locals = prop_locals;
            cur_prior = prop_prior;
            chain.accepted.push_back({theta, outcome.proposed_global + prop_prior, it});
        }
    }
    return chain;
}

std::pair<VecX, JointInstance> best_sample(const DmfcGpm& model, const Chain& chain) {
    if (chain.accepted.empty()) throw DataError("best_sample: empty chain");
    size_t best = 0;
    for (size_t i = 1; i < chain.accepted.size(); ++i)
        if (chain.accepted[i].log_prob > chain.accepted[best].log_prob) best = i;
    return {chain.accepted[best].theta, sample(model, chain.accepted[best].theta)};
}

Chain run_chains(const DmfcGpm& model, const Observation& obs, const Proposal& proposal,
                 Index n_iterations, std::uint64_t seed, Index n_chains) {
    if (n_chains < 1) throw DataError("run_chains: n_chains must be >= 1");
    std::vector<std::future<Chain>> futures;
    for (Index c = 0; c < n_chains; ++c)
        futures.push_back(std::async(std::launch::async, [&, c] {
            return run_chain(model, obs, proposal, n_iterations,
                             seed + static_cast<std::uint64_t>(c));
        }));
    Chain merged;
    merged.acceptance_counts.assign(
        static_cast<size_t>(model.reference->object_count()) + 1, 0);
    for (auto& fut : futures) {
        Chain ch = fut.get();
        merged.iterations += ch.iterations;
        for (size_t f = 0; f < ch.acceptance_counts.size(); ++f)
            merged.acceptance_counts[f] += ch.acceptance_counts[f];
        merged.accepted.insert(merged.accepted.end(), ch.accepted.begin(), ch.accepted.end());
    }
    return merged;
}

}  // namespace dmfc
