#include "dmfc/model.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <numeric>

using namespace dmfc;
using namespace dmfc::testing;

namespace {

// Eq.-6 style sample covariance in raw units over the stacked layout.
MatX dense_sample_covariance(const TrainingSet& ts, PoseMode mode) {
    const Index n = ts.n();
    std::vector<VecX> rows;
    for (Index i = 0; i < n; ++i)
        rows.push_back(stack_row(*ts.reference, mode, ts.fields[i],
                                 ts.poses.empty() ? nullptr : &ts.poses[i]));
    VecX mean = VecX::Zero(rows[0].size());
    for (const auto& r : rows) mean += r;
    mean /= static_cast<double>(n);
    MatX cov = MatX::Zero(rows[0].size(), rows[0].size());
    for (const auto& r : rows) cov += (r - mean) * (r - mean).transpose();
    return cov / static_cast<double>(n - 1);
}

MatX low_rank_covariance(const DmfcGpm& m) {
    return m.basis * m.eigenvalues.asDiagonal() * m.basis.transpose();
}

}  // namespace

TEST_CASE("assemble: identity and rigidly moved samples") {
    auto ref = make_toy_reference();
    JointData same;
    for (Index j = 0; j < ref->object_count(); ++j) {
        same.vertices.push_back(ref->objects[j].tetra.vertices);
        same.intensity.push_back(ref->objects[j].tetra.intensity);
    }
    Rng rng(21);
    const RigidTransform h = random_transform(rng, 1.0);
    JointData moved;
    for (Index j = 0; j < ref->object_count(); ++j) {
        moved.vertices.push_back(h(ref->objects[j].tetra.vertices));
        moved.intensity.push_back(ref->objects[j].tetra.intensity);
    }

    const TrainingSet ts = assemble_training_functions({same, moved}, ref);

    CHECK(ts.fields[0].shape.norm() < 1e-10);
    CHECK(ts.fields[0].pose.norm() < 1e-10);
    CHECK(ts.fields[0].intensity.norm() < 1e-12);

    CHECK(ts.fields[1].shape.norm() < 1e-8);
    CHECK(ts.fields[1].intensity.norm() < 1e-12);
    for (Index j = 0; j < ref->object_count(); ++j) {
        const Points& refpts = ref->objects[j].tetra.vertices;
        const RigidTransform align = procrustes_align(h(refpts), refpts);
        const Points expect = edr_log(align, refpts);
        CHECK((Points(ts.fields[1].pose_block(j)) - expect).norm() < 1e-8);
    }
}

TEST_CASE("assemble rejects correspondence mismatch") {
    auto ref = make_toy_reference();
    JointData bad;
    bad.vertices.push_back(ref->objects[0].tetra.vertices.leftCols(5));
    bad.intensity.push_back(VecX::Zero(5));
    bad.vertices.push_back(ref->objects[1].tetra.vertices);
    bad.intensity.push_back(ref->objects[1].tetra.intensity);
    CHECK_THROWS_AS(assemble_training_functions({bad}, ref), DataError);
}

TEST_CASE("build: rank-1 analytic case") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 2, 31);
    const TrainingSet ts = assemble_training_functions(samples, ref);
    const DmfcGpm model = build(ts, ClassWeights{1, 1, 1});

    REQUIRE(model.rank() == 1);
    // the single mode is proportional to the centred difference
    const VecX r0 = stack_row(*ref, PoseMode::Edr, ts.fields[0], nullptr);
    const VecX r1 = stack_row(*ref, PoseMode::Edr, ts.fields[1], nullptr);
    const VecX diff = (r0 - r1).normalized();
    const VecX phi = model.basis.col(0).normalized();
    CHECK(std::min((phi - diff).norm(), (phi + diff).norm()) < 1e-9);
    // mean splits the two samples
    CHECK((model.mean - 0.5 * (r0 + r1)).norm() < 1e-10);
}

TEST_CASE("build invariants: orthonormality, variance total, kernel oracle") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 8, 32);
    const TrainingSet ts = assemble_training_functions(samples, ref);
    const DmfcGpm model = build(ts);  // default weights

    const VecX w = model.weight_vector();
    MatX phi_w = model.basis;
    for (Index c = 0; c < phi_w.cols(); ++c) phi_w.col(c) = w.cwiseProduct(phi_w.col(c));
    const MatX gram = phi_w.transpose() * phi_w;
    CHECK((gram - MatX::Identity(model.rank(), model.rank())).norm() < 1e-8);

    // total weighted variance captured at full rank
    MatX rows(ts.n(), model.dim());
    for (Index i = 0; i < ts.n(); ++i)
        rows.row(i) = stack_row(*ref, PoseMode::Edr, ts.fields[i], nullptr).transpose();
    MatX centered = rows.rowwise() - model.mean.transpose();
    centered = centered.array().rowwise() * w.transpose().array();
    const double total = centered.squaredNorm() / (ts.n() - 1);
    CHECK(model.eigenvalues.sum() == doctest::Approx(total).epsilon(1e-6));

    // low-rank kernel equals the dense sample covariance blocks
    const MatX cov = dense_sample_covariance(ts, PoseMode::Edr);
    Rng rng(33);
    for (int rep = 0; rep < 10; ++rep) {
        const Index x = static_cast<Index>(rng.integer() % ref->domain_size());
        const Index y = static_cast<Index>(rng.integer() % ref->domain_size());
        const auto kb = kernel_block(model, x, y);
        const MatX expect = cov.block(7 * x, 7 * y, 7, 7);
        CHECK((kb - expect).norm() < 1e-8);
    }
}

TEST_CASE("build errors") {
    auto ref = make_toy_reference();
    const TrainingSet one = assemble_training_functions(make_toy_samples(ref, 1, 34), ref);
    CHECK_THROWS_AS(build(one), DataError);

    // zero variance: duplicate identical samples
    JointData same;
    for (Index j = 0; j < ref->object_count(); ++j) {
        same.vertices.push_back(ref->objects[j].tetra.vertices);
        same.intensity.push_back(ref->objects[j].tetra.intensity);
    }
    const TrainingSet dup = assemble_training_functions({same, same}, ref);
    CHECK_THROWS_AS(build(dup), NumericalError);
}

TEST_CASE("sample: theta 0 is the mean instance; projection roundtrip") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 7, 35);
    const TrainingSet ts = assemble_training_functions(samples, ref);
    const DmfcGpm model = build(ts);

    const JointInstance mean_inst = sample(model, VecX::Zero(0));
    // shape channel of the instance equals the mean field
    Index p = 0;
    for (Index j = 0; j < ref->object_count(); ++j)
        for (Index k = 0; k < ref->object_domain_size(j); ++k, ++p)
            CHECK((mean_inst.field.shape.col(p) -
                   Vec3(model.mean.segment(7 * p, 3))).norm() < 1e-12);
    // pose transform is the exp of the mean pose field
    for (Index j = 0; j < ref->object_count(); ++j) {
        const RigidTransform expect =
            edr_exp(mean_inst.field.pose_block(j), ref->objects[j].tetra.vertices);
        CHECK((mean_inst.poses[j].rotation - expect.rotation).norm() < 1e-12);
    }
    // intensity = reference + mean intensity field
    const VecX refint = ref->reference_intensity();
    p = 0;
    for (Index j = 0; j < ref->object_count(); ++j)
        for (Index k = 0; k < ref->object_domain_size(j); ++k, ++p)
            CHECK(mean_inst.tetras[j].intensity[k] ==
                  doctest::Approx(refint[p] + model.mean[7 * p + 6]).epsilon(1e-12));

    // projection roundtrip at full rank reproduces each training row
    for (Index i = 0; i < ts.n(); ++i) {
        const VecX row = stack_row(*ref, PoseMode::Edr, ts.fields[i], nullptr);
        const VecX back = decode(model, encode(model, row));
        CHECK((back - row).norm() <= 1e-6 * std::max(1.0, row.norm()));
    }

    CHECK_THROWS_AS(sample(model, VecX::Ones(model.rank() + 1)), DataError);
}

TEST_CASE("random_sample: determinism and standard-normal statistics") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 6, 36);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));

    const auto [t1, i1] = random_sample(model, 99);
    const auto [t2, i2] = random_sample(model, 99);
    CHECK((t1 - t2).norm() == 0.0);
    CHECK((i1.tetras[0].vertices - i2.tetras[0].vertices).norm() == 0.0);

    const Index reps = 100;
    MatX thetas(model.rank(), reps);
    for (Index r = 0; r < reps; ++r) thetas.col(r) = random_sample(model, 1000 + r).first;
    for (Index m = 0; m < model.rank(); ++m) {
        const double mean = thetas.row(m).mean();
        const double var = (thetas.row(m).array() - mean).square().sum() / (reps - 1);
        CHECK(std::abs(mean) < 0.35);
        CHECK(var > 0.5);
        CHECK(var < 1.6);
    }
}

TEST_CASE("sampled pose transforms stay in SE(3) at extreme coefficients") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 6, 37, 0.5, 0.1, 0.3);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));
    for (double v : {-5.0, 5.0}) {
        const JointInstance inst = sample(model, VecX::Constant(model.rank(), v));
        for (const auto& t : inst.poses) CHECK(t.is_valid(1e-9));
    }
}

TEST_CASE("marginalize_domain: full domain is a no-op") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 6, 38);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));
    std::vector<Index> all(static_cast<size_t>(ref->domain_size()));
    std::iota(all.begin(), all.end(), 0);
    const DmfcGpm marg = marginalize_domain(model, all);
    REQUIRE(marg.rank() == model.rank());
    CHECK((marg.eigenvalues - model.eigenvalues).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((marg.mean - model.mean).norm() < 1e-12);
    for (Index m = 0; m < model.rank(); ++m)
        CHECK((marg.basis.col(m) - model.basis.col(m)).norm() < 1e-7);
}

TEST_CASE("marginalize_domain: single-object restriction matches kernel restriction") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 8, 39);
    const TrainingSet ts = assemble_training_functions(samples, ref);
    const DmfcGpm model = build(ts, ClassWeights{1, 1, 1});

    std::vector<Index> obj0(static_cast<size_t>(ref->object_domain_size(0)));
    std::iota(obj0.begin(), obj0.end(), ref->object_offset(0));
    const DmfcGpm marg = marginalize_domain(model, obj0);

    CHECK(marg.reference->object_count() == 1);
    CHECK(marg.reference->objects[0].name == "a");
    CHECK(marg.reference->domain_size() == ref->object_domain_size(0));

    Rng rng(40);
    for (int rep = 0; rep < 10; ++rep) {
        const Index x = static_cast<Index>(rng.integer() % marg.reference->domain_size());
        const Index y = static_cast<Index>(rng.integer() % marg.reference->domain_size());
        const auto kb_restricted = kernel_block(marg, x, y);
        const auto kb_full = kernel_block(model, obj0[0] + x, obj0[0] + y);
        CHECK((kb_restricted - kb_full).norm() < 1e-8);
    }
    // restricted mean equals the mean restricted
    for (Index k = 0; k < marg.reference->domain_size(); ++k)
        CHECK((marg.mean.segment(7 * k, 7) - model.mean.segment(7 * (obj0[0] + k), 7)).norm() <
              1e-12);
}

TEST_CASE("marginal consistency: moments of restricted sampling agree") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 8, 41);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));

    std::vector<Index> subset;
    for (Index p = 0; p < ref->domain_size(); p += 3) subset.push_back(p);
    const DmfcGpm marg = marginalize_domain(model, subset);

    // exact second moments must match on the subset
    const MatX cov_full = low_rank_covariance(model);
    const MatX cov_marg = low_rank_covariance(marg);
    for (size_t a = 0; a < subset.size(); ++a)
        for (int c = 0; c < 7; ++c) {
            CHECK(marg.mean[7 * a + c] ==
                  doctest::Approx(model.mean[7 * subset[a] + c]).epsilon(1e-10));
            CHECK(cov_marg(7 * a + c, 7 * a + c) ==
                  doctest::Approx(cov_full(7 * subset[a] + c, 7 * subset[a] + c))
                      .epsilon(1e-8));
        }

    // ... and empirical moments from 500 draws agree within 3 standard errors
    const Index draws = 500;
    const Index d = marg.dim();
    VecX acc_full = VecX::Zero(d), acc_marg = VecX::Zero(d);
    VecX sq_full = VecX::Zero(d);
    for (Index i = 0; i < draws; ++i) {
        Rng ra(5000 + i), rb(9000 + i);
        VecX ta(model.rank()), tb(marg.rank());
        for (Index m = 0; m < ta.size(); ++m) ta[m] = ra.normal();
        for (Index m = 0; m < tb.size(); ++m) tb[m] = rb.normal();
        const VecX va = decode(model, ta);
        const VecX vb = decode(marg, tb);
        for (size_t a = 0; a < subset.size(); ++a)
            for (int c = 0; c < 7; ++c) {
                const double xa = va[7 * subset[a] + c];
                const double xb = vb[7 * static_cast<Index>(a) + c];
                acc_full[7 * a + c] += xa;
                acc_marg[7 * a + c] += xb;
                sq_full[7 * a + c] += xa * xa;
            }
    }
    int failures = 0;
    for (Index k = 0; k < d; ++k) {
        const double mean_f = acc_full[k] / draws, mean_m = acc_marg[k] / draws;
        const double var_f = sq_full[k] / draws - mean_f * mean_f;
        const double se = std::sqrt((var_f + cov_marg(k, k)) / draws) + 1e-12;
        if (std::abs(mean_f - mean_m) > 3 * se) ++failures;
    }
    // 3-sigma comparisons over ~200 components: allow a small tail
    CHECK(failures <= std::max<Index>(3, d / 100));
}

TEST_CASE("marginalize_class behaviour") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 8, 42);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));

    SUBCASE("all classes is a no-op") {
        const DmfcGpm m = marginalize_class(model, ClassSet::all());
        CHECK((m.eigenvalues - model.eigenvalues).cwiseAbs().maxCoeff() < 1e-9);
        for (Index c = 0; c < model.rank(); ++c)
            CHECK((m.basis.col(c) - model.basis.col(c)).norm() < 1e-7);
    }
    SUBCASE("shape-only model has constant pose") {
        const DmfcGpm m = marginalize_class(model, ClassSet{true, false, false});
        Rng rng(43);
        for (int rep = 0; rep < 5; ++rep) {
            VecX theta(m.rank());
            for (Index k = 0; k < theta.size(); ++k) theta[k] = rng.normal();
            const JointInstance inst = sample(m, theta);
            for (const auto& t : inst.poses) {
                CHECK((t.rotation - Mat3::Identity()).norm() < 1e-10);
                CHECK(t.translation.norm() < 1e-10);
            }
        }
    }
    SUBCASE("empty class set is an error") {
        CHECK_THROWS_AS(marginalize_class(model, ClassSet{}), DataError);
    }
}

TEST_CASE("posterior: prior returned without observations; contraction; limit") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 8, 44);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));

    const DmfcGpm same = posterior(model, {}, 0.5);
    CHECK((same.mean - model.mean).norm() == 0.0);

    CHECK_THROWS_AS(posterior(model, {}, 0.0), NumericalError);

    // single landmark: posterior mean moves toward the observation
    const Index pt = 4;
    Vec7 target = Vec7::Zero();
    target.head<3>() = Vec3(0.4, -0.2, 0.1);
    const auto obs = PointObservation::full(pt, target);

    const VecX prior_at = model.mean.segment(7 * pt, 7);
    double prev_res = (prior_at - target).norm();
    for (double s2 : {1.0, 1e-2, 1e-6, 1e-10}) {
        const DmfcGpm post = posterior(model, {obs}, s2);
        const double res = (post.mean.segment(7 * pt, 7) - target).norm();
        CHECK(res <= prev_res + 1e-12);
        prev_res = res;
    }
    const DmfcGpm tight = posterior(model, {obs}, 1e-12);
    CHECK((tight.mean.segment(7 * pt, 7) - target).norm() < 1e-4);

    // pointwise posterior variance never exceeds prior variance
    const DmfcGpm post = posterior(model, {obs}, 0.1);
    const VecX vprior = pointwise_variance(model);
    const VecX vpost = pointwise_variance(post);
    CHECK(((vpost - vprior).array() <= 1e-10).all());
}

TEST_CASE("posterior equals dense GP regression on the 30-point toy") {
    auto ref = make_toy_reference();
    REQUIRE(ref->domain_size() == 30);
    auto samples = make_toy_samples(ref, 9, 45);
    const TrainingSet ts = assemble_training_functions(samples, ref);
    const DmfcGpm model = build(ts, ClassWeights{1, 1, 1});

    // observations: full septuplet at one point, shape-only at another
    std::vector<PointObservation> obs;
    Vec7 v1;
    v1 << 0.2, -0.1, 0.05, 0.01, 0.0, -0.02, 0.3;
    obs.push_back(PointObservation::full(3, v1));
    PointObservation partial;
    partial.point = 17;
    partial.mask = {true, true, true, false, false, false, false};
    partial.value.head<3>() = Vec3(-0.3, 0.2, 0.1);
    obs.push_back(partial);
    const double sigma2 = 0.05;

    const DmfcGpm post = posterior(model, obs, sigma2);

    // dense route (Eqs. 16-18 style)
    const MatX k = dense_sample_covariance(ts, PoseMode::Edr);
    std::vector<Index> comps{7 * 3 + 0, 7 * 3 + 1, 7 * 3 + 2, 7 * 3 + 3,
                             7 * 3 + 4, 7 * 3 + 5, 7 * 3 + 6,
                             7 * 17 + 0, 7 * 17 + 1, 7 * 17 + 2};
    VecX y(10);
    y << v1, partial.value.head<3>();
    const Index q = 10;
    MatX koo(q, q);
    MatX kxo(model.dim(), q);
    VecX mean_o(q);
    for (Index a = 0; a < q; ++a) {
        mean_o[a] = model.mean[comps[a]];
        kxo.col(a) = k.col(comps[a]);
        for (Index b = 0; b < q; ++b) koo(a, b) = k(comps[a], comps[b]);
    }
    const MatX gain = kxo * (koo + sigma2 * MatX::Identity(q, q)).inverse();
    const VecX dense_mean = model.mean + gain * (y - mean_o);
    const MatX dense_cov = k - gain * kxo.transpose();

    CHECK((post.mean - dense_mean).cwiseAbs().maxCoeff() < 1e-8);
    const MatX post_cov = low_rank_covariance(post);
    CHECK((post_cov - dense_cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("posterior models remain closed under further operations") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 7, 46);
    const DmfcGpm model = build(assemble_training_functions(samples, ref));
    const DmfcGpm post =
        posterior(model, {PointObservation::full(2, Vec7::Ones() * 0.1)}, 0.2);

    // weighted-orthonormal basis again
    const VecX w = post.weight_vector();
    MatX phi_w = post.basis;
    for (Index c = 0; c < phi_w.cols(); ++c) phi_w.col(c) = w.cwiseProduct(phi_w.col(c));
    CHECK((phi_w.transpose() * phi_w - MatX::Identity(post.rank(), post.rank())).norm() < 1e-8);

    std::vector<Index> obj1(static_cast<size_t>(ref->object_domain_size(1)));
    std::iota(obj1.begin(), obj1.end(), ref->object_offset(1));
    CHECK_NOTHROW(marginalize_domain(post, obj1));
    CHECK_NOTHROW(posterior(post, {PointObservation::full(5, Vec7::Zero())}, 0.3));
}

TEST_CASE("permute_poses counts and threshold limits") {
    auto ref = make_toy_reference();
    auto samples = make_toy_samples(ref, 4, 47);
    const TrainingSet ts = assemble_training_functions(samples, ref);

    const TrainingSet full = permute_poses(ts);
    CHECK(full.n() == 16);

    const TrainingSet orig = permute_poses(ts, 0.0);
    CHECK(orig.n() == 4);
    for (Index i = 0; i < 4; ++i) {
        CHECK((orig.fields[i].shape - ts.fields[i].shape).norm() == 0.0);
        CHECK((orig.fields[i].pose - ts.fields[i].pose).norm() == 0.0);
    }

    TrainingSet single = assemble_training_functions(make_toy_samples(ref, 1, 48), ref);
    const TrainingSet p1 = permute_poses(single);
    CHECK(p1.n() == 1);
    CHECK((p1.fields[0].shape - single.fields[0].shape).norm() == 0.0);

    // permuted pairs carry shape/intensity of i and pose of j
    bool found_cross = false;
    for (Index idx = 0; idx < full.n(); ++idx) {
        const Index i = idx / 4, j = idx % 4;
        CHECK((full.fields[idx].shape - ts.fields[i].shape).norm() == 0.0);
        CHECK((full.fields[idx].intensity - ts.fields[i].intensity).norm() == 0.0);
        CHECK((full.fields[idx].pose - ts.fields[j].pose).norm() == 0.0);
        if (i != j) found_cross = true;
    }
    CHECK(found_cross);
}

TEST_CASE("variance_explained") {
    auto ref = make_toy_reference();
    const DmfcGpm rank1 = build(assemble_training_functions(make_toy_samples(ref, 2, 49), ref));
    const VecX v1 = variance_explained(rank1);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0] == doctest::Approx(1.0));

    const DmfcGpm model = build(assemble_training_functions(make_toy_samples(ref, 9, 50), ref));
    const VecX v = variance_explained(model);
    CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Index i = 0; i + 1 < v.size(); ++i) CHECK(v[i] >= v[i + 1] - 1e-15);

    // synthetic isotropic spectrum
    DmfcGpm iso = model;
    iso.eigenvalues = VecX::Constant(model.rank(), 0.25);
    const VecX vi = variance_explained(iso);
    for (Index i = 0; i < vi.size(); ++i)
        CHECK(vi[i] == doctest::Approx(1.0 / model.rank()).epsilon(1e-12));
}

TEST_CASE("rank selection") {
    auto ref = make_toy_reference();
    const TrainingSet ts = assemble_training_functions(make_toy_samples(ref, 9, 51), ref);

    const DmfcGpm fixed = build(ts, std::nullopt, RankSpec::fixed(3));
    CHECK(fixed.rank() == 3);

    const DmfcGpm full = build(ts);
    CHECK(full.rank() == 8);

    const DmfcGpm autom = build(ts, std::nullopt, RankSpec::auto_fraction());
    CHECK(autom.rank() >= 1);
    CHECK(autom.rank() <= 8);
    CHECK(autom.eigenvalues.sum() / full.eigenvalues.sum() >= 0.98 - 1e-9);
}
