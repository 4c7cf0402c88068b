#include "dmfc/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace dmfc;
using namespace dmfc::testing;

TEST_CASE("pearson basics and invariances") {
    VecX a(5), b(5);
    a << 1, 2, 3, 4, 5;
    b = a;
    CHECK(pearson(a, b) == doctest::Approx(1.0));
    CHECK(pearson(a, VecX(-a)) == doctest::Approx(-1.0));

    Rng rng(71);
    VecX x(40), y(40);
    for (Index i = 0; i < 40; ++i) {
        x[i] = rng.normal();
        y[i] = 0.3 * x[i] + rng.normal();
    }
    const double r = pearson(x, y);
    CHECK(pearson(VecX(2.5 * x.array() + 7.0), VecX(0.1 * y.array() - 3.0)) ==
          doctest::Approx(r).epsilon(1e-12));

    CHECK_THROWS_AS(pearson(VecX::Ones(5), x.head(5)), NumericalError);
    CHECK_THROWS_AS(pearson(x.head(2), y.head(2)), DataError);
    CHECK_THROWS_AS(pearson(x.head(4), y.head(5)), DataError);
}

TEST_CASE("training span correlation r1 vs r2") {
    VecX r1(15), r2(15);
    for (int i = 1; i <= 15; ++i) {
        r1[i - 1] = i;
        r2[i - 1] = 31.0 - i;
    }
    CHECK(std::abs(pearson(r1, r2)) == doctest::Approx(1.0));
}

TEST_CASE("surface distances") {
    const LollipopMesh a = lollipop_mesh({8.0, 0});
    const LollipopMesh b = lollipop_mesh({9.0, 0});

    CHECK(rms_surface_distance(a.surface, a.surface) == doctest::Approx(0.0));
    CHECK(hausdorff(a.surface, a.surface) == doctest::Approx(0.0));

    // translation: hausdorff equals the shift, rms bounded by it
    TriMesh shifted = a.surface;
    shifted.vertices.colwise() += Vec3(0.5, -0.25, 1.0);
    const double t = Vec3(0.5, -0.25, 1.0).norm();
    CHECK(hausdorff(a.surface, shifted) == doctest::Approx(t).epsilon(1e-9));
    CHECK(rms_surface_distance(a.surface, shifted) <= t + 1e-12);

    // quadratic oracle on two different lollipops
    auto directed_rms_oracle = [](const Points& from, const Points& to) {
        double sq = 0;
        for (Index i = 0; i < from.cols(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < to.cols(); ++j)
                best = std::min(best, (from.col(i) - to.col(j)).squaredNorm());
            sq += best;
        }
        return std::sqrt(sq / from.cols());
    };
    const double oracle = 0.5 * (directed_rms_oracle(a.surface.vertices, b.surface.vertices) +
                                 directed_rms_oracle(b.surface.vertices, a.surface.vertices));
    CHECK(rms_surface_distance(a.surface, b.surface) == doctest::Approx(oracle).epsilon(1e-12));

    auto directed_max_oracle = [](const Points& from, const Points& to) {
        double worst = 0;
        for (Index i = 0; i < from.cols(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < to.cols(); ++j)
                best = std::min(best, (from.col(i) - to.col(j)).squaredNorm());
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    const double h_oracle = std::max(directed_max_oracle(a.surface.vertices, b.surface.vertices),
                                     directed_max_oracle(b.surface.vertices, a.surface.vertices));
    CHECK(hausdorff(a.surface, b.surface) == doctest::Approx(h_oracle).epsilon(1e-12));

    CHECK(rms_surface_distance(a.surface, b.surface) ==
          doctest::Approx(rms_surface_distance(b.surface, a.surface)));

    TriMesh empty;
    empty.vertices = Points(3, 0);
    CHECK_THROWS_AS(rms_surface_distance(empty, a.surface), DataError);
    CHECK_THROWS_AS(hausdorff(empty, a.surface), DataError);
}

TEST_CASE("quantity extraction on a synthetic joint") {
    JointSpec spec;
    spec.r1 = 6;
    spec.r2 = 25;
    spec.r3 = 11;
    spec.theta2 = 0.5;
    spec.theta3 = 0.2;
    spec.resolution = 0;
    const SyntheticJoint joint = generate_joint(spec);
    const auto q = extract_quantities(joint.tetras, joint.pose, lollipop_landmarks(0));
    CHECK(q.axis_length[0] == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(q.axis_length[1] == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(q.axis_length[2] == doctest::Approx(22.0).epsilon(1e-9));
    CHECK(q.landmark_intensity[0] == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(q.pose_angle[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(q.pose_angle[2] == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("correlation_report determinism and sample floor") {
    // small lollipop model with exact Eq. 24 intensities (no rendering)
    const int res = 0;
    auto ref = make_reference(res);
    std::vector<JointData> data;
    auto specs = paper_training_specs(res);
    specs.resize(20);
    for (const auto& s : specs) data.push_back(generate_joint(s).data());
    const DmfcGpm model = build(assemble_training_functions(data, ref));

    const auto lm = lollipop_landmarks(res);
    const CorrelationTable t1 = correlation_report(model, 40, 123, lm);
    const CorrelationTable t2 = correlation_report(model, 40, 123, lm);
    for (int k = 0; k < 6; ++k) CHECK(t1.values()[k] == t2.values()[k]);

    const CorrelationTable t3 = correlation_report(model, 40, 124, lm);
    bool any_diff = false;
    for (int k = 0; k < 6; ++k) any_diff |= t1.values()[k] != t3.values()[k];
    CHECK(any_diff);

    CHECK_THROWS_AS(correlation_report(model, 29, 1, lm), DataError);
}

TEST_CASE("specificity edge cases") {
    auto ref = make_toy_reference();
    const DmfcGpm model =
        build(assemble_training_functions(make_toy_samples(ref, 6, 72), ref));
    const auto empty = specificity(model, {}, 0, 1);
    CHECK(empty.size() == 2);
    CHECK(empty[0].empty());
    CHECK_THROWS_AS(specificity(model, {}, 5, 1), DataError);
}
