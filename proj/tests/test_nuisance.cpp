#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace osl;
using osl::testing::constant_nuisance;
using osl::testing::vec;

TEST(SupNorm, IdenticalIsZero) {
    const auto dgp = PlmDgp::make_default(2);
    const RowMatrix probes = covariate_probes(2, 1000, 1);
    EXPECT_EQ(sup_norm_distance(dgp.reduced_form_nuisance(), dgp.reduced_form_nuisance(), probes), 0.0);
}

TEST(SupNorm, CombinedPlmNorm) {
    const RowMatrix probes = covariate_probes(1, 10, 1);
    const NuisanceFn a = constant_nuisance(vec({3, 4, 0, 0}));
    EXPECT_DOUBLE_EQ(sup_norm_distance(a, NuisanceFn::zero(4), probes), 5.0);
}

TEST(SupNorm, MonotoneInProbeSet) {
    const auto dgp = PlmDgp::make_default(2);
    const NuisanceFn g = corrupt_oracle(dgp.reduced_form_nuisance(), 0.5, 3, 2);
    const RowMatrix small = covariate_probes(2, 100, 4);
    RowMatrix big(600, 2);
    big.topRows(100) = small;
    big.bottomRows(500) = covariate_probes(2, 500, 5);
    EXPECT_GE(sup_norm_distance(g, dgp.reduced_form_nuisance(), big),
              sup_norm_distance(g, dgp.reduced_form_nuisance(), small));
}

TEST(CorruptOracle, ZeroAmplitudeIsIdentity) {
    const auto dgp = PlmDgp::make_default(3);
    const RowMatrix probes = covariate_probes(2, 500, 1);
    const NuisanceFn g0 = dgp.reduced_form_nuisance();
    EXPECT_EQ(corrupt_oracle(g0, 0.0, 9, 2).evaluate_all(probes), g0.evaluate_all(probes));
}

TEST(CorruptOracle, DistanceEqualsAmplitude) {
    const auto dgp = PlmDgp::make_default(3);
    const RowMatrix probes = covariate_probes(2, 10000, 2);
    const NuisanceFn g0 = dgp.reduced_form_nuisance();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double dist = sup_norm_distance(corrupt_oracle(g0, 0.3, seed, 2), g0, probes);
        EXPECT_GE(dist, 0.27);
        EXPECT_LE(dist, 0.3 + 1e-12);
    }
}

TEST(CorruptOracle, LinearInAmplitude) {
    const auto dgp = LogitDgp::make_default(2);
    const RowMatrix probes = covariate_probes(2, 2000, 3);
    const NuisanceFn g0 = dgp.true_nuisance();
    const RowMatrix base = g0.evaluate_all(probes);
    const RowMatrix d1 = corrupt_oracle(g0, 0.1, 4, 2).evaluate_all(probes) - base;
    const RowMatrix d2 = corrupt_oracle(g0, 0.2, 4, 2).evaluate_all(probes) - base;
    EXPECT_LT((d2 - 2.0 * d1).cwiseAbs().maxCoeff(), 1e-14);
    const double s1 = sup_norm_distance(corrupt_oracle(g0, 0.1, 4, 2), g0, probes);
    const double s2 = sup_norm_distance(corrupt_oracle(g0, 0.2, 4, 2), g0, probes);
    EXPECT_NEAR(s2, 2.0 * s1, 1e-14);
}

TEST(CorruptOracle, NegativeAmplitudeRejected) {
    EXPECT_THROW((void)corrupt_oracle(NuisanceFn::zero(1), -0.1, 1, 1), ContractViolation);
}

TEST(NuisanceFn, EvaluationIsPure) {
    const auto dgp = PlmDgp::make_default(3);
    const NuisanceFn g = corrupt_oracle(dgp.reduced_form_nuisance(), 0.2, 3, 2);
    const RowMatrix probes = covariate_probes(2, 100, 8);
    EXPECT_EQ(g.evaluate_all(probes), g.evaluate_all(probes));
}

TEST(FitFirstStage, PlmRecoversNuisanceInBasisSpan) {
    // the sup-norm error scales with the noise in D and Y; halve both
    auto dgp = PlmDgp::make_default(3, 2, 7, 0.5);
    dgp.sigma_u *= 0.25;
    NuisanceConfig cfg;
    cfg.degree = dgp.trig_degree;
    const NuisanceFn g = fit_first_stage(ModelKind::plm, sample(dgp, 10000, 3), cfg);
    EXPECT_EQ(g.kind(), NuisanceFn::Kind::fitted);
    EXPECT_LE(sup_norm_distance(g, dgp.reduced_form_nuisance(), covariate_probes(2, 10000, 4)), 0.05);
}

TEST(FitFirstStage, UnderdeterminedWithoutRidgeIsNumericError) {
    const auto dgp = PlmDgp::make_default(2);
    NuisanceConfig cfg;
    cfg.basis = BasisKind::polynomial;
    cfg.degree = 10;
    cfg.ridge_penalty = 0.0;
    try {
        (void)fit_first_stage(ModelKind::plm, sample(dgp, 10, 1), cfg);
        FAIL() << "expected NumericDomainError";
    } catch (const NumericDomainError& e) {
        EXPECT_NE(std::string(e.what()).find("ridge_penalty > 0"), std::string::npos);
    }
}

TEST(FitFirstStage, Deterministic) {
    const auto dgp = LogitDgp::make_default(2);
    const SampleBatch b = sample(dgp, 3000, 5);
    const RowMatrix probes = covariate_probes(2, 500, 6);
    const NuisanceConfig cfg;
    EXPECT_EQ(fit_first_stage(ModelKind::logit, b, cfg).evaluate_all(probes),
              fit_first_stage(ModelKind::logit, b, cfg).evaluate_all(probes));
}

TEST(FitFirstStage, ErrorShrinksWithSampleSize) {
    for (const ModelKind kind : {ModelKind::plm, ModelKind::logit}) {
        const Dgp dgp = kind == ModelKind::plm ? Dgp(PlmDgp::make_default(3)) : Dgp(LogitDgp::make_default(2));
        const NuisanceFn g0 = true_nuisance_of(kind, dgp);
        const RowMatrix probes = covariate_probes(2, 10000, 7);
        double err[3] = {0, 0, 0};
        const Index sizes[3] = {500, 2000, 8000};
        for (int k = 0; k < 3; ++k)
            for (std::uint64_t s = 0; s < 20; ++s)
                err[k] += sup_norm_distance(fit_first_stage(kind, draw(dgp, sizes[k], 100 + s), {}), g0, probes) / 20;
        EXPECT_LT(err[2], err[0]) << to_string(kind);
        EXPECT_LT(err[2], err[1]) << to_string(kind);
    }
}

TEST(FitFirstStage, NonOrthogonalPlmUnsupported) {
    const auto dgp = PlmDgp::make_default(2);
    EXPECT_THROW((void)fit_first_stage(ModelKind::plm_nonorth, sample(dgp, 100, 1), {}), UnsupportedOperation);
}

TEST(FeatureMap, TrigonometricLayoutAndPolynomialCount) {
    const FeatureMap trig(BasisKind::trigonometric, 2, 2);
    EXPECT_EQ(trig.size(), 9);
    const Vector x = vec({0.25, -0.5});
    Vector phi(9);
    trig.evaluate(LossModel::span_of(x), phi.data());
    const double pi = std::numbers::pi;
    const double expect[9] = {1.0,
                              std::sin(pi * 0.25), std::cos(pi * 0.25), std::sin(2 * pi * 0.25), std::cos(2 * pi * 0.25),
                              std::sin(-pi * 0.5), std::cos(-pi * 0.5), std::sin(-2 * pi * 0.5), std::cos(-2 * pi * 0.5)};
    for (int k = 0; k < 9; ++k) EXPECT_NEAR(phi[k], expect[k], 1e-15) << k;
    const FeatureMap poly(BasisKind::polynomial, 3, 2);
    EXPECT_EQ(poly.size(), 10);
}
