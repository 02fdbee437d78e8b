#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace osl;

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

TEST(ReplicationSeed, DeterministicAndDistinct) {
    EXPECT_EQ(replication_seed(1, 500, 3), replication_seed(1, 500, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t n : {500, 1000})
        for (std::uint64_t r = 0; r < 100; ++r) seen.insert(replication_seed(7, n, r));
    EXPECT_EQ(seen.size(), 200u);
    EXPECT_NE(replication_seed(1, 500, 3), replication_seed(2, 500, 3));
}

TEST(SlopeFit, ExactLine) {
    std::vector<std::pair<double, double>> pts;
    for (double x : {0.0, 1.0, 2.5, 4.0}) pts.emplace_back(x, -x + 2.0);
    const auto f = slope_fit(pts);
    EXPECT_NEAR(f.slope, -1.0, 1e-14);
    EXPECT_NEAR(f.intercept, 2.0, 1e-14);
    EXPECT_NEAR(f.stderr_slope, 0.0, 1e-12);
}

TEST(SlopeFit, NoisyLineMatchesClosedFormOls) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<std::pair<double, double>> pts;
    Matrix x(6, 2);
    Vector y(6);
    for (int k = 0; k < 6; ++k) {
        const double xv = std::log(500.0 * std::pow(2.0, k));
        pts.emplace_back(xv, -0.6 * xv + noise(rng));
        x(k, 0) = 1.0;
        x(k, 1) = xv;
        y[k] = pts.back().second;
    }
    const auto f = slope_fit(pts);
    const Vector beta = x.colPivHouseholderQr().solve(y);
    EXPECT_NEAR(f.slope, beta[1], 1e-10);
    EXPECT_NEAR(f.intercept, beta[0], 1e-9);
    EXPECT_GE(f.slope, -0.65);
    EXPECT_LE(f.slope, -0.55);
    const Vector resid = y - x * beta;
    const double sxx = (x.col(1).array() - x.col(1).mean()).square().sum();
    EXPECT_NEAR(f.stderr_slope, std::sqrt(resid.squaredNorm() / 4.0 / sxx), 1e-12);
}

TEST(SlopeFit, Contracts) {
    EXPECT_THROW((void)slope_fit({{0, 1}, {1, 2}}), ContractViolation);
    EXPECT_THROW((void)slope_fit({{0, 1}, {1, 2}, {1, 3}}), ContractViolation);
}

TEST(RunOsl, PlmOracleMatchesNormalEquationsOnFirstHalf) {
    const auto dgp = PlmDgp::make_default(5);
    const Index n = 1000;
    const OslContext ctx(ModelKind::plm, dgp, NuisanceMode::oracle());
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const OslRun run = run_osl(ctx, n, seed);
        const SampleBatch d1 = sample(dgp, 2 * n, seed).slice(0, n);
        const RowMatrix gv = dgp.reduced_form_nuisance().evaluate_all(d1.covariates());
        const Matrix r = d1.targets() - gv.rightCols(5);
        const Vector ls = (r.transpose() * r).llt().solve(r.transpose() * (d1.outcomes() - gv.col(0)));
        EXPECT_LT((run.theta_hat - ls).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_EQ(run.nuisance_distance, 0.0);
    }
}

TEST(RunOsl, ExcessRiskCodePathsAgree) {
    auto dgp = PlmDgp::make_default(5);
    dgp.oracle_draws = 20000;
    const OslContext ctx(ModelKind::plm, dgp, NuisanceMode::corrupted(1.0, 0.3));
    const NuisanceFn g0 = ctx.model->true_nuisance();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const OslRun run = run_osl(ctx, 500, seed);
        const double pop = ctx.model->population_risk(run.theta_hat, g0) - ctx.model->population_risk(dgp.theta0, g0);
        EXPECT_NEAR(run.excess_risk, pop, 1e-10);
        EXPECT_EQ(run.excess_risk, plm_excess_risk(dgp, run.theta_hat));
    }
}

TEST(RunOsl, CorruptedDistanceIsAmplitude) {
    const auto dgp = PlmDgp::make_default(3);
    const NuisanceMode mode = NuisanceMode::corrupted(1.0, 0.3, 5);
    for (Index n : {500, 4000}) {
        const OslRun run = run_osl(ModelKind::plm, dgp, n, mode, 9);
        const double amp = std::pow(static_cast<double>(n), -0.3);
        EXPECT_LE(run.nuisance_distance, amp * (1 + 1e-12));
        EXPECT_GE(run.nuisance_distance, 0.9 * amp);
    }
}

TEST(RunOsl, OracleRiskShrinksWithN) {
    auto dgp = PlmDgp::make_default(5);
    dgp.oracle_draws = 1000;
    const OslContext ctx(ModelKind::plm, dgp, NuisanceMode::oracle());
    std::vector<double> small, large;
    for (std::uint64_t r = 0; r < 50; ++r) {
        small.push_back(run_osl(ctx, 500, replication_seed(3, 500, r)).excess_risk);
        large.push_back(run_osl(ctx, 8000, replication_seed(3, 8000, r)).excess_risk);
    }
    EXPECT_LT(median(large), median(small));
}

TEST(RunOsl, FittedModeEndToEnd) {
    auto pdgp = PlmDgp::make_default(3);
    pdgp.oracle_draws = 1000;
    const OslRun p = run_osl(ModelKind::plm, pdgp, 4000, NuisanceMode::fitted(), 5);
    EXPECT_LT(p.excess_risk, 0.02);
    EXPECT_GT(p.nuisance_distance, 0.0);
    EXPECT_LT(p.nuisance_distance, 0.3);

    auto ldgp = LogitDgp::make_default(2);
    ldgp.oracle_draws = 20000;
    const OslRun l = run_osl(ModelKind::logit, ldgp, 4000, NuisanceMode::fitted(), 6);
    EXPECT_LT(l.excess_risk, 0.02);
    EXPECT_GE(l.excess_risk, -1e-12);
}

TEST(RunOsl, Contracts) {
    const auto dgp = PlmDgp::make_default(2);
    const OslContext ctx(ModelKind::plm, dgp, NuisanceMode::oracle());
    EXPECT_THROW((void)run_osl(ctx, 501, 1), ContractViolation);
    EXPECT_THROW((void)OslContext(ModelKind::logit, dgp, NuisanceMode::oracle()), ContractViolation);
    EXPECT_THROW((void)OslContext(ModelKind::plm_nonorth, dgp, NuisanceMode::fitted()), ContractViolation);
}

TEST(RunOsl, SolverFailureCarriesContext) {
    const auto dgp = PlmDgp::make_default(5);
    const OslContext ctx(ModelKind::plm, dgp, NuisanceMode::oracle());
    try {
        (void)run_osl(ctx, 2, 17);
        FAIL() << "expected NumericDomainError";
    } catch (const NumericDomainError& e) {
        EXPECT_NE(std::string(e.what()).find("n=2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("seed=17"), std::string::npos);
    }
}

TEST(RateSweep, DeterministicAcrossThreadCounts) {
    SweepConfig cfg;
    auto dgp = PlmDgp::make_default(3);
    dgp.oracle_draws = 1000;
    cfg.dgp = dgp;
    cfg.n_grid = {200, 400, 800};
    cfg.replications = 8;
    cfg.nuisance_mode = NuisanceMode::corrupted(1.0, 0.3);
    const SweepResult a = rate_sweep(cfg, 1);
    const SweepResult b = rate_sweep(cfg, 3);
    ASSERT_EQ(a.records.size(), 24u);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        EXPECT_EQ(a.records[k].n, b.records[k].n);
        EXPECT_EQ(a.records[k].rep, b.records[k].rep);
        EXPECT_EQ(a.records[k].excess_risk, b.records[k].excess_risk);
        EXPECT_EQ(a.records[k].nuisance_distance, b.records[k].nuisance_distance);
        EXPECT_GE(a.records[k].excess_risk, 0.0);
    }
    EXPECT_EQ(a.mean_fit.slope, b.mean_fit.slope);
}

TEST(RateSweep, FailuresAreCountedAndExcluded) {
    SweepConfig cfg;
    cfg.model_kind = ModelKind::logit;
    auto dgp = LogitDgp::make_default(1, 1);
    dgp.oracle_draws = 1000;
    cfg.dgp = dgp;
    // separable draws push theta to infinity, which takes far more than 8 steps
    cfg.n_grid = {2, 4, 6};
    cfg.replications = 20;
    cfg.solver.max_iterations = 8;
    cfg.max_failure_fraction = 1.0;
    const SweepResult r = rate_sweep(cfg, 1);
    EXPECT_GT(r.failures.size(), 0u);
    EXPECT_GT(r.records.size(), 0u);
    EXPECT_EQ(r.records.size() + r.failures.size(), 60u);

    cfg.max_failure_fraction = 0.05;
    EXPECT_THROW((void)rate_sweep(cfg, 1), NumericDomainError);
}

TEST(RateSweep, ConfigValidation) {
    SweepConfig cfg;
    cfg.replications = 0;
    EXPECT_THROW((void)rate_sweep(cfg, 1), ContractViolation);
    cfg = {};
    cfg.n_grid = {500, 501};
    EXPECT_THROW((void)rate_sweep(cfg, 1), ContractViolation);
    cfg = {};
    cfg.n_grid = {1000, 500};
    EXPECT_THROW((void)rate_sweep(cfg, 1), ContractViolation);
}

TEST(RateSweep, OracleRiskTracksEffectiveDimensionOverN) {
    SweepConfig cfg;
    auto dgp = PlmDgp::make_default(5, 2, 7, 1.0);
    dgp.oracle_draws = 1000;
    cfg.dgp = dgp;
    cfg.replications = 100;
    const SweepResult r = rate_sweep(cfg, 1);
    const double dstar = effective_dimension_estimate(ModelKind::plm, cfg.dgp, 100000, 3);
    const auto& last = r.levels.back();
    const double c = last.mean_excess_risk * static_cast<double>(last.n) / dstar;
    for (const auto& lv : r.levels) {
        const double shape = c * dstar / static_cast<double>(lv.n);
        EXPECT_LT(lv.mean_excess_risk, 3.0 * shape) << lv.n;
        EXPECT_GT(lv.mean_excess_risk, shape / 3.0) << lv.n;
    }
    EXPECT_GE(r.mean_fit.slope, -1.25);
    EXPECT_LE(r.mean_fit.slope, -0.75);
}

TEST(EffectiveDimensionEstimate, PlmMatchesMoments) {
    for (double sv : {0.6, 1.0, std::sqrt(0.5)}) {
        const auto dgp = PlmDgp::make_default(4, 2, 7, sv);
        // G* = 4 sigma_v^2 Sigma_u and H* = 2 Sigma_u
        const double exact = 2.0 * sv * sv * 4.0;
        const double a = effective_dimension_estimate(ModelKind::plm, dgp, 100000, 1);
        const double b = effective_dimension_estimate(ModelKind::plm, dgp, 200000, 2);
        EXPECT_NEAR(a, exact, 0.1 * exact);
        EXPECT_LT(std::abs(b - a) / a, 0.05);
    }
}

TEST(EffectiveDimensionEstimate, LogisticMatchesPopulation) {
    auto dgp = LogitDgp::make_default(3);
    dgp.oracle_draws = 100000;
    const LogisticModel m(dgp);
    const double pop = effective_dimension(m.population_score_cov(dgp.theta0, m.true_nuisance()),
                                           m.population_hessian(dgp.theta0, m.true_nuisance()));
    EXPECT_NEAR(effective_dimension_estimate(ModelKind::logit, dgp, 100000, 5), pop, 0.1 * pop);
}

TEST(EffectiveDimensionEstimate, NearSingularSigmaU) {
    auto dgp = PlmDgp::make_default(2);
    dgp.sigma_u << 1, 1, 1, 1 + 1e-15;
    EXPECT_THROW((void)effective_dimension_estimate(ModelKind::plm, dgp, 1000, 1), NumericDomainError);
}

TEST(Io, CsvFormattingIsLocaleFree) {
    std::ostringstream os;
    io::write_records_csv(os, {{500, 0, 0.125, 1e-300, 3}});
    EXPECT_EQ(os.str(), "n,rep,excess_risk,nuisance_distance,iterations\n500,0,0.125,1e-300,3\n");
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(-2.5e10), "-2.5e+10");
}
