#ifndef OSL_EXPERIMENTS_HPP
#define OSL_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "osl/diagnostics.hpp"
#include "osl/losses.hpp"
#include "osl/nuisance.hpp"
#include "osl/solver.hpp"
#include "osl/stats.hpp"

namespace osl {

using Dgp = std::variant<PlmDgp, LogitDgp>;

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Replication seed: splitmix64(splitmix64(splitmix64(base) ^ n) ^ rep).
[[nodiscard]] constexpr std::uint64_t replication_seed(std::uint64_t base, std::uint64_t n, std::uint64_t rep) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ n) ^ rep);
}

struct NuisanceMode {
    enum class Kind { oracle, fitted, corrupted };
    Kind kind = Kind::oracle;
    double c = 1.0;
    double phi = 0.3;
    std::uint64_t direction_seed = 1;

    [[nodiscard]] static NuisanceMode oracle() { return {}; }
    [[nodiscard]] static NuisanceMode fitted() { return {Kind::fitted}; }
    [[nodiscard]] static NuisanceMode corrupted(double c, double phi, std::uint64_t direction_seed = 1) {
        return {Kind::corrupted, c, phi, direction_seed};
    }

    /// c * n^{-phi}
    [[nodiscard]] double amplitude(Index n) const { return c * std::pow(static_cast<double>(n), -phi); }

    void validate() const {
        if (kind != Kind::corrupted) return;
        require(c >= 0.0 && std::isfinite(c), "nuisance_mode: c must be >= 0");
        require(phi >= 0.0 && std::isfinite(phi), "nuisance_mode: phi must be >= 0");
    }
};

[[nodiscard]] inline const char* to_string(NuisanceMode::Kind k) {
    switch (k) {
    case NuisanceMode::Kind::oracle: return "oracle";
    case NuisanceMode::Kind::fitted: return "fitted";
    case NuisanceMode::Kind::corrupted: return "corrupted";
    }
    return "unknown";
}

inline void validate_pair(ModelKind kind, const Dgp& dgp) {
    const bool plm_like = kind != ModelKind::logit;
    require(plm_like == std::holds_alternative<PlmDgp>(dgp),
            std::string("model ") + to_string(kind) + " does not match the DGP family");
    std::visit([](const auto& g) { g.validate(); }, dgp);
}

/// Loss model with population oracles attached.
[[nodiscard]] inline std::shared_ptr<const LossModel> make_model(ModelKind kind, const Dgp& dgp) {
    validate_pair(kind, dgp);
    switch (kind) {
    case ModelKind::plm: return std::make_shared<const PartiallyLinearModel>(std::get<PlmDgp>(dgp));
    case ModelKind::plm_nonorth: return std::make_shared<const NonOrthogonalPlm>(std::get<PlmDgp>(dgp));
    case ModelKind::logit: return std::make_shared<const LogisticModel>(std::get<LogitDgp>(dgp));
    }
    throw ContractViolation("make_model: unknown model kind");
}

/// Loss model without population oracles; cheap to build.
[[nodiscard]] inline std::shared_ptr<const LossModel> make_sample_model(ModelKind kind, const Dgp& dgp) {
    validate_pair(kind, dgp);
    switch (kind) {
    case ModelKind::plm: return std::make_shared<const PartiallyLinearModel>(std::get<PlmDgp>(dgp).d());
    case ModelKind::plm_nonorth: return std::make_shared<const NonOrthogonalPlm>(std::get<PlmDgp>(dgp).d());
    case ModelKind::logit: {
        const auto& g = std::get<LogitDgp>(dgp);
        return std::make_shared<const LogisticModel>(g.d(), g.x_bound);
    }
    }
    throw ContractViolation("make_sample_model: unknown model kind");
}

[[nodiscard]] inline NuisanceFn true_nuisance_of(ModelKind kind, const Dgp& dgp) {
    validate_pair(kind, dgp);
    switch (kind) {
    case ModelKind::plm: return std::get<PlmDgp>(dgp).reduced_form_nuisance();
    case ModelKind::plm_nonorth: return std::get<PlmDgp>(dgp).structural_nuisance();
    case ModelKind::logit: return std::get<LogitDgp>(dgp).true_nuisance();
    }
    throw ContractViolation("true_nuisance_of: unknown model kind");
}

[[nodiscard]] inline SampleBatch draw(const Dgp& dgp, Index n, std::uint64_t seed) {
    return std::visit([&](const auto& g) { return sample(g, n, seed); }, dgp);
}

[[nodiscard]] inline Index covariate_dim_of(const Dgp& dgp) {
    return std::visit([](const auto& g) { return g.covariate_dim; }, dgp);
}

/// Everything a replication shares: the model with its oracles, g0, the sup-norm
/// probes and, for corrupted mode, the probe sup-norm of the corruption direction.
struct OslContext {
    ModelKind kind;
    Dgp dgp;
    NuisanceMode mode;
    NuisanceConfig nuisance;
    std::shared_ptr<const LossModel> model;
    NuisanceFn g0;
    RowMatrix probes;
    double direction_sup = 0.0;

    OslContext(ModelKind kind_, Dgp dgp_, NuisanceMode mode_, NuisanceConfig nuisance_ = {},
               std::uint64_t probe_seed = 0x9b0be5)
        : kind(kind_), dgp(std::move(dgp_)), mode(mode_), nuisance(nuisance_), model(make_model(kind, dgp)),
          g0(true_nuisance_of(kind, dgp)) {
        mode.validate();
        nuisance.validate();
        if (mode.kind == NuisanceMode::Kind::fitted && kind == ModelKind::plm_nonorth)
            throw ContractViolation("nuisance_mode: fitted is not available for the non-orthogonal PLM");
        probes = covariate_probes(covariate_dim_of(dgp), nuisance.probe_count, probe_seed);
        if (mode.kind == NuisanceMode::Kind::corrupted) {
            const NuisanceFn h = trig_direction(g0.output_dim(), covariate_dim_of(dgp), mode.direction_seed);
            direction_sup = sup_norm_distance(h, NuisanceFn::zero(g0.output_dim()), probes);
        }
    }
};

struct OslRun {
    Vector theta_hat;
    double excess_risk = 0.0;
    double nuisance_distance = 0.0;
    FitReport fit;
};

/// The two-stage estimator on 2n fresh draws: D1 = first n, D2 = last n.
[[nodiscard]] inline OslRun run_osl(const OslContext& ctx, Index n, std::uint64_t seed, const SolverOptions& opts = {},
                                    const Vector* theta_init = nullptr) {
    require(n >= 2 && n % 2 == 0, "run_osl: n must be even and >= 2");
    const std::string where = "run_osl(n=" + std::to_string(n) + ", seed=" + std::to_string(seed) + ")";
    const SampleBatch batch = draw(ctx.dgp, 2 * n, seed);
    const SampleBatch d1 = batch.slice(0, n);

    OslRun out;
    NuisanceFn g_hat = ctx.g0;
    try {
        switch (ctx.mode.kind) {
        case NuisanceMode::Kind::oracle: break;
        case NuisanceMode::Kind::fitted: {
            g_hat = fit_first_stage(ctx.kind, batch.slice(n, n), ctx.nuisance);
            out.nuisance_distance = sup_norm_distance(g_hat, ctx.g0, ctx.probes);
            break;
        }
        case NuisanceMode::Kind::corrupted: {
            const double amp = ctx.mode.amplitude(n);
            g_hat = corrupt_oracle(ctx.g0, amp, ctx.mode.direction_seed, covariate_dim_of(ctx.dgp));
            out.nuisance_distance = amp * ctx.direction_sup;
            break;
        }
        }
        const EmpiricalObjective objective(*ctx.model, g_hat, d1);
        const Vector init = theta_init ? *theta_init : Vector::Zero(ctx.model->dim());
        require(init.size() == ctx.model->dim(), where + ": theta_init dimension mismatch");
        out.fit = newton_minimize(objective, init, opts);
    } catch (const NumericDomainError& e) {
        throw NumericDomainError(where + ": " + e.what());
    }
    if (out.fit.termination != Termination::converged)
        throw NumericDomainError(where + ": second stage terminated with " + to_string(out.fit.termination));
    out.theta_hat = out.fit.theta_hat;
    out.excess_risk = ctx.model->excess_risk(out.theta_hat);
    return out;
}

[[nodiscard]] inline OslRun run_osl(ModelKind kind, const Dgp& dgp, Index n, const NuisanceMode& mode,
                                    std::uint64_t seed, const SolverOptions& opts = {}) {
    const OslContext ctx(kind, dgp, mode);
    return run_osl(ctx, n, seed, opts);
}

struct SweepConfig {
    ModelKind model_kind = ModelKind::plm;
    Dgp dgp = PlmDgp::make_default(5);
    std::vector<Index> n_grid = {500, 1000, 2000, 4000, 8000, 16000};
    Index replications = 200;
    NuisanceMode nuisance_mode;
    bool orthogonal = true; ///< false swaps the PLM for its unresidualized sibling
    std::uint64_t base_seed = 20240601;
    SolverOptions solver;
    NuisanceConfig nuisance;
    double max_failure_fraction = 0.05;

    [[nodiscard]] ModelKind effective_kind() const {
        return (model_kind == ModelKind::plm && !orthogonal) ? ModelKind::plm_nonorth : model_kind;
    }

    void validate() const {
        require(!n_grid.empty(), "n_grid: must be nonempty");
        for (std::size_t k = 0; k < n_grid.size(); ++k) {
            require(n_grid[k] >= 2 && n_grid[k] % 2 == 0, "n_grid: every n must be even and >= 2");
            require(k == 0 || n_grid[k] > n_grid[k - 1], "n_grid: must be increasing");
        }
        require(replications >= 1, "replications: must be >= 1");
        require(orthogonal || model_kind == ModelKind::plm, "orthogonal: false is only defined for model plm");
        require(model_kind != ModelKind::plm_nonorth, "model: select the non-orthogonal PLM with orthogonal = false");
        nuisance_mode.validate();
        solver.validate();
        nuisance.validate();
        validate_pair(effective_kind(), dgp);
    }
};

struct SweepRecord {
    Index n = 0;
    Index rep = 0;
    double excess_risk = 0.0;
    double nuisance_distance = 0.0;
    int iterations = 0;
};

struct SweepFailure {
    Index n = 0;
    Index rep = 0;
    std::string message;
};

struct SweepLevel {
    Index n = 0;
    Index replications_ok = 0;
    double mean_excess_risk = 0.0;
    double q90_excess_risk = 0.0;
    double log_mean_stderr = 0.0; ///< delta-method sd / (mean sqrt(m))
    double mean_nuisance_distance = 0.0;
};

struct SweepResult {
    std::vector<SweepRecord> records; ///< sorted by (n, rep)
    std::vector<SweepFailure> failures;
    std::vector<SweepLevel> levels;
    SlopeFit mean_fit; ///< log mean excess risk on log n
    SlopeFit q90_fit;

    [[nodiscard]] double slope() const { return mean_fit.slope; }
};

[[nodiscard]] inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs every (n, rep) replication on `jobs` threads. Records land in fixed
/// slots, so the result does not depend on scheduling.
[[nodiscard]] inline SweepResult rate_sweep(const SweepConfig& cfg, unsigned jobs = default_jobs(),
                                            const std::function<void(const std::string&)>& log = {}) {
    cfg.validate();
    require(jobs >= 1, "jobs: must be >= 1");
    const OslContext ctx(cfg.effective_kind(), cfg.dgp, cfg.nuisance_mode, cfg.nuisance);

    const std::size_t reps = static_cast<std::size_t>(cfg.replications);
    const std::size_t total = cfg.n_grid.size() * reps;
    std::vector<SweepRecord> slots(total);
    std::vector<std::string> errors(total);
    std::vector<char> ok(total, 0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;

    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= total) return;
            const Index n = cfg.n_grid[t / reps];
            const auto rep = static_cast<Index>(t % reps);
            try {
                const OslRun r = run_osl(ctx, n, replication_seed(cfg.base_seed, static_cast<std::uint64_t>(n),
                                                                  static_cast<std::uint64_t>(rep)),
                                         cfg.solver);
                slots[t] = {n, rep, r.excess_risk, r.nuisance_distance, r.fit.iterations};
                ok[t] = 1;
            } catch (const NumericDomainError& e) {
                errors[t] = e.what();
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
                next.store(total);
                return;
            }
        }
    };
    const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(jobs, total));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < nthreads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (fatal) std::rethrow_exception(fatal);

    SweepResult res;
    for (std::size_t t = 0; t < total; ++t) {
        if (ok[t]) {
            res.records.push_back(slots[t]);
        } else {
            const SweepFailure f{cfg.n_grid[t / reps], static_cast<Index>(t % reps), errors[t]};
            if (log) log("replication failed: " + f.message);
            res.failures.push_back(f);
        }
    }
    if (static_cast<double>(res.failures.size()) > cfg.max_failure_fraction * static_cast<double>(total))
        throw NumericDomainError("rate_sweep: " + std::to_string(res.failures.size()) + " of " +
                                 std::to_string(total) + " replications failed");

    std::vector<std::pair<double, double>> mean_pts, q90_pts;
    std::size_t pos = 0;
    for (const Index n : cfg.n_grid) {
        std::vector<double> risks;
        double dist = 0.0;
        for (; pos < res.records.size() && res.records[pos].n == n; ++pos) {
            risks.push_back(res.records[pos].excess_risk);
            dist += res.records[pos].nuisance_distance;
        }
        if (risks.empty()) throw NumericDomainError("rate_sweep: every replication failed at n = " + std::to_string(n));
        SweepLevel lv;
        lv.n = n;
        const double m = static_cast<double>(risks.size());
        lv.replications_ok = static_cast<Index>(risks.size());
        double sum = 0.0;
        for (const double r : risks) sum += r;
        lv.mean_excess_risk = sum / m;
        double ss = 0.0;
        for (const double r : risks) ss += (r - lv.mean_excess_risk) * (r - lv.mean_excess_risk);
        const double sd = risks.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
        lv.log_mean_stderr = lv.mean_excess_risk > 0.0 ? sd / (lv.mean_excess_risk * std::sqrt(m)) : 0.0;
        lv.q90_excess_risk = quantile(risks, 0.9);
        lv.mean_nuisance_distance = dist / m;
        res.levels.push_back(lv);
        const double x = std::log(static_cast<double>(n));
        if (lv.mean_excess_risk > 0.0) mean_pts.emplace_back(x, std::log(lv.mean_excess_risk));
        if (lv.q90_excess_risk > 0.0) q90_pts.emplace_back(x, std::log(lv.q90_excess_risk));
    }
    if (mean_pts.size() >= 3) res.mean_fit = slope_fit(mean_pts);
    if (q90_pts.size() >= 3) res.q90_fit = slope_fit(q90_pts);
    return res;
}

/// Monte Carlo effective dimension at (theta0, g0) from n_mc fresh draws.
[[nodiscard]] inline double effective_dimension_estimate(ModelKind kind, const Dgp& dgp, Index n_mc,
                                                         std::uint64_t seed) {
    require(n_mc >= 2, "effective_dimension_estimate: n_mc must be >= 2");
    const auto model = make_sample_model(kind, dgp);
    const NuisanceFn g0 = true_nuisance_of(kind, dgp);
    const Vector theta0 = std::visit([](const auto& g) { return g.theta0; }, dgp);
    const SampleBatch batch = draw(dgp, n_mc, seed);
    const EmpiricalMoments m = empirical_moments(*model, theta0, g0, batch);
    return effective_dimension(m.score_cov, m.hessian);
}

} // namespace osl

#endif
