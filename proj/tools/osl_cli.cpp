// osl: fit, sweep, effdim, orthcheck and stability over a YAML config.
//
// Exit codes: 0 ok, 2 config error, 3 numeric or solver failure, 4 --check violation.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "osl/io.hpp"
#include "osl/osl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace osl::cli {
namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;
constexpr int kCheck = 4;

// non-finite values serialize as null
json num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json vec(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
    return a;
}

template <class T>
json list(const std::vector<T>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(x);
    return a;
}

json echo(const RunConfig& c) {
    const DgpParams& p = c.dgp_params;
    json dgp = {{"d", p.d}, {"covariate_dim", p.covariate_dim}, {"coef_seed", p.coef_seed},
                {"coef_scale", p.coef_scale}, {"oracle_draws", p.oracle_draws}};
    if (c.model == ModelKind::logit) {
        dgp["x_bound"] = p.x_bound;
        dgp["coupling"] = p.coupling;
    } else {
        dgp["sigma_v"] = p.sigma_v;
        dgp["rho"] = p.rho;
        dgp["trig_degree"] = p.trig_degree;
    }
    json nuisance = {{"mode", to_string(c.mode.kind)}};
    if (c.mode.kind == NuisanceMode::Kind::corrupted) {
        nuisance["c"] = c.mode.c;
        nuisance["phi"] = c.mode.phi;
        nuisance["direction_seed"] = c.mode.direction_seed;
    }
    nuisance["basis"] = to_string(c.nuisance.basis);
    nuisance["degree"] = c.nuisance.degree;
    nuisance["ridge_penalty"] = c.nuisance.ridge_penalty;
    nuisance["probe_count"] = c.nuisance.probe_count;
    const SolverOptions& s = c.solver;
    json out = {{"command", c.command},
                {"config_path", c.config_path.string()},
                {"model", to_string(c.model)},
                {"orthogonal", c.orthogonal},
                {"seed", c.seed},
                {"dgp", dgp},
                {"nuisance", nuisance},
                {"solver",
                 {{"max_iterations", s.max_iterations},
                  {"decrement_tol", s.decrement_tol},
                  {"levenberg_floor", s.levenberg_floor},
                  {"shrink", s.shrink},
                  {"sufficient_decrease", s.sufficient_decrease},
                  {"max_backtracks", s.max_backtracks}}}};
    if (c.command == "fit") {
        json f = json::object();
        if (c.fit.n) f["n"] = *c.fit.n;
        if (c.fit.data) f["data"] = c.fit.data->string();
        if (c.fit.theta_init) f["theta_init"] = list(*c.fit.theta_init);
        out["fit"] = f;
    } else if (c.command == "sweep") {
        out["sweep"] = {{"n_grid", list(c.sweep.n_grid)},
                        {"replications", c.sweep.replications},
                        {"max_failure_fraction", c.sweep.max_failure_fraction}};
    } else if (c.command == "effdim") {
        json regs = json::array();
        for (const auto& r : c.effdim.regimes)
            regs.push_back({{"kind", to_string(r.kind)}, {"g_rate", r.g_rate}, {"h_rate", r.h_rate}});
        out["effdim"] = {{"d_grid", list(c.effdim.d_grid)}, {"regimes", regs}, {"svg", c.effdim.svg},
                         {"n_mc", c.effdim.n_mc}, {"profile_dirs", c.effdim.profile_dirs}};
        if (c.effdim.profile_r2) out["effdim"]["profile_r2"] = *c.effdim.profile_r2;
    } else if (c.command == "orthcheck") {
        out["orthcheck"] = {{"h", c.orthcheck.h},
                            {"n_dirs", c.orthcheck.n_dirs},
                            {"direction_seed", c.orthcheck.direction_seed}};
    } else if (c.command == "stability") {
        out["stability"] = {{"r2", c.stability.r2 ? json(*c.stability.r2) : json("auto")},
                            {"n_dirs", c.stability.n_dirs},
                            {"direction_seed", c.stability.direction_seed}};
    }
    return out;
}

class Reporter {
public:
    explicit Reporter(bool quiet) : quiet_(quiet) {}
    void operator()(const std::string& msg) const {
        if (!quiet_) std::cerr << "osl: " << msg << '\n';
    }

private:
    bool quiet_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw NumericDomainError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw NumericDomainError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Fails early, before any computation, if the directory cannot take output.
void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("--out: cannot create " + dir.string() + ": " + ec.message());
    const fs::path probe = dir / ".osl_write_probe";
    {
        std::ofstream os(probe);
        if (!os) throw ConfigError("--out: " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

/// Check outcome recorded in every summary; violated only matters with --check.
struct CheckLog {
    json entries = json::array();
    bool ok = true;

    void add(const std::string& name, double value, const std::string& op, double bound) {
        const bool pass = op == "<=" ? value <= bound : value >= bound;
        ok = ok && pass;
        entries.push_back({{"name", name}, {"value", num(value)}, {"op", op}, {"bound", bound}, {"pass", pass}});
    }

    [[nodiscard]] json to_json(bool enabled) const {
        return {{"enabled", enabled}, {"pass", ok}, {"entries", entries}};
    }
};

int finish_check(const RunConfig& cfg, const CheckLog& log, const Reporter& say) {
    if (!cfg.check) return kOk;
    for (const auto& e : log.entries)
        if (!e["pass"].get<bool>())
            say("check failed: " + e["name"].get<std::string>() + " = " + e["value"].dump() + ", required " +
                e["op"].get<std::string>() + " " + e["bound"].dump());
    return log.ok ? kOk : kCheck;
}

// ---------------------------------------------------------------------------
// fit

/// Reads the documented batch CSV: header y,t1..td,x1..xp then 2n rows; the
/// first n rows form the second-stage split.
SampleBatch read_batch_csv(const fs::path& path, Index d, Index p, bool binary_outcome) {
    std::ifstream is(path);
    const std::string where = "fit.data (" + path.string() + ")";
    if (!is) throw ConfigError(where + ": cannot open");
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(where + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected = "y";
    for (Index k = 1; k <= d; ++k) expected += ",t" + std::to_string(k);
    for (Index k = 1; k <= p; ++k) expected += ",x" + std::to_string(k);
    if (line != expected) throw ConfigError(where + ": header must be '" + expected + "'");

    std::vector<double> cells;
    Index rows = 0;
    const auto width = static_cast<std::size_t>(1 + d + p);
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++rows;
        std::size_t count = 0;
        const char* b = line.data();
        const char* e = b + line.size();
        for (;;) {
            const char* comma = std::find(b, e, ',');
            double v = 0.0;
            const auto res = std::from_chars(b, comma, v);
            if (res.ec != std::errc() || res.ptr != comma || !std::isfinite(v))
                throw ConfigError(where + ": line " + std::to_string(rows + 1) + ": bad number in column " +
                                  std::to_string(count + 1));
            cells.push_back(v);
            ++count;
            if (comma == e) break;
            b = comma + 1;
        }
        if (count != width)
            throw ConfigError(where + ": line " + std::to_string(rows + 1) + ": expected " + std::to_string(width) +
                              " columns, got " + std::to_string(count));
        const double y = cells[cells.size() - width];
        if (binary_outcome && y != 1.0 && y != -1.0)
            throw ConfigError(where + ": line " + std::to_string(rows + 1) + ": logistic outcomes must be -1 or +1");
    }
    if (rows < 4 || rows % 2 != 0)
        throw ConfigError(where + ": need an even number of rows >= 4 (got " + std::to_string(rows) + ")");
    Vector y(rows);
    RowMatrix t(rows, d), x(rows, p);
    for (Index i = 0; i < rows; ++i) {
        const double* r = cells.data() + static_cast<std::size_t>(i) * width;
        y[i] = r[0];
        for (Index k = 0; k < d; ++k) t(i, k) = r[1 + k];
        for (Index k = 0; k < p; ++k) x(i, k) = r[1 + d + k];
    }
    return SampleBatch(std::move(y), std::move(t), std::move(x));
}

int cmd_fit(const RunConfig& cfg, const Reporter& say) {
    const ModelKind kind = cfg.effective_kind();
    json out;
    out["config"] = echo(cfg);
    CheckLog checks;

    std::optional<Vector> init;
    if (cfg.fit.theta_init) init = Eigen::Map<const Vector>(cfg.fit.theta_init->data(), cfg.dgp_params.d);

    if (cfg.fit.data) {
        // user data: no population oracles, so no excess risk
        const SampleBatch batch = read_batch_csv(*cfg.fit.data, cfg.dgp_params.d, cfg.dgp_params.covariate_dim,
                                                 kind == ModelKind::logit);
        const Index n = batch.n() / 2;
        if (cfg.fit.n && *cfg.fit.n != n)
            throw ConfigError("fit.n: " + std::to_string(*cfg.fit.n) + " disagrees with fit.data, which holds 2n = " +
                              std::to_string(batch.n()) + " rows");
        say("fit on " + cfg.fit.data->string() + " with n = " + std::to_string(n));
        const auto model = make_sample_model(kind, cfg.dgp);
        const NuisanceFn g_hat = fit_first_stage(kind, batch.slice(n, n), cfg.nuisance);
        const SampleBatch d1 = batch.slice(0, n);
        const EmpiricalObjective obj(*model, g_hat, d1);
        const FitReport rep = newton_minimize(obj, init.value_or(Vector::Zero(model->dim())), cfg.solver);
        out["n"] = n;
        out["theta_hat"] = vec(rep.theta_hat);
        out["iterations"] = rep.iterations;
        out["final_decrement"] = num(rep.final_decrement);
        out["termination"] = to_string(rep.termination);
        out["objective_trace"] = list(rep.objective_trace);
        out["excess_risk"] = nullptr;
        out["nuisance_distance"] = nullptr;
        out["check"] = checks.to_json(cfg.check);
        write_json(cfg.out_dir / "fit.json", out);
        if (rep.termination != Termination::converged) {
            say(std::string("solver terminated with ") + to_string(rep.termination));
            return kNumeric;
        }
        return kOk;
    }

    const Index n = *cfg.fit.n;
    say("fit " + std::string(to_string(kind)) + " with n = " + std::to_string(n) + ", seed " +
        std::to_string(cfg.seed));
    const OslContext ctx(kind, cfg.dgp, cfg.mode, cfg.nuisance);
    const OslRun run = run_osl(ctx, n, cfg.seed, cfg.solver, init ? &*init : nullptr);
    const Vector theta0 = std::visit([](const auto& g) { return g.theta0; }, cfg.dgp);
    out["n"] = n;
    out["theta_hat"] = vec(run.theta_hat);
    out["theta0"] = vec(theta0);
    out["iterations"] = run.fit.iterations;
    out["final_decrement"] = num(run.fit.final_decrement);
    out["termination"] = to_string(run.fit.termination);
    out["objective_trace"] = list(run.fit.objective_trace);
    out["excess_risk"] = num(run.excess_risk);
    out["nuisance_distance"] = num(run.nuisance_distance);
    out["check"] = checks.to_json(cfg.check);
    write_json(cfg.out_dir / "fit.json", out);
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const RunConfig& cfg, const Reporter& say) {
    SweepConfig sc;
    sc.model_kind = cfg.model;
    sc.orthogonal = cfg.orthogonal;
    sc.dgp = cfg.dgp;
    sc.n_grid = cfg.sweep.n_grid;
    sc.replications = cfg.sweep.replications;
    sc.nuisance_mode = cfg.mode;
    sc.base_seed = cfg.seed;
    sc.solver = cfg.solver;
    sc.nuisance = cfg.nuisance;
    sc.max_failure_fraction = cfg.sweep.max_failure_fraction;
    detail::validated("sweep", [&] { sc.validate(); });

    say("sweep " + std::string(to_string(sc.effective_kind())) + ": " + std::to_string(sc.n_grid.size()) +
        " sample sizes x " + std::to_string(sc.replications) + " replications on " + std::to_string(cfg.jobs) +
        " threads");
    const SweepResult res = rate_sweep(sc, cfg.jobs, [&](const std::string& m) { say(m); });

    {
        std::ostringstream os;
        io::write_records_csv(os, res.records);
        write_text(cfg.out_dir / "records.csv", os.str());
    }
    {
        std::ostringstream os;
        io::write_levels_csv(os, res.levels);
        write_text(cfg.out_dir / "levels.csv", os.str());
    }

    CheckLog checks;
    double lo = -1.25, hi = -0.75;
    if (sc.effective_kind() == ModelKind::plm_nonorth && cfg.mode.kind == NuisanceMode::Kind::corrupted) {
        lo = -0.75;
        hi = -0.45;
    }
    checks.add("slope", res.slope(), ">=", cfg.checks.slope_min.value_or(lo));
    checks.add("slope", res.slope(), "<=", cfg.checks.slope_max.value_or(hi));

    json failures = json::array();
    for (const auto& f : res.failures) failures.push_back({{"n", f.n}, {"rep", f.rep}, {"message", f.message}});
    json levels = json::array();
    for (const auto& l : res.levels)
        levels.push_back({{"n", l.n},
                          {"replications_ok", l.replications_ok},
                          {"mean_excess_risk", num(l.mean_excess_risk)},
                          {"q90_excess_risk", num(l.q90_excess_risk)},
                          {"log_mean_stderr", num(l.log_mean_stderr)}});
    json out;
    out["config"] = echo(cfg);
    out["slope"] = num(res.mean_fit.slope);
    out["slope_stderr"] = num(res.mean_fit.stderr_slope);
    out["intercept"] = num(res.mean_fit.intercept);
    out["q90_slope"] = num(res.q90_fit.slope);
    out["q90_slope_stderr"] = num(res.q90_fit.stderr_slope);
    out["failure_count"] = res.failures.size();
    out["failures"] = failures;
    out["levels"] = levels;
    out["check"] = checks.to_json(cfg.check);
    write_json(cfg.out_dir / "summary.json", out);
    say("slope " + io::format_double(res.slope()) + " (stderr " + io::format_double(res.mean_fit.stderr_slope) + ")");
    return finish_check(cfg, checks, say);
}

// ---------------------------------------------------------------------------
// effdim

int cmd_effdim(const RunConfig& cfg, const Reporter& say) {
    const EffdimSection& e = cfg.effdim;
    std::vector<EffDimReport> rows;
    json regimes = json::array();
    CheckLog checks;
    std::vector<io::Series> series;
    for (const auto& reg : e.regimes) {
        const auto part = eigendecay_regimes(e.d_grid, reg);
        const RegimeCheck rc = check_regime_orders(part, reg, cfg.checks.slope_tol, cfg.checks.const_tol);
        auto order_json = [](const OrderCheck& oc) {
            return json{{"expected_poly", oc.expected.poly},
                        {"expected_exp_rate", oc.expected.exp_rate},
                        {"expected_constant", oc.expected.constant},
                        {"fitted_slope", num(oc.fitted_slope)},
                        {"variation", num(oc.variation)},
                        {"pass", oc.pass}};
        };
        regimes.push_back({{"regime", rc.regime},
                           {"d_star", order_json(rc.d_star)},
                           {"d_prime", order_json(rc.d_prime)}});
        for (const auto& [name, oc] : {std::pair{"d_star", rc.d_star}, std::pair{"d_prime", rc.d_prime}}) {
            if (oc.expected.constant) checks.add(rc.regime + "." + name + ".variation", oc.variation, "<=", cfg.checks.const_tol);
            else checks.add(rc.regime + "." + name + ".slope_error", std::abs(oc.fitted_slope - oc.expected.poly), "<=",
                            cfg.checks.slope_tol);
        }
        io::Series s_star{reg.label() + " d*", {}, {}}, s_prime{reg.label() + " d'", {}, {}};
        for (const auto& r : part) {
            s_star.x.push_back(std::log(static_cast<double>(r.d)));
            s_star.y.push_back(r.log_d_star);
            s_prime.x.push_back(std::log(static_cast<double>(r.d)));
            s_prime.y.push_back(r.log_d_prime);
        }
        series.push_back(std::move(s_star));
        series.push_back(std::move(s_prime));
        rows.insert(rows.end(), part.begin(), part.end());
    }

    json model = json::object();
    if (e.n_mc > 0 || e.profile_r2) {
        const ModelKind kind = cfg.effective_kind();
        const auto m = make_model(kind, cfg.dgp);
        const NuisanceFn g0 = true_nuisance_of(kind, cfg.dgp);
        const Vector theta0 = std::visit([](const auto& g) { return g.theta0; }, cfg.dgp);
        const double exact = effective_dimension(m->population_score_cov(theta0, g0), m->population_hessian(theta0, g0));
        model["kind"] = to_string(kind);
        model["d_star_population"] = num(exact);
        if (e.n_mc > 0) {
            say("Monte Carlo effective dimension with " + std::to_string(e.n_mc) + " draws");
            model["n_mc"] = e.n_mc;
            model["d_star_mc"] = num(effective_dimension_estimate(kind, cfg.dgp, e.n_mc, cfg.seed));
        }
        if (e.profile_r2) {
            model["profile_r2"] = *e.profile_r2;
            model["d_star_profile"] = num(profile_effective_dimension(*m, theta0, g0, *e.profile_r2, e.profile_dirs,
                                                                      cfg.seed, covariate_dim_of(cfg.dgp)));
        }
    }

    {
        std::ostringstream os;
        io::write_effdim_csv(os, rows);
        write_text(cfg.out_dir / "effdim.csv", os.str());
    }
    if (e.svg) {
        std::ostringstream os;
        io::write_loglog_svg(os, "effective dimension by eigendecay regime", "d", "value", series);
        write_text(cfg.out_dir / "effdim.svg", os.str());
    }
    json out;
    out["config"] = echo(cfg);
    out["regimes"] = regimes;
    if (!model.empty()) out["model"] = model;
    out["check"] = checks.to_json(cfg.check);
    write_json(cfg.out_dir / "effdim.json", out);
    say("wrote " + std::to_string(rows.size()) + " rows for " + std::to_string(e.regimes.size()) + " regimes");
    return finish_check(cfg, checks, say);
}

// ---------------------------------------------------------------------------
// orthcheck, stability

int cmd_orthcheck(const RunConfig& cfg, const Reporter& say) {
    const ModelKind kind = cfg.effective_kind();
    const auto model = make_model(kind, cfg.dgp);
    const NuisanceFn g0 = true_nuisance_of(kind, cfg.dgp);
    const Vector theta0 = std::visit([](const auto& g) { return g.theta0; }, cfg.dgp);
    const auto dirs = trig_directions(g0.output_dim(), covariate_dim_of(cfg.dgp), cfg.orthcheck.n_dirs,
                                      cfg.orthcheck.direction_seed);
    const double defect = orthogonality_defect(*model, theta0, g0, coordinate_directions(model->dim()), dirs,
                                               cfg.orthcheck.h);
    say(std::string("orthogonality defect of ") + to_string(kind) + ": " + io::format_double(defect));

    CheckLog checks;
    if (kind == ModelKind::plm) checks.add("defect", defect, "<=", cfg.checks.defect_max.value_or(1e-6));
    else checks.add("defect", defect, ">=", cfg.checks.defect_min.value_or(0.01));
    if (kind == ModelKind::plm && cfg.checks.defect_min) checks.add("defect", defect, ">=", *cfg.checks.defect_min);
    if (kind != ModelKind::plm && cfg.checks.defect_max) checks.add("defect", defect, "<=", *cfg.checks.defect_max);

    json out;
    out["config"] = echo(cfg);
    out["model"] = to_string(kind);
    out["defect"] = num(defect);
    out["theta_directions"] = model->dim();
    out["nuisance_directions"] = dirs.size();
    out["check"] = checks.to_json(cfg.check);
    write_json(cfg.out_dir / "orthcheck.json", out);
    return finish_check(cfg, checks, say);
}

int cmd_stability(const RunConfig& cfg, const Reporter& say) {
    const ModelKind kind = cfg.effective_kind();
    const auto model = make_model(kind, cfg.dgp);
    const NuisanceFn g0 = true_nuisance_of(kind, cfg.dgp);
    const Vector theta0 = std::visit([](const auto& g) { return g.theta0; }, cfg.dgp);
    const Matrix h_star = model->population_hessian(theta0, g0);
    const double lmin = linalg::symmetric_eigenvalues(h_star).minCoeff();

    double r2 = 0.0;
    if (cfg.stability.r2) {
        r2 = *cfg.stability.r2;
    } else {
        const double m = model->self_concordance();
        r2 = lmin / (m * m);
    }
    const StabilityReport rep = hessian_stability(*model, theta0, g0, r2, cfg.stability.n_dirs,
                                                  cfg.stability.direction_seed, covariate_dim_of(cfg.dgp));
    say("kappa " + io::format_double(rep.kappa_hat) + ", K " + io::format_double(rep.K_hat) + " at r2 = " +
        io::format_double(r2));

    CheckLog checks;
    if (kind == ModelKind::logit) {
        checks.add("kappa_hat", rep.kappa_hat, ">=", cfg.checks.kappa_min.value_or(0.70));
        checks.add("K_hat", rep.K_hat, "<=", cfg.checks.K_max.value_or(1.30));
    } else {
        // H = 2 Sigma_u under either PLM loss; lambda_min(Sigma_u) = lmin / 2
        checks.add("kappa_hat", rep.kappa_hat, ">=", cfg.checks.kappa_min.value_or(1.0 - 1e-6));
        checks.add("K_hat", rep.K_hat, "<=", cfg.checks.K_max.value_or(1.0 + r2 * r2 / (0.5 * lmin) + 0.02));
    }

    json out;
    out["config"] = echo(cfg);
    out["model"] = to_string(kind);
    out["r2"] = num(r2);
    out["lambda_min_h_star"] = num(lmin);
    out["kappa_hat"] = num(rep.kappa_hat);
    out["K_hat"] = num(rep.K_hat);
    out["samples_used"] = rep.samples_used;
    out["check"] = checks.to_json(cfg.check);
    write_json(cfg.out_dir / "stability.json", out);
    return finish_check(cfg, checks, say);
}

int dispatch(RunConfig& cfg) {
    const Reporter say(cfg.quiet);
    try {
        load_config(cfg);
        prepare_out_dir(cfg.out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "osl: config error: " << e.what() << '\n';
        return kConfig;
    }
    try {
        if (cfg.command == "fit") return cmd_fit(cfg, say);
        if (cfg.command == "sweep") return cmd_sweep(cfg, say);
        if (cfg.command == "effdim") return cmd_effdim(cfg, say);
        if (cfg.command == "orthcheck") return cmd_orthcheck(cfg, say);
        if (cfg.command == "stability") return cmd_stability(cfg, say);
    } catch (const ConfigError& e) {
        std::cerr << "osl: config error: " << e.what() << '\n';
        return kConfig;
    } catch (const ContractViolation& e) {
        std::cerr << "osl: invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericDomainError& e) {
        std::cerr << "osl: numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const UnsupportedOperation& e) {
        std::cerr << "osl: unsupported: " << e.what() << '\n';
        return kNumeric;
    }
    std::cerr << "osl: unknown command " << cfg.command << '\n';
    return kConfig;
}

} // namespace
} // namespace osl::cli

int main(int argc, char** argv) {
    using osl::cli::RunConfig;
    CLI::App app{"Orthogonal statistical learning: two-stage estimation and diagnostics"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path, out_dir = "osl_out";
    std::optional<std::uint64_t> seed;
    unsigned jobs = osl::default_jobs();

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"fit", "run the two-stage estimator once and write fit.json"},
        {"sweep", "Monte Carlo excess-risk sweep: records.csv, levels.csv, summary.json"},
        {"effdim", "effective dimension across eigendecay regimes: effdim.csv, effdim.json, effdim.svg"},
        {"orthcheck", "finite-difference orthogonality defect: orthcheck.json"},
        {"stability", "Hessian stability constants: stability.json"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "YAML configuration file")->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--jobs", jobs, "worker threads for sweep")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", cfg.quiet, "no progress messages");
        sub->add_flag("--check", cfg.check, "exit 4 when an acceptance threshold is violated");
        sub->callback([&cfg, n = std::string(name)] { cfg.command = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    cfg.config_path = config_path;
    cfg.out_dir = out_dir;
    cfg.jobs = jobs;
    if (seed) {
        cfg.seed = *seed;
        cfg.seed_overridden = true;
    }
    return osl::cli::dispatch(cfg);
}
