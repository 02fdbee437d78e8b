// YAML run configuration for the osl command-line tool.
#ifndef OSL_TOOLS_CONFIG_HPP
#define OSL_TOOLS_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "osl/osl.hpp"

namespace osl::cli {

/// Invalid configuration; what() names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mapping in the config file with its dotted path. Every key read is
/// recorded; finish() rejects the rest.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(label() + ": expected a mapping");
    }

    [[nodiscard]] bool present() const { return node_ && node_.IsMap(); }
    [[nodiscard]] bool has(const std::string& key) const {
        const YAML::Node& n = node_;
        return present() && n[key];
    }
    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    [[nodiscard]] T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        return convert<T>(node_[key], field(key));
    }

    template <class T>
    [[nodiscard]] std::optional<T> maybe(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        return convert<T>(node_[key], field(key));
    }

    template <class T>
    [[nodiscard]] T required(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) throw ConfigError(field(key) + ": required");
        return convert<T>(node_[key], field(key));
    }

    [[nodiscard]] std::optional<YAML::Node> raw(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        return node_[key];
    }

    [[nodiscard]] Section child(const std::string& key) {
        seen_.insert(key);
        return {present() ? node_[key] : YAML::Node(), field(key)};
    }

    void finish() const {
        if (!present()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown key");
        }
    }

    template <class T>
    [[nodiscard]] static T convert(const YAML::Node& n, const std::string& where) {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            std::ostringstream msg;
            msg << where << ": cannot read '" << YAML::Dump(n) << "' as " << type_name<T>();
            throw ConfigError(msg.str());
        }
    }

private:
    template <class T>
    static const char* type_name() {
        if constexpr (std::is_same_v<T, bool>) return "a boolean";
        else if constexpr (std::is_integral_v<T>) return "an integer";
        else if constexpr (std::is_floating_point_v<T>) return "a number";
        else if constexpr (std::is_same_v<T, std::string>) return "a string";
        else return "a list";
    }

    [[nodiscard]] std::string label() const { return path_.empty() ? "config" : path_; }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

struct DgpParams {
    Index d = 5;
    Index covariate_dim = 2;
    std::uint64_t coef_seed = 7;
    double sigma_v = 1.0; // plm
    double rho = 0.3;     // plm
    double coef_scale = 0.5;
    int trig_degree = 2;  // plm
    double x_bound = 2.0; // logit
    double coupling = 0.5; // logit
    Index oracle_draws = 200000;
};

struct FitSection {
    std::optional<Index> n;
    std::optional<std::filesystem::path> data;
    std::optional<std::vector<double>> theta_init;
};

struct SweepSection {
    std::vector<Index> n_grid = {500, 1000, 2000, 4000, 8000, 16000};
    Index replications = 200;
    double max_failure_fraction = 0.05;
};

struct EffdimSection {
    std::vector<Index> d_grid = {50, 100, 200, 400};
    std::vector<DecayRegime> regimes;
    bool svg = true;
    Index n_mc = 0;
    std::optional<double> profile_r2;
    Index profile_dirs = 16;
};

struct OrthcheckSection {
    double h = 1e-4;
    Index n_dirs = 8;
    std::uint64_t direction_seed = 1;
};

struct StabilitySection {
    std::optional<double> r2; ///< empty: lambda_min(H_star) / M^2, logistic only
    Index n_dirs = 16;
    std::uint64_t direction_seed = 1;
};

/// Thresholds for --check. Unset entries fall back to per-model defaults.
struct CheckSection {
    std::optional<double> slope_min, slope_max;
    std::optional<double> defect_max, defect_min;
    std::optional<double> kappa_min, K_max;
    double slope_tol = 0.3;
    double const_tol = 0.05;
};

struct RunConfig {
    std::string command;
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::uint64_t seed = 20240601;
    bool seed_overridden = false; ///< --seed wins over the file
    unsigned jobs = 1;
    bool quiet = false;
    bool check = false;

    ModelKind model = ModelKind::plm;
    bool orthogonal = true;
    DgpParams dgp_params;
    Dgp dgp = PlmDgp::make_default(5);
    NuisanceMode mode;
    NuisanceConfig nuisance;
    SolverOptions solver;

    FitSection fit;
    SweepSection sweep;
    EffdimSection effdim;
    OrthcheckSection orthcheck;
    StabilitySection stability;
    CheckSection checks;

    [[nodiscard]] ModelKind effective_kind() const {
        return (model == ModelKind::plm && !orthogonal) ? ModelKind::plm_nonorth : model;
    }
};

/// Every combination of rates in {1, 2} for the four decay regimes.
[[nodiscard]] inline std::vector<DecayRegime> default_regimes() {
    std::vector<DecayRegime> out;
    for (const DecayKind k : {DecayKind::poly_poly, DecayKind::poly_exp, DecayKind::exp_poly, DecayKind::exp_exp})
        for (const double a : {1.0, 2.0})
            for (const double b : {1.0, 2.0}) out.push_back({k, a, b});
    return out;
}

namespace detail {

/// Runs a library validation, reporting its contract message under `where`.
template <class F>
void validated(const std::string& where, F&& f) {
    try {
        f();
    } catch (const ContractViolation& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const NumericDomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline void positive_count(Index v, const std::string& where, Index min = 1) {
    if (v < min) throw ConfigError(where + ": must be >= " + std::to_string(min) + " (got " + std::to_string(v) + ")");
}

inline DecayKind parse_decay_kind(const std::string& s, const std::string& where) {
    for (const DecayKind k : {DecayKind::poly_poly, DecayKind::poly_exp, DecayKind::exp_poly, DecayKind::exp_exp})
        if (s == to_string(k)) return k;
    throw ConfigError(where + ": unknown regime '" + s + "' (poly_poly, poly_exp, exp_poly, exp_exp)");
}

inline void parse_dgp(RunConfig& cfg, Section s) {
    DgpParams& p = cfg.dgp_params;
    const bool logit = cfg.model == ModelKind::logit;
    if (logit) {
        p.d = 2;
        p.coef_seed = 11;
    }
    p.d = s.get<Index>("d", p.d);
    positive_count(p.d, s.field("d"));
    p.covariate_dim = s.get<Index>("covariate_dim", p.covariate_dim);
    positive_count(p.covariate_dim, s.field("covariate_dim"));
    p.coef_seed = s.get<std::uint64_t>("coef_seed", p.coef_seed);
    p.coef_scale = s.get<double>("coef_scale", p.coef_scale);
    if (!(p.coef_scale >= 0.0 && std::isfinite(p.coef_scale))) throw ConfigError(s.field("coef_scale") + ": must be >= 0");
    p.oracle_draws = s.get<Index>("oracle_draws", p.oracle_draws);
    positive_count(p.oracle_draws, s.field("oracle_draws"), 100);
    if (logit) {
        p.x_bound = s.get<double>("x_bound", p.x_bound);
        p.coupling = s.get<double>("coupling", p.coupling);
        s.finish();
        detail::validated(s.path(), [&] {
            LogitDgp g = LogitDgp::make_default(p.d, p.covariate_dim, p.coef_seed, p.x_bound, p.coupling, p.coef_scale);
            g.oracle_draws = p.oracle_draws;
            cfg.dgp = g;
        });
    } else {
        p.sigma_v = s.get<double>("sigma_v", p.sigma_v);
        p.rho = s.get<double>("rho", p.rho);
        p.trig_degree = s.get<int>("trig_degree", p.trig_degree);
        if (p.trig_degree < 0) throw ConfigError(s.field("trig_degree") + ": must be >= 0");
        if (!(std::abs(p.rho) < 1.0)) throw ConfigError(s.field("rho") + ": must lie in (-1, 1)");
        s.finish();
        detail::validated(s.path(), [&] {
            PlmDgp g = PlmDgp::make_default(p.d, p.covariate_dim, p.coef_seed, p.sigma_v, p.rho, p.coef_scale,
                                            p.trig_degree);
            g.oracle_draws = p.oracle_draws;
            g.validate();
            cfg.dgp = g;
        });
    }
}

inline void parse_nuisance(RunConfig& cfg, Section s) {
    const auto mode = s.get<std::string>("mode", "oracle");
    if (mode == "oracle") cfg.mode = NuisanceMode::oracle();
    else if (mode == "fitted") cfg.mode = NuisanceMode::fitted();
    else if (mode == "corrupted") cfg.mode = NuisanceMode::corrupted(1.0, 0.3);
    else throw ConfigError(s.field("mode") + ": unknown mode '" + mode + "' (oracle, fitted, corrupted)");
    cfg.mode.c = s.get<double>("c", cfg.mode.c);
    cfg.mode.phi = s.get<double>("phi", cfg.mode.phi);
    cfg.mode.direction_seed = s.get<std::uint64_t>("direction_seed", cfg.mode.direction_seed);
    if (!(cfg.mode.c >= 0.0 && std::isfinite(cfg.mode.c))) throw ConfigError(s.field("c") + ": must be >= 0");
    if (!(cfg.mode.phi >= 0.0 && std::isfinite(cfg.mode.phi))) throw ConfigError(s.field("phi") + ": must be >= 0");

    const auto basis = s.get<std::string>("basis", "trigonometric");
    if (basis == "trigonometric") cfg.nuisance.basis = BasisKind::trigonometric;
    else if (basis == "polynomial") cfg.nuisance.basis = BasisKind::polynomial;
    else throw ConfigError(s.field("basis") + ": unknown basis '" + basis + "' (trigonometric, polynomial)");
    cfg.nuisance.degree = s.get<int>("degree", cfg.nuisance.degree);
    if (cfg.nuisance.degree < 0) throw ConfigError(s.field("degree") + ": must be >= 0");
    cfg.nuisance.ridge_penalty = s.get<double>("ridge_penalty", cfg.nuisance.ridge_penalty);
    if (!(cfg.nuisance.ridge_penalty >= 0.0)) throw ConfigError(s.field("ridge_penalty") + ": must be >= 0");
    cfg.nuisance.probe_count = s.get<Index>("probe_count", cfg.nuisance.probe_count);
    positive_count(cfg.nuisance.probe_count, s.field("probe_count"));
    s.finish();
    if (cfg.mode.kind == NuisanceMode::Kind::fitted && cfg.effective_kind() == ModelKind::plm_nonorth)
        throw ConfigError(s.field("mode") + ": fitted is not available with orthogonal: false");
}

inline void parse_solver(RunConfig& cfg, Section s) {
    SolverOptions& o = cfg.solver;
    o.max_iterations = s.get<int>("max_iterations", o.max_iterations);
    o.decrement_tol = s.get<double>("decrement_tol", o.decrement_tol);
    o.levenberg_floor = s.get<double>("levenberg_floor", o.levenberg_floor);
    o.shrink = s.get<double>("shrink", o.shrink);
    o.sufficient_decrease = s.get<double>("sufficient_decrease", o.sufficient_decrease);
    o.max_backtracks = s.get<int>("max_backtracks", o.max_backtracks);
    s.finish();
    validated(s.path(), [&] { o.validate(); });
}

inline std::vector<Index> index_list(Section& s, const std::string& key, std::vector<Index> fallback) {
    const auto v = s.maybe<std::vector<Index>>(key);
    return v ? *v : fallback;
}

inline void parse_fit(RunConfig& cfg, Section s) {
    cfg.fit.n = s.maybe<Index>("n");
    if (const auto p = s.maybe<std::string>("data")) {
        std::filesystem::path path(*p);
        if (path.is_relative()) path = cfg.config_path.parent_path() / path;
        cfg.fit.data = path;
    }
    cfg.fit.theta_init = s.maybe<std::vector<double>>("theta_init");
    s.finish();
    if (cfg.command != "fit") return;
    if (!cfg.fit.n && !cfg.fit.data) throw ConfigError(s.field("n") + ": required (or give fit.data)");
    if (cfg.fit.n && (*cfg.fit.n < 2 || *cfg.fit.n % 2 != 0))
        throw ConfigError(s.field("n") + ": must be even and >= 2 (got " + std::to_string(*cfg.fit.n) + ")");
    if (cfg.fit.data && cfg.mode.kind != NuisanceMode::Kind::fitted)
        throw ConfigError(s.field("data") + ": user-supplied data requires nuisance.mode: fitted");
    if (cfg.fit.theta_init &&
        static_cast<Index>(cfg.fit.theta_init->size()) != cfg.dgp_params.d)
        throw ConfigError(s.field("theta_init") + ": must have dgp.d = " + std::to_string(cfg.dgp_params.d) +
                          " entries");
}

inline void parse_sweep(RunConfig& cfg, Section s) {
    cfg.sweep.n_grid = index_list(s, "n_grid", cfg.sweep.n_grid);
    cfg.sweep.replications = s.get<Index>("replications", cfg.sweep.replications);
    cfg.sweep.max_failure_fraction = s.get<double>("max_failure_fraction", cfg.sweep.max_failure_fraction);
    s.finish();
    if (cfg.command != "sweep") return;
    positive_count(cfg.sweep.replications, s.field("replications"));
    for (std::size_t k = 0; k < cfg.sweep.n_grid.size(); ++k) {
        const Index n = cfg.sweep.n_grid[k];
        if (n < 2 || n % 2 != 0)
            throw ConfigError(s.field("n_grid") + ": every n must be even and >= 2 (got " + std::to_string(n) + ")");
        if (k > 0 && n <= cfg.sweep.n_grid[k - 1]) throw ConfigError(s.field("n_grid") + ": must be increasing");
    }
    if (cfg.sweep.n_grid.empty()) throw ConfigError(s.field("n_grid") + ": must be nonempty");
    if (!(cfg.sweep.max_failure_fraction >= 0.0 && cfg.sweep.max_failure_fraction <= 1.0))
        throw ConfigError(s.field("max_failure_fraction") + ": must lie in [0, 1]");
}

inline void parse_effdim(RunConfig& cfg, Section s) {
    EffdimSection& e = cfg.effdim;
    e.d_grid = index_list(s, "d_grid", e.d_grid);
    e.svg = s.get<bool>("svg", e.svg);
    e.n_mc = s.get<Index>("n_mc", e.n_mc);
    e.profile_r2 = s.maybe<double>("profile_r2");
    e.profile_dirs = s.get<Index>("profile_dirs", e.profile_dirs);
    if (const auto regimes = s.raw("regimes")) {
        if (!regimes->IsSequence()) throw ConfigError(s.field("regimes") + ": expected a list");
        for (std::size_t i = 0; i < regimes->size(); ++i) {
            Section r((*regimes)[i], s.field("regimes") + "[" + std::to_string(i) + "]");
            DecayRegime reg{parse_decay_kind(r.required<std::string>("kind"), r.field("kind")),
                            r.required<double>("g_rate"), r.required<double>("h_rate")};
            r.finish();
            if (!(reg.g_rate > 0.0)) throw ConfigError(r.field("g_rate") + ": must be positive");
            if (!(reg.h_rate > 0.0)) throw ConfigError(r.field("h_rate") + ": must be positive");
            e.regimes.push_back(reg);
        }
    } else {
        e.regimes = default_regimes();
    }
    s.finish();
    if (cfg.command != "effdim") return;
    if (e.d_grid.size() < 3) throw ConfigError(s.field("d_grid") + ": at least 3 dimensions are required");
    for (std::size_t k = 0; k < e.d_grid.size(); ++k) {
        positive_count(e.d_grid[k], s.field("d_grid"));
        if (k > 0 && e.d_grid[k] <= e.d_grid[k - 1]) throw ConfigError(s.field("d_grid") + ": must be increasing");
    }
    if (e.regimes.empty()) throw ConfigError(s.field("regimes") + ": must be nonempty");
    if (e.n_mc != 0) positive_count(e.n_mc, s.field("n_mc"), 2);
    if (e.profile_r2 && !(*e.profile_r2 >= 0.0)) throw ConfigError(s.field("profile_r2") + ": must be >= 0");
    positive_count(e.profile_dirs, s.field("profile_dirs"), 0);
}

inline void parse_orthcheck(RunConfig& cfg, Section s) {
    OrthcheckSection& o = cfg.orthcheck;
    o.h = s.get<double>("h", o.h);
    o.n_dirs = s.get<Index>("n_dirs", o.n_dirs);
    o.direction_seed = s.get<std::uint64_t>("direction_seed", o.direction_seed);
    s.finish();
    if (!(o.h > 0.0 && o.h < 1.0)) throw ConfigError(s.field("h") + ": must lie in (0, 1)");
    positive_count(o.n_dirs, s.field("n_dirs"));
}

inline void parse_stability(RunConfig& cfg, Section s) {
    StabilitySection& st = cfg.stability;
    const auto r2 = s.raw("r2");
    if (r2 && !(r2->IsScalar() && r2->Scalar() == "auto")) st.r2 = Section::convert<double>(*r2, s.field("r2"));
    else if (!r2 && cfg.model != ModelKind::logit) st.r2 = 0.5;
    st.n_dirs = s.get<Index>("n_dirs", st.n_dirs);
    st.direction_seed = s.get<std::uint64_t>("direction_seed", st.direction_seed);
    s.finish();
    if (st.r2 && !(*st.r2 >= 0.0 && std::isfinite(*st.r2))) throw ConfigError(s.field("r2") + ": must be >= 0");
    if (!st.r2 && cfg.model != ModelKind::logit)
        throw ConfigError(s.field("r2") + ": auto is defined for the logistic model only");
    positive_count(st.n_dirs, s.field("n_dirs"), 0);
}

inline void parse_check(RunConfig& cfg, Section s) {
    CheckSection& c = cfg.checks;
    c.slope_min = s.maybe<double>("slope_min");
    c.slope_max = s.maybe<double>("slope_max");
    c.defect_max = s.maybe<double>("defect_max");
    c.defect_min = s.maybe<double>("defect_min");
    c.kappa_min = s.maybe<double>("kappa_min");
    c.K_max = s.maybe<double>("K_max");
    c.slope_tol = s.get<double>("slope_tol", c.slope_tol);
    c.const_tol = s.get<double>("const_tol", c.const_tol);
    s.finish();
    if (!(c.slope_tol > 0.0)) throw ConfigError(s.field("slope_tol") + ": must be positive");
    if (!(c.const_tol > 0.0)) throw ConfigError(s.field("const_tol") + ": must be positive");
}

} // namespace detail

/// Parses and fully validates the file; nothing is computed here beyond the
/// seeded DGP coefficients.
inline void load_config(RunConfig& cfg) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(cfg.config_path.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError("--config: cannot read " + cfg.config_path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError(cfg.config_path.string() + ": " + e.what());
    }
    Section top(root, "");

    const auto model = top.get<std::string>("model", "plm");
    if (model == "plm") cfg.model = ModelKind::plm;
    else if (model == "logit") cfg.model = ModelKind::logit;
    else throw ConfigError("model: unknown model '" + model + "' (plm, logit)");
    cfg.orthogonal = top.get<bool>("orthogonal", true);
    if (!cfg.orthogonal && cfg.model != ModelKind::plm)
        throw ConfigError("orthogonal: false is only defined for model plm");
    const auto seed = top.maybe<std::uint64_t>("seed");
    if (seed && !cfg.seed_overridden) cfg.seed = *seed;

    detail::parse_dgp(cfg, top.child("dgp"));
    detail::parse_nuisance(cfg, top.child("nuisance"));
    detail::parse_solver(cfg, top.child("solver"));
    detail::parse_fit(cfg, top.child("fit"));
    detail::parse_sweep(cfg, top.child("sweep"));
    detail::parse_effdim(cfg, top.child("effdim"));
    detail::parse_orthcheck(cfg, top.child("orthcheck"));
    detail::parse_stability(cfg, top.child("stability"));
    detail::parse_check(cfg, top.child("check"));
    top.finish();
}

} // namespace osl::cli

#endif
