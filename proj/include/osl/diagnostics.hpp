#ifndef OSL_DIAGNOSTICS_HPP
#define OSL_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "osl/linalg.hpp"
#include "osl/model.hpp"
#include "osl/orthogonalize.hpp"
#include "osl/stats.hpp"

namespace osl {

/// Tr(H^{-1/2} G H^{-1/2}), evaluated as Tr(L^{-1} G L^{-T}) with H = L L^T.
[[nodiscard]] inline double effective_dimension(const Matrix& G, const Matrix& H) {
    require(G.rows() == H.rows() && G.cols() == H.cols() && G.rows() == G.cols(),
            "effective_dimension: G and H must be square with equal dimensions");
    const auto llt = linalg::spd_factor(H, "effective_dimension: H");
    Matrix w = llt.matrixL().solve(G);
    w = llt.matrixL().solve(w.transpose()).transpose();
    return w.trace();
}

/// d^2 / lambda_min(H): the dimension factor of strongly-convex orthogonal bounds.
[[nodiscard]] inline double comparison_dimension(Index d, const Matrix& H) {
    require(d >= 1, "comparison_dimension: d must be >= 1");
    (void)linalg::spd_factor(H, "comparison_dimension: H");
    const double lmin = linalg::symmetric_eigenvalues(H).minCoeff();
    return static_cast<double>(d) * static_cast<double>(d) / lmin;
}

/// Max of effective_dimension(G(theta_star, g), H_star) over g0 and the seeded
/// boundary perturbations g0 + r2 h_k; a lower bound on the profile supremum.
[[nodiscard]] inline double profile_effective_dimension(const LossModel& model, const Vector& theta_star,
                                                        const NuisanceFn& g0, double r2, Index n_dirs,
                                                        std::uint64_t seed, Index covariate_dim) {
    require(r2 >= 0.0, "profile_effective_dimension: r2 must be >= 0");
    require(n_dirs >= 0, "profile_effective_dimension: n_dirs must be >= 0");
    if (!model.has_population())
        throw UnsupportedOperation("profile_effective_dimension: model has no population oracles");
    const Matrix h_star = model.population_hessian(theta_star, g0);
    double best = effective_dimension(model.population_score_cov(theta_star, g0), h_star);
    if (r2 == 0.0) return best;
    for (const auto& k : trig_directions(g0.output_dim(), covariate_dim, n_dirs, seed)) {
        const NuisanceFn g = NuisanceFn::add_scaled(g0, r2, k.fn, NuisanceFn::Kind::corrupted);
        best = std::max(best, effective_dimension(model.population_score_cov(theta_star, g), h_star));
    }
    return best;
}

struct StabilityReport {
    double kappa_hat = 1.0;
    double K_hat = 1.0;
    Index samples_used = 0;
};

/// Extreme generalized eigenvalues of (H(theta_star, g), H_star) over g0 and
/// seeded perturbations at radius r2: kappa H_star <= H(theta_star, g) <= K H_star.
[[nodiscard]] inline StabilityReport hessian_stability(const LossModel& model, const Vector& theta_star,
                                                       const NuisanceFn& g0, double r2, Index n_dirs,
                                                       std::uint64_t seed, Index covariate_dim) {
    require(r2 >= 0.0, "hessian_stability: r2 must be >= 0");
    require(n_dirs >= 0, "hessian_stability: n_dirs must be >= 0");
    if (!model.has_population()) throw UnsupportedOperation("hessian_stability: model has no population oracles");
    const Matrix h_star = model.population_hessian(theta_star, g0);
    (void)linalg::spd_factor(h_star, "hessian_stability: H_star");
    // g0 itself contributes exactly 1 to both ends
    StabilityReport rep;
    rep.samples_used = 1;
    if (r2 == 0.0) return rep;
    for (const auto& k : trig_directions(g0.output_dim(), covariate_dim, n_dirs, seed)) {
        const NuisanceFn g = NuisanceFn::add_scaled(g0, r2, k.fn, NuisanceFn::Kind::corrupted);
        const Vector lam = linalg::generalized_eigenvalues(model.population_hessian(theta_star, g), h_star);
        rep.kappa_hat = std::min(rep.kappa_hat, lam.minCoeff());
        rep.K_hat = std::max(rep.K_hat, lam.maxCoeff());
        ++rep.samples_used;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Eigendecay regimes for diagonal G, H sharing eigenvectors.

enum class DecayKind { poly_poly, poly_exp, exp_poly, exp_exp };

[[nodiscard]] inline const char* to_string(DecayKind k) {
    switch (k) {
    case DecayKind::poly_poly: return "poly_poly";
    case DecayKind::poly_exp: return "poly_exp";
    case DecayKind::exp_poly: return "exp_poly";
    case DecayKind::exp_exp: return "exp_exp";
    }
    return "unknown";
}

/// lambda_i(G) decays with rate g_rate, lambda_i(H) with h_rate:
/// polynomial i^{-rate} or exponential e^{-rate i} according to kind.
struct DecayRegime {
    DecayKind kind;
    double g_rate;
    double h_rate;

    [[nodiscard]] bool g_exponential() const { return kind == DecayKind::exp_poly || kind == DecayKind::exp_exp; }
    [[nodiscard]] bool h_exponential() const { return kind == DecayKind::poly_exp || kind == DecayKind::exp_exp; }

    [[nodiscard]] std::string label() const {
        auto fmt = [](double v) {
            std::string s = std::to_string(v);
            s.erase(s.find_last_not_of('0') + 1);
            if (!s.empty() && s.back() == '.') s.pop_back();
            return s;
        };
        return std::string(to_string(kind)) + "(" + fmt(g_rate) + "," + fmt(h_rate) + ")";
    }
};

struct EffDimReport {
    Index d = 0;
    double d_star = 0.0;
    double d_prime = 0.0;
    double ratio = 0.0;
    double log_d_star = 0.0; ///< exponential regimes overflow d_star; logs stay finite
    double log_d_prime = 0.0;
    Vector log_spectrum_g;
    Vector log_spectrum_h;
    DecayRegime regime;
};

[[nodiscard]] inline double log_eigenvalue(bool exponential, double rate, Index i) {
    const double x = static_cast<double>(i);
    return exponential ? -rate * x : -rate * std::log(x);
}

[[nodiscard]] inline std::vector<EffDimReport> eigendecay_regimes(const std::vector<Index>& d_grid,
                                                                  const DecayRegime& regime) {
    require(regime.g_rate > 0.0 && regime.h_rate > 0.0, "eigendecay_regimes: rates must be positive");
    for (std::size_t k = 0; k < d_grid.size(); ++k) {
        require(d_grid[k] >= 1, "eigendecay_regimes: dimensions must be >= 1");
        require(k == 0 || d_grid[k] > d_grid[k - 1], "eigendecay_regimes: d_grid must be increasing");
    }
    std::vector<EffDimReport> out;
    for (const Index d : d_grid) {
        EffDimReport r;
        r.d = d;
        r.regime = regime;
        r.log_spectrum_g.resize(d);
        r.log_spectrum_h.resize(d);
        for (Index i = 1; i <= d; ++i) {
            r.log_spectrum_g[i - 1] = log_eigenvalue(regime.g_exponential(), regime.g_rate, i);
            r.log_spectrum_h[i - 1] = log_eigenvalue(regime.h_exponential(), regime.h_rate, i);
        }
        // log sum_i exp(log g_i - log h_i)
        const Vector terms = r.log_spectrum_g - r.log_spectrum_h;
        const double top = terms.maxCoeff();
        r.log_d_star = top + std::log((terms.array() - top).exp().sum());
        r.log_d_prime = 2.0 * std::log(static_cast<double>(d)) - r.log_spectrum_h.minCoeff();
        r.d_star = std::exp(r.log_d_star);
        r.d_prime = std::exp(r.log_d_prime);
        r.ratio = std::exp(r.log_d_prime - r.log_d_star);
        out.push_back(std::move(r));
    }
    return out;
}

/// Order of growth a * log d + b * d (+ const) as tabulated for each regime.
/// constant marks entries tabulated as order 1.
struct GrowthOrder {
    double poly = 0.0;
    double exp_rate = 0.0;
    bool constant = false;
};

struct RegimeOrders {
    GrowthOrder d_star;
    GrowthOrder d_prime;
};

/// Tabulated orders of d_star and d' = d^2 / lambda_min(H). The poly-exp d_star
/// entry d^{-(alpha-1) v 1} e^{nu d} is an upper bound: the sum
/// sum_i i^{-alpha} e^{nu i} grows as d^{-alpha} e^{nu d}.
[[nodiscard]] inline RegimeOrders table_orders(const DecayRegime& r) {
    const double a = r.g_rate;
    const double b = r.h_rate;
    switch (r.kind) {
    case DecayKind::poly_poly: return {{std::max(b - a + 1.0, 0.0), 0.0, false}, {b + 2.0, 0.0, false}};
    case DecayKind::poly_exp: return {{std::max(1.0 - a, 1.0), b, false}, {2.0, b, false}};
    case DecayKind::exp_poly: return {{0.0, 0.0, true}, {b + 2.0, 0.0, false}};
    case DecayKind::exp_exp:
        if (a == b) return {{1.0, 0.0, false}, {2.0, b, false}};
        if (a > b) return {{0.0, 0.0, true}, {2.0, b, false}};
        return {{0.0, b - a, false}, {2.0, b, false}};
    }
    return {};
}

struct OrderCheck {
    GrowthOrder expected;
    double fitted_slope = 0.0; ///< of log q - exp_rate d on log d; unused for constant entries
    double variation = 0.0;    ///< max/min - 1 across the grid; used for constant entries
    bool pass = false;
};

struct RegimeCheck {
    std::string regime;
    OrderCheck d_star;
    OrderCheck d_prime;
    [[nodiscard]] bool pass() const { return d_star.pass && d_prime.pass; }
};

[[nodiscard]] inline OrderCheck check_order(const std::vector<double>& log_d, const std::vector<double>& d_values,
                                            const std::vector<double>& log_q, const GrowthOrder& expected,
                                            double slope_tol, double const_tol) {
    OrderCheck c;
    c.expected = expected;
    const auto [lo, hi] = std::minmax_element(log_q.begin(), log_q.end());
    c.variation = std::expm1(*hi - *lo);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < log_q.size(); ++i) pts.emplace_back(log_d[i], log_q[i] - expected.exp_rate * d_values[i]);
    c.fitted_slope = slope_fit(pts).slope;
    c.pass = expected.constant ? c.variation < const_tol : std::abs(c.fitted_slope - expected.poly) <= slope_tol;
    return c;
}

/// Compares computed d_star and d' growth against table_orders: after removing the
/// tabulated exponential factor, the log-log slope must be within slope_tol of the
/// tabulated power, and order-1 entries may vary by less than const_tol.
[[nodiscard]] inline RegimeCheck check_regime_orders(const std::vector<EffDimReport>& rows, const DecayRegime& regime,
                                                     double slope_tol = 0.3, double const_tol = 0.05) {
    require(rows.size() >= 3, "check_regime_orders: at least 3 dimensions are required");
    std::vector<double> log_d, d_values, ls, lp;
    for (const auto& r : rows) {
        log_d.push_back(std::log(static_cast<double>(r.d)));
        d_values.push_back(static_cast<double>(r.d));
        ls.push_back(r.log_d_star);
        lp.push_back(r.log_d_prime);
    }
    const RegimeOrders orders = table_orders(regime);
    RegimeCheck out;
    out.regime = regime.label();
    out.d_star = check_order(log_d, d_values, ls, orders.d_star, slope_tol, const_tol);
    out.d_prime = check_order(log_d, d_values, lp, orders.d_prime, slope_tol, const_tol);
    return out;
}

} // namespace osl

#endif
