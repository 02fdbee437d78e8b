#ifndef OSL_SOLVER_HPP
#define OSL_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "osl/linalg.hpp"

namespace osl {

template <class F>
concept RiskOracle = requires(const F& f, const Vector& x) {
    { f.value(x) } -> std::convertible_to<double>;
    { f.gradient(x) } -> std::convertible_to<Vector>;
    { f.hessian(x) } -> std::convertible_to<Matrix>;
};

struct SolverOptions {
    int max_iterations = 100;
    double decrement_tol = 1e-10; ///< stop when the squared Newton decrement falls below this
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;
    /// 0 disables the diagonal shift: a singular Hessian is an error. A positive
    /// value enables escalation from max(floor, 1e-10) by factors of 10 up to 1e-2.
    double levenberg_floor = 0.0;
    int max_backtracks = 60;

    void validate() const {
        require(max_iterations >= 1, "SolverOptions: max_iterations must be >= 1");
        require(decrement_tol > 0.0, "SolverOptions: decrement_tol must be positive");
        require(shrink > 0.0 && shrink < 1.0, "SolverOptions: shrink must lie in (0, 1)");
        require(sufficient_decrease > 0.0 && sufficient_decrease < 0.5,
                "SolverOptions: sufficient_decrease must lie in (0, 0.5)");
        require(levenberg_floor >= 0.0, "SolverOptions: levenberg_floor must be >= 0");
        require(max_backtracks >= 1, "SolverOptions: max_backtracks must be >= 1");
    }
};

enum class Termination { converged, max_iterations, line_search_failure };

[[nodiscard]] inline const char* to_string(Termination t) {
    switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iterations: return "max_iterations";
    case Termination::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

struct FitReport {
    Vector theta_hat;
    int iterations = 0; ///< accepted Newton steps
    double final_decrement = 0.0;
    Termination termination = Termination::max_iterations;
    std::vector<double> objective_trace;
};

/// sqrt(S^T H^{-1} S) for SPD H.
[[nodiscard]] inline double newton_decrement(const Vector& score, const Matrix& hessian) {
    require(score.size() == hessian.rows(), "newton_decrement: dimension mismatch");
    const auto llt = linalg::spd_factor(hessian, "newton_decrement");
    return std::sqrt(std::max(0.0, score.dot(llt.solve(score))));
}

namespace detail {

[[nodiscard]] inline Eigen::LLT<Matrix> factor_with_shift(const Matrix& h, const SolverOptions& opts) {
    if (linalg::is_spd(h)) return Eigen::LLT<Matrix>(h);
    if (opts.levenberg_floor > 0.0) {
        for (double shift = std::max(opts.levenberg_floor, 1e-10); shift <= 1e-2 * (1.0 + 1e-12); shift *= 10.0) {
            Matrix shifted = h;
            shifted.diagonal().array() += shift;
            if (linalg::is_spd(shifted)) return Eigen::LLT<Matrix>(shifted);
        }
    }
    throw NumericDomainError("newton_minimize: Hessian is singular or indefinite" +
                             std::string(opts.levenberg_floor > 0.0 ? " after diagonal shifts up to 1e-2" : ""));
}

} // namespace detail

/// Damped Newton with Armijo backtracking on the objective value.
template <RiskOracle F>
[[nodiscard]] FitReport newton_minimize(const F& objective, const Vector& theta_init, const SolverOptions& opts = {}) {
    opts.validate();
    FitReport rep;
    rep.theta_hat = theta_init;
    double f = objective.value(rep.theta_hat);
    if (!std::isfinite(f)) throw NumericDomainError("newton_minimize: objective is not finite at theta_init");
    rep.objective_trace.push_back(f);

    for (int it = 0;; ++it) {
        const Vector grad = objective.gradient(rep.theta_hat);
        const Matrix hess = objective.hessian(rep.theta_hat);
        if (!grad.allFinite() || !hess.allFinite())
            throw NumericDomainError("newton_minimize: non-finite gradient or Hessian");
        const auto llt = detail::factor_with_shift(hess, opts);
        const Vector step = -llt.solve(grad);
        const double dec2 = std::max(0.0, -grad.dot(step));
        rep.final_decrement = std::sqrt(dec2);
        if (dec2 <= opts.decrement_tol) {
            rep.termination = Termination::converged;
            return rep;
        }
        if (it >= opts.max_iterations) {
            rep.termination = Termination::max_iterations;
            return rep;
        }

        double t = 1.0;
        bool accepted = false;
        for (int b = 0; b < opts.max_backtracks; ++b, t *= opts.shrink) {
            const Vector trial = rep.theta_hat + t * step;
            const double ft = objective.value(trial);
            // non-finite values count as rejections
            if (std::isfinite(ft) && ft <= f - opts.sufficient_decrease * t * dec2) {
                rep.theta_hat = trial;
                f = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            rep.termination = Termination::line_search_failure;
            return rep;
        }
        rep.objective_trace.push_back(f);
        ++rep.iterations;
    }
}

} // namespace osl

#endif
