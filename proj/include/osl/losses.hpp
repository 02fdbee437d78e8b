#ifndef OSL_LOSSES_HPP
#define OSL_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include "osl/linalg.hpp"
#include "osl/logit.hpp"
#include "osl/plm.hpp"

namespace osl {

/// Smallest R >= 0 with
///   exp(-R |b - a|) H(a) <= H(b) <= exp(R |b - a|) H(a)
/// for the probe-averaged Hessians at theta_a and theta_b.
[[nodiscard]] inline double self_concordance_ratio(const LossModel& model, const Vector& theta_a,
                                                   const Vector& theta_b, const NuisanceFn& g,
                                                   const SampleBatch& probes) {
    require(!probes.empty(), "self_concordance_ratio: probes must be nonempty");
    require(theta_a.size() == model.dim() && theta_b.size() == model.dim(),
            "self_concordance_ratio: theta dimension mismatch");
    const RowMatrix gv = g.evaluate_all(probes.covariates());
    const Matrix ha = empirical_moments(model, theta_a, gv, probes).hessian;
    const Matrix hb = empirical_moments(model, theta_b, gv, probes).hessian;
    const double dist = (theta_b - theta_a).norm();
    const Vector lam = linalg::generalized_eigenvalues(hb, ha);
    if (dist == 0.0) return 0.0;
    if (!(lam.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
    const double worst = std::max(std::abs(std::log(lam.minCoeff())), std::abs(std::log(lam.maxCoeff())));
    return worst / dist;
}

} // namespace osl

#endif
