#ifndef OSL_ORTHOGONALIZE_HPP
#define OSL_ORTHOGONALIZE_HPP

#include <cmath>
#include <vector>

#include "osl/basis.hpp"
#include "osl/linalg.hpp"
#include "osl/model.hpp"

namespace osl {

/// S_theta - gamma S_beta with gamma = cross_hessian * beta_hessian^{-1}.
///
/// cross_hessian is d x m (grad_theta grad_beta L), beta_hessian m x m SPD.
[[nodiscard]] inline Vector orthogonal_score(const Vector& s_theta, const Vector& s_beta, const Matrix& cross_hessian,
                                             const Matrix& beta_hessian) {
    require(cross_hessian.rows() == s_theta.size() && cross_hessian.cols() == s_beta.size() &&
                beta_hessian.rows() == s_beta.size() && beta_hessian.cols() == s_beta.size(),
            "orthogonal_score: inconsistent dimensions");
    const auto llt = linalg::spd_factor(beta_hessian, "orthogonal_score: beta Hessian");
    return s_theta - cross_hessian * llt.solve(s_beta);
}

/// A perturbation direction in nuisance space with its sup-norm.
struct NuisanceDirection {
    NuisanceFn fn;
    double sup_norm;
};

/// Seeded unit-sup-norm trigonometric directions (the corrupt_oracle family).
[[nodiscard]] inline std::vector<NuisanceDirection> trig_directions(Index output_dim, Index covariate_dim,
                                                                    Index count, std::uint64_t seed) {
    std::vector<NuisanceDirection> dirs;
    dirs.reserve(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) {
        // consecutive seeds through a splitmix step keep the family nested in count
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        dirs.push_back({trig_direction(output_dim, covariate_dim, z ^ (z >> 31)), 1.0});
    }
    return dirs;
}

[[nodiscard]] inline std::vector<Vector> coordinate_directions(Index d) {
    std::vector<Vector> dirs;
    for (Index k = 0; k < d; ++k) dirs.push_back(Vector::Unit(d, k));
    return dirs;
}

/// max over (u, k) of |D_g D_theta L(theta_star, g0)[u, k]| / (|u|_2 |k|_G),
/// by the 4-point central stencil on the population risk with step h in both
/// the theta direction and the nuisance amplitude.
[[nodiscard]] inline double orthogonality_defect(const LossModel& model, const Vector& theta_star,
                                                 const NuisanceFn& g0, const std::vector<Vector>& theta_dirs,
                                                 const std::vector<NuisanceDirection>& g_dirs, double h = 1e-4) {
    require(h > 0.0, "orthogonality_defect: h must be positive");
    if (!model.has_population())
        throw UnsupportedOperation("orthogonality_defect: model has no population risk oracle");
    require(theta_star.size() == model.dim(), "orthogonality_defect: theta dimension mismatch");
    double worst = 0.0;
    for (const auto& k : g_dirs) {
        if (k.sup_norm == 0.0) continue;
        const NuisanceFn gp = NuisanceFn::add_scaled(g0, h, k.fn, NuisanceFn::Kind::corrupted);
        const NuisanceFn gm = NuisanceFn::add_scaled(g0, -h, k.fn, NuisanceFn::Kind::corrupted);
        for (const auto& u : theta_dirs) {
            require(u.size() == model.dim(), "orthogonality_defect: direction dimension mismatch");
            const double un = u.norm();
            if (un == 0.0) continue;
            const Vector tp = theta_star + h * u;
            const Vector tm = theta_star - h * u;
            const double mixed = (model.population_risk(tp, gp) - model.population_risk(tp, gm) -
                                  model.population_risk(tm, gp) + model.population_risk(tm, gm)) /
                                 (4.0 * h * h);
            worst = std::max(worst, std::abs(mixed) / (un * k.sup_norm));
        }
    }
    return worst;
}

} // namespace osl

#endif
