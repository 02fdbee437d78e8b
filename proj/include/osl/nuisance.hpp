#ifndef OSL_NUISANCE_HPP
#define OSL_NUISANCE_HPP

#include <algorithm>
#include <random>
#include <string>

#include "osl/basis.hpp"
#include "osl/linalg.hpp"
#include "osl/logit.hpp"
#include "osl/solver.hpp"

namespace osl {

enum class ModelKind { plm, plm_nonorth, logit };

[[nodiscard]] inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::plm: return "plm";
    case ModelKind::plm_nonorth: return "plm_nonorth";
    case ModelKind::logit: return "logit";
    }
    return "unknown";
}

struct NuisanceConfig {
    BasisKind basis = BasisKind::trigonometric;
    int degree = 2;
    double ridge_penalty = 1e-8;
    Index probe_count = 10000;

    void validate() const {
        require(degree >= 0, "NuisanceConfig: degree must be >= 0");
        require(ridge_penalty >= 0.0, "NuisanceConfig: ridge_penalty must be >= 0");
        require(probe_count >= 1, "NuisanceConfig: probe_count must be >= 1");
    }
};

/// Uniform draws on [-1, 1]^p, the covariate support of both built-in processes.
[[nodiscard]] inline RowMatrix covariate_probes(Index p, Index count, std::uint64_t seed) {
    require(p >= 1 && count >= 1, "covariate_probes: dimensions must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    RowMatrix x(count, p);
    for (Index i = 0; i < count; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = unif(rng);
    return x;
}

/// max over probes of ||g_a(x) - g_b(x)||_2; a lower bound on the sup-norm.
[[nodiscard]] inline double sup_norm_distance(const NuisanceFn& g_a, const NuisanceFn& g_b, const RowMatrix& probes) {
    require(probes.rows() >= 1, "sup_norm_distance: probes must be nonempty");
    require(g_a.output_dim() == g_b.output_dim(), "sup_norm_distance: output dimension mismatch");
    const RowMatrix diff = g_a.evaluate_all(probes) - g_b.evaluate_all(probes);
    return diff.rowwise().norm().maxCoeff();
}

/// g0 + amplitude * h, h a seeded unit-sup-norm trigonometric direction.
[[nodiscard]] inline NuisanceFn corrupt_oracle(const NuisanceFn& g0, double amplitude, std::uint64_t direction_seed,
                                               Index covariate_dim) {
    require(amplitude >= 0.0, "corrupt_oracle: amplitude must be >= 0");
    const NuisanceFn h = trig_direction(g0.output_dim(), covariate_dim, direction_seed);
    return NuisanceFn::add_scaled(g0, amplitude, h, NuisanceFn::Kind::corrupted);
}

namespace detail {

[[nodiscard]] inline Vector ridge_solve(const RowMatrix& phi, const Vector& y, double lambda) {
    const double n = static_cast<double>(phi.rows());
    Matrix gram = phi.transpose() * phi / n;
    // column 0 of both bases is the constant; it stays unpenalized
    for (Index j = 1; j < gram.rows(); ++j) gram(j, j) += lambda;
    try {
        const auto llt = linalg::spd_factor(gram, "ridge normal equations");
        return llt.solve(phi.transpose() * y / n);
    } catch (const NumericDomainError&) {
        throw NumericDomainError("fit_first_stage: singular normal equations (" + std::to_string(phi.rows()) +
                                 " samples, " + std::to_string(phi.cols()) +
                                 " features); set ridge_penalty > 0");
    }
}

/// Ridge-penalized logistic regression on fixed features.
class PenalizedLogistic {
public:
    PenalizedLogistic(const RowMatrix& f, const Vector& y, double lambda, Index first_penalized_skip)
        : f_(f), y_(y), lambda_(lambda), skip_(first_penalized_skip) {}

    [[nodiscard]] double value(const Vector& b) const {
        const Vector m = f_ * b;
        double s = 0.0;
        for (Index i = 0; i < m.size(); ++i) s += softplus(-y_[i] * m[i]);
        return s / static_cast<double>(m.size()) + 0.5 * lambda_ * penalized(b).squaredNorm();
    }

    [[nodiscard]] Vector gradient(const Vector& b) const {
        const Vector m = f_ * b;
        Vector c(m.size());
        for (Index i = 0; i < m.size(); ++i) c[i] = sigmoid(m[i]) - 0.5 - 0.5 * y_[i];
        Vector g = f_.transpose() * c / static_cast<double>(m.size());
        g += lambda_ * penalized(b);
        return g;
    }

    [[nodiscard]] Matrix hessian(const Vector& b) const {
        const Vector m = f_ * b;
        const Vector w = m.unaryExpr([](double e) {
            const double s = sigmoid(e);
            return s * (1.0 - s);
        });
        const RowMatrix fw = f_.array().colwise() * w.array();
        Matrix h = f_.transpose() * fw / static_cast<double>(m.size());
        for (Index j = 0; j < h.rows(); ++j)
            if (j != skip_) h(j, j) += lambda_;
        return linalg::symmetrize(h);
    }

private:
    [[nodiscard]] Vector penalized(const Vector& b) const {
        Vector p = b;
        p[skip_] = 0.0;
        return p;
    }

    const RowMatrix& f_;
    const Vector& y_;
    double lambda_;
    Index skip_;
};

} // namespace detail

/// First stage of the two-stage estimator, fitted on the second split.
///
/// plm: ridge of each D_k and of Y on basis(X), giving (zeta_hat, alpha_hat).
/// logit: ridge logistic regression of Y on [X, basis(W)]; the X block is
/// discarded and g_hat(w) = basis(w)^T beta.
[[nodiscard]] inline NuisanceFn fit_first_stage(ModelKind kind, const SampleBatch& batch2, const NuisanceConfig& cfg) {
    cfg.validate();
    require(!batch2.empty(), "fit_first_stage: batch is empty");
    FeatureMap fm(cfg.basis, cfg.degree, batch2.p());
    const RowMatrix phi = fm.design(batch2.covariates());
    const Index d = batch2.d();

    switch (kind) {
    case ModelKind::plm: {
        Matrix coefs(1 + d, fm.size());
        coefs.row(0) = detail::ridge_solve(phi, batch2.outcomes(), cfg.ridge_penalty).transpose();
        for (Index k = 0; k < d; ++k)
            coefs.row(1 + k) = detail::ridge_solve(phi, batch2.targets().col(k), cfg.ridge_penalty).transpose();
        return linear_in_features(std::move(fm), std::move(coefs), NuisanceFn::Kind::fitted);
    }
    case ModelKind::logit: {
        RowMatrix f(batch2.n(), d + fm.size());
        f.leftCols(d) = batch2.targets();
        f.rightCols(fm.size()) = phi;
        const detail::PenalizedLogistic obj(f, batch2.outcomes(), cfg.ridge_penalty, d);
        FitReport rep;
        try {
            rep = newton_minimize(obj, Vector::Zero(f.cols()));
        } catch (const NumericDomainError& e) {
            throw NumericDomainError(std::string("fit_first_stage: ") + e.what() + "; set ridge_penalty > 0");
        }
        if (rep.termination != Termination::converged)
            throw NumericDomainError(std::string("fit_first_stage: logistic first stage did not converge (") +
                                     to_string(rep.termination) + ")");
        Matrix coefs = rep.theta_hat.tail(fm.size()).transpose();
        return linear_in_features(std::move(fm), std::move(coefs), NuisanceFn::Kind::fitted);
    }
    case ModelKind::plm_nonorth:
        break;
    }
    throw UnsupportedOperation("fit_first_stage: the unresidualized PLM has no first-stage learner "
                               "(its gamma nuisance depends on theta0)");
}

} // namespace osl

#endif
