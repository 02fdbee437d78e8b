#ifndef OSL_MODEL_HPP
#define OSL_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "osl/core.hpp"

namespace osl {

/// A loss l(theta, g; z) with its theta-score and theta-Hessian, evaluated
/// per sample. The nuisance enters through its values at the sample's
/// covariates, so callers may evaluate g once and reuse the values.
///
/// Population oracles L, S, H, G are optional; models bound to a known
/// data-generating process override them, the rest throw UnsupportedOperation.
class LossModel {
public:
    virtual ~LossModel() = default;

    [[nodiscard]] virtual std::string_view name() const = 0;
    [[nodiscard]] virtual Index dim() const = 0;
    [[nodiscard]] virtual Index nuisance_dim() const = 0;
    /// Pseudo self-concordance parameter R of l(., g; z).
    [[nodiscard]] virtual double self_concordance() const = 0;

    [[nodiscard]] virtual double loss(const Vector& theta, ConstRow gz, const SampleView& z) const = 0;
    virtual void score(const Vector& theta, ConstRow gz, const SampleView& z, Eigen::Ref<Vector> out) const = 0;
    virtual void hessian(const Vector& theta, ConstRow gz, const SampleView& z, Eigen::Ref<Matrix> out) const = 0;

    [[nodiscard]] virtual bool has_population() const { return false; }
    [[nodiscard]] virtual double population_risk(const Vector&, const NuisanceFn&) const { return unsupported<double>(); }
    [[nodiscard]] virtual Vector population_score(const Vector&, const NuisanceFn&) const { return unsupported<Vector>(); }
    [[nodiscard]] virtual Matrix population_hessian(const Vector&, const NuisanceFn&) const { return unsupported<Matrix>(); }
    [[nodiscard]] virtual Matrix population_score_cov(const Vector&, const NuisanceFn&) const { return unsupported<Matrix>(); }
    /// Target theta_star and true nuisance g0 of the bound process.
    [[nodiscard]] virtual Vector theta_star() const { return unsupported<Vector>(); }
    [[nodiscard]] virtual NuisanceFn true_nuisance() const { return unsupported<NuisanceFn>(); }

    /// E(theta, g0) = L(theta, g0) - L(theta_star, g0) from the population risk oracle.
    [[nodiscard]] double population_excess_risk(const Vector& theta) const {
        const NuisanceFn g0 = true_nuisance();
        return population_risk(theta, g0) - population_risk(theta_star(), g0);
    }
    /// Ground-truth excess risk; models with a closed form override this.
    [[nodiscard]] virtual double excess_risk(const Vector& theta) const { return population_excess_risk(theta); }

    // Convenience overloads that evaluate the nuisance at z first.
    [[nodiscard]] double loss(const Vector& theta, const NuisanceFn& g, const SampleView& z) const {
        const Vector gz = g(z.covariates);
        return loss(theta, span_of(gz), z);
    }
    [[nodiscard]] Vector score(const Vector& theta, const NuisanceFn& g, const SampleView& z) const {
        const Vector gz = g(z.covariates);
        Vector s(dim());
        score(theta, span_of(gz), z, s);
        return s;
    }
    [[nodiscard]] Matrix hessian(const Vector& theta, const NuisanceFn& g, const SampleView& z) const {
        const Vector gz = g(z.covariates);
        Matrix h(dim(), dim());
        hessian(theta, span_of(gz), z, h);
        return h;
    }

    [[nodiscard]] static ConstRow span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

protected:
    template <class T>
    [[noreturn]] T unsupported() const {
        throw UnsupportedOperation(std::string(name()) + ": population oracles need a bound data-generating process");
    }
};

/// S_n, H_n and the centered score covariance G_n over a batch.
struct EmpiricalMoments {
    Vector score;
    Matrix hessian;
    Matrix score_cov;
    Index n_used = 0;
};

namespace detail {

inline void check_inputs(const LossModel& model, const Vector& theta, const NuisanceFn& g, const SampleBatch& batch) {
    require(theta.size() == model.dim(), "theta has length " + std::to_string(theta.size()) + ", model expects " +
                                             std::to_string(model.dim()));
    require(g.output_dim() == model.nuisance_dim(), "nuisance output dimension does not match the model");
    require(!batch.empty(), "batch is empty");
    require(batch.d() == model.dim(), "batch target dimension does not match the model");
}

inline ConstRow row_of(const RowMatrix& m, Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

} // namespace detail

/// Mean loss L_n(theta, g) using precomputed nuisance values (one row per sample).
[[nodiscard]] inline double empirical_risk(const LossModel& model, const Vector& theta, const RowMatrix& gvals,
                                           const SampleBatch& batch) {
    double sum = 0.0;
    for (Index i = 0; i < batch.n(); ++i) {
        const double v = model.loss(theta, detail::row_of(gvals, i), batch[i]);
        if (!std::isfinite(v)) throw NumericDomainError(std::string(model.name()) + ": non-finite loss", i);
        sum += v;
    }
    return sum / static_cast<double>(batch.n());
}

[[nodiscard]] inline double empirical_risk(const LossModel& model, const Vector& theta, const NuisanceFn& g,
                                           const SampleBatch& batch) {
    detail::check_inputs(model, theta, g, batch);
    return empirical_risk(model, theta, g.evaluate_all(batch.covariates()), batch);
}

[[nodiscard]] inline EmpiricalMoments empirical_moments(const LossModel& model, const Vector& theta,
                                                        const RowMatrix& gvals, const SampleBatch& batch) {
    const Index d = model.dim();
    const Index n = batch.n();
    Matrix scores(d, n);
    EmpiricalMoments m;
    m.hessian = Matrix::Zero(d, d);
    Matrix h(d, d);
    for (Index i = 0; i < n; ++i) {
        const auto z = batch[i];
        const ConstRow gz = detail::row_of(gvals, i);
        model.score(theta, gz, z, scores.col(i));
        model.hessian(theta, gz, z, h);
        if (!scores.col(i).allFinite() || !h.allFinite())
            throw NumericDomainError(std::string(model.name()) + ": non-finite score or Hessian", i);
        m.hessian += h;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    m.score = scores.rowwise().sum() * inv_n;
    m.hessian *= inv_n;
    m.hessian = 0.5 * (m.hessian + m.hessian.transpose());
    const Matrix centered = scores.colwise() - m.score;
    m.score_cov = centered * centered.transpose() * inv_n;
    m.score_cov = 0.5 * (m.score_cov + m.score_cov.transpose());
    m.n_used = n;
    return m;
}

[[nodiscard]] inline EmpiricalMoments empirical_moments(const LossModel& model, const Vector& theta,
                                                        const NuisanceFn& g, const SampleBatch& batch) {
    detail::check_inputs(model, theta, g, batch);
    return empirical_moments(model, theta, g.evaluate_all(batch.covariates()), batch);
}

/// Pooled moments of two disjoint batches from their per-batch moments.
/// Score covariance uses the pooled-centering identity
///   n G = n_a (G_a + (s_a - s)(s_a - s)^T) + n_b (G_b + (s_b - s)(s_b - s)^T).
[[nodiscard]] inline EmpiricalMoments pool_moments(const EmpiricalMoments& a, const EmpiricalMoments& b) {
    const double na = static_cast<double>(a.n_used);
    const double nb = static_cast<double>(b.n_used);
    const double n = na + nb;
    EmpiricalMoments m;
    m.n_used = a.n_used + b.n_used;
    m.score = (na * a.score + nb * b.score) / n;
    m.hessian = (na * a.hessian + nb * b.hessian) / n;
    const Vector da = a.score - m.score;
    const Vector db = b.score - m.score;
    m.score_cov = (na * (a.score_cov + da * da.transpose()) + nb * (b.score_cov + db * db.transpose())) / n;
    return m;
}

/// Max over coordinates of |central difference of l - analytic score| at z.
[[nodiscard]] inline double check_gradient_consistency(const LossModel& model, const Vector& theta,
                                                       const NuisanceFn& g, const SampleView& z, double h = 1e-5) {
    require(h > 0.0, "check_gradient_consistency: h must be positive");
    require(theta.size() == model.dim(), "check_gradient_consistency: theta dimension mismatch");
    const Vector gz = g(z.covariates);
    const ConstRow gs = LossModel::span_of(gz);
    Vector s(model.dim());
    model.score(theta, gs, z, s);
    double worst = 0.0;
    Vector tp = theta;
    for (Index k = 0; k < theta.size(); ++k) {
        tp[k] = theta[k] + h;
        const double fp = model.loss(tp, gs, z);
        tp[k] = theta[k] - h;
        const double fm = model.loss(tp, gs, z);
        tp[k] = theta[k];
        worst = std::max(worst, std::abs((fp - fm) / (2.0 * h) - s[k]));
    }
    return worst;
}

/// Relative derivative errors at one probe, denominators floored at 1.
struct DerivativeCheck {
    double score_rel_error = 0.0;
    double hessian_rel_error = 0.0;
};

[[nodiscard]] inline DerivativeCheck check_derivatives(const LossModel& model, const Vector& theta,
                                                       const NuisanceFn& g, const SampleView& z, double h = 1e-5) {
    require(h > 0.0, "check_derivatives: h must be positive");
    const Index d = model.dim();
    const Vector gz = g(z.covariates);
    const ConstRow gs = LossModel::span_of(gz);
    Vector s(d);
    Matrix hess(d, d);
    model.score(theta, gs, z, s);
    model.hessian(theta, gs, z, hess);

    DerivativeCheck out;
    Vector tp = theta;
    Vector sp(d), sm(d);
    for (Index k = 0; k < d; ++k) {
        tp[k] = theta[k] + h;
        const double fp = model.loss(tp, gs, z);
        model.score(tp, gs, z, sp);
        tp[k] = theta[k] - h;
        const double fm = model.loss(tp, gs, z);
        model.score(tp, gs, z, sm);
        tp[k] = theta[k];
        const double fd = (fp - fm) / (2.0 * h);
        out.score_rel_error = std::max(out.score_rel_error, std::abs(fd - s[k]) / std::max(1.0, std::abs(s[k])));
        const Vector col = (sp - sm) / (2.0 * h);
        for (Index j = 0; j < d; ++j) {
            out.hessian_rel_error = std::max(out.hessian_rel_error,
                                             std::abs(col[j] - hess(j, k)) / std::max(1.0, std::abs(hess(j, k))));
        }
    }
    return out;
}

/// L_n(., g) over a fixed batch with the nuisance evaluated once; satisfies
/// the solver's risk-oracle contract.
class EmpiricalObjective {
public:
    EmpiricalObjective(const LossModel& model, const NuisanceFn& g, const SampleBatch& batch)
        : model_(&model), batch_(&batch) {
        require(g.output_dim() == model.nuisance_dim(), "EmpiricalObjective: nuisance dimension mismatch");
        require(!batch.empty() && batch.d() == model.dim(), "EmpiricalObjective: batch does not match the model");
        gvals_ = g.evaluate_all(batch.covariates());
    }

    [[nodiscard]] Index dim() const { return model_->dim(); }

    [[nodiscard]] double value(const Vector& theta) const { return empirical_risk(*model_, theta, gvals_, *batch_); }

    [[nodiscard]] Vector gradient(const Vector& theta) const {
        Vector total = Vector::Zero(dim());
        Vector s(dim());
        for (Index i = 0; i < batch_->n(); ++i) {
            model_->score(theta, detail::row_of(gvals_, i), (*batch_)[i], s);
            total += s;
        }
        return total / static_cast<double>(batch_->n());
    }

    [[nodiscard]] Matrix hessian(const Vector& theta) const {
        Matrix total = Matrix::Zero(dim(), dim());
        Matrix h(dim(), dim());
        for (Index i = 0; i < batch_->n(); ++i) {
            model_->hessian(theta, detail::row_of(gvals_, i), (*batch_)[i], h);
            total += h;
        }
        return total / static_cast<double>(batch_->n());
    }

    [[nodiscard]] EmpiricalMoments moments(const Vector& theta) const {
        return empirical_moments(*model_, theta, gvals_, *batch_);
    }

private:
    const LossModel* model_;
    const SampleBatch* batch_;
    RowMatrix gvals_;
};

} // namespace osl

#endif
