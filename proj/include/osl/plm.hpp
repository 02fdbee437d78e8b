#ifndef OSL_PLM_HPP
#define OSL_PLM_HPP

#include <cmath>
#include <memory>
#include <random>
#include <string_view>

#include "osl/basis.hpp"
#include "osl/linalg.hpp"
#include "osl/model.hpp"

namespace osl {

/// Partially linear data-generating process
///   X ~ Uniform[-1, 1]^p,  D = alpha0(X) + U,  Y = theta0^T D + gamma0(X) + V,
/// so zeta0 = E[Y | X] = theta0^T alpha0 + gamma0. alpha0 and gamma0 are
/// additive trigonometric polynomials; U = sqrt(d) L s with s uniform on the
/// unit sphere and L L^T = Sigma_u, hence E[U U^T] = Sigma_u and
/// ||U||_2 <= sqrt(d lambda_max(Sigma_u)). V ~ N(0, sigma_v^2) independent of (X, U).
struct PlmDgp {
    Vector theta0;
    Matrix sigma_u;
    double sigma_v = 1.0;
    Index covariate_dim = 2;
    int trig_degree = 2;
    Matrix alpha_coefs; ///< d x features
    Vector gamma_coefs; ///< features
    Index oracle_draws = 200000;
    std::uint64_t oracle_seed = 0x5eed0bac1e;

    [[nodiscard]] Index d() const { return theta0.size(); }
    [[nodiscard]] FeatureMap features() const { return {BasisKind::trigonometric, trig_degree, covariate_dim}; }

    void validate() const {
        require(d() >= 1, "PlmDgp: theta0 must be nonempty");
        require(sigma_u.rows() == d() && sigma_u.cols() == d(), "PlmDgp: sigma_u must be d x d");
        require(sigma_u.isApprox(sigma_u.transpose(), 1e-12), "PlmDgp: sigma_u must be symmetric");
        require(sigma_v > 0.0 && std::isfinite(sigma_v), "PlmDgp: sigma_v must be positive");
        require(covariate_dim >= 1 && trig_degree >= 0, "PlmDgp: invalid covariate basis");
        require(alpha_coefs.rows() == d() && alpha_coefs.cols() == features().size(),
                "PlmDgp: alpha_coefs must be d x (1 + 2 * degree * p)");
        require(gamma_coefs.size() == features().size(), "PlmDgp: gamma_coefs has the wrong length");
        require(oracle_draws >= 1, "PlmDgp: oracle_draws must be >= 1");
        if (!linalg::is_spd(sigma_u)) throw NumericDomainError("PlmDgp: sigma_u is not positive definite");
    }

    /// zeta0 coefficients: theta0^T alpha0 + gamma0 in feature space.
    [[nodiscard]] Vector zeta_coefs() const { return alpha_coefs.transpose() * theta0 + gamma_coefs; }

    [[nodiscard]] double u_bound() const {
        return std::sqrt(static_cast<double>(d()) * linalg::symmetric_eigenvalues(sigma_u).maxCoeff());
    }

    /// (zeta0, alpha0): the nuisance of the residualized loss.
    [[nodiscard]] NuisanceFn reduced_form_nuisance() const {
        Matrix c(1 + d(), features().size());
        c.row(0) = zeta_coefs().transpose();
        c.bottomRows(d()) = alpha_coefs;
        return linear_in_features(features(), std::move(c), NuisanceFn::Kind::oracle);
    }

    /// (gamma0, alpha0): the nuisance of the unresidualized loss.
    [[nodiscard]] NuisanceFn structural_nuisance() const {
        Matrix c(1 + d(), features().size());
        c.row(0) = gamma_coefs.transpose();
        c.bottomRows(d()) = alpha_coefs;
        return linear_in_features(features(), std::move(c), NuisanceFn::Kind::oracle);
    }

    /// Seeded default: coefficients ~ coef_scale * N(0,1) / j on frequency j,
    /// Sigma_u Toeplitz with entries rho^|i-j|, theta0 entries alternating in sign.
    [[nodiscard]] static PlmDgp make_default(Index d, Index p = 2, std::uint64_t coef_seed = 7, double sigma_v = 1.0,
                                             double rho = 0.3, double coef_scale = 0.5, int degree = 2) {
        require(d >= 1 && p >= 1, "PlmDgp::make_default: dimensions must be >= 1");
        PlmDgp g;
        g.covariate_dim = p;
        g.trig_degree = degree;
        g.sigma_v = sigma_v;
        g.theta0.resize(d);
        for (Index k = 0; k < d; ++k) g.theta0[k] = (k % 2 == 0 ? 1.0 : -1.0) * (1.0 - 0.5 * static_cast<double>(k) / static_cast<double>(d));
        g.sigma_u.resize(d, d);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) g.sigma_u(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
        const Index m = g.features().size();
        std::mt19937_64 rng(coef_seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto draw = [&](Index f) {
            // feature f > 0 belongs to frequency j = ((f - 1) % (2 * degree)) / 2 + 1
            if (f == 0) return coef_scale * normal(rng);
            const double j = static_cast<double>(((f - 1) % (2 * degree)) / 2 + 1);
            return coef_scale * normal(rng) / j;
        };
        g.alpha_coefs.resize(d, m);
        for (Index k = 0; k < d; ++k)
            for (Index f = 0; f < m; ++f) g.alpha_coefs(k, f) = draw(f);
        g.gamma_coefs.resize(m);
        for (Index f = 0; f < m; ++f) g.gamma_coefs[f] = draw(f);
        g.validate();
        return g;
    }
};

/// Draws n observations; deterministic in seed.
[[nodiscard]] inline SampleBatch sample(const PlmDgp& dgp, Index n, std::uint64_t seed) {
    require(n >= 1, "sample: n must be >= 1");
    const Index d = dgp.d();
    const Index p = dgp.covariate_dim;
    const FeatureMap fm = dgp.features();
    const Matrix chol = Eigen::LLT<Matrix>(dgp.sigma_u).matrixL();
    const double sqrt_d = std::sqrt(static_cast<double>(d));
    const Vector zeta_c = dgp.zeta_coefs();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Vector y(n);
    RowMatrix t(n, d);
    RowMatrix x(n, p);
    Vector phi(fm.size());
    Vector s(d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = unif(rng);
        do {
            for (Index k = 0; k < d; ++k) s[k] = normal(rng);
        } while (s.norm() == 0.0);
        s /= s.norm();
        const Vector u = sqrt_d * (chol * s);
        const double v = dgp.sigma_v * normal(rng);
        fm.evaluate({x.data() + i * p, static_cast<std::size_t>(p)}, phi.data());
        t.row(i) = (dgp.alpha_coefs * phi + u).transpose();
        // Y = zeta0(X) + theta0^T U + V
        y[i] = zeta_c.dot(phi) + dgp.theta0.dot(u) + v;
    }
    return SampleBatch(std::move(y), std::move(t), std::move(x));
}

/// Excess risk at g0 of the residualized loss: (theta - theta0)^T Sigma_u (theta - theta0).
[[nodiscard]] inline double plm_excess_risk(const PlmDgp& dgp, const Vector& theta) {
    require(theta.size() == dgp.d(), "plm_excess_risk: theta dimension mismatch");
    const Vector delta = theta - dgp.theta0;
    return delta.dot(dgp.sigma_u * delta);
}

/// Excess risk at g0 of the unresidualized loss:
///   (theta - theta0)^T (E[alpha0 alpha0^T] + Sigma_u) (theta - theta0).
/// Every non-constant additive trigonometric feature has mean 0 and second
/// moment 1/2 under Uniform[-1, 1], and distinct features are uncorrelated.
[[nodiscard]] inline double plm_nonorth_excess_risk(const PlmDgp& dgp, const Vector& theta) {
    require(theta.size() == dgp.d(), "plm_nonorth_excess_risk: theta dimension mismatch");
    const Vector delta = theta - dgp.theta0;
    Vector w = Vector::Constant(dgp.features().size(), 0.5);
    w[0] = 1.0;
    const Vector c = dgp.alpha_coefs.transpose() * delta;
    return c.dot(w.cwiseProduct(c)) + delta.dot(dgp.sigma_u * delta);
}

namespace detail {

/// Population moments shared by the squared-loss PLM variants. Both losses
/// have per-sample score S = -2 (a(X) + U)(r(X) + delta^T U + V) for some
/// X-measurable a, r; expectations over U and V are taken in closed form
/// (U symmetric with the sphere fourth moment), over X by a fixed seeded
/// covariate sample.
class PlmPopulation {
public:
    explicit PlmPopulation(const PlmDgp& dgp) : dgp_(dgp) {
        const Index n = dgp.oracle_draws;
        std::mt19937_64 rng(dgp.oracle_seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        x_.resize(n, dgp.covariate_dim);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < dgp.covariate_dim; ++j) x_(i, j) = unif(rng);
        phi_ = dgp.features().design(x_);
    }

    [[nodiscard]] const PlmDgp& dgp() const { return dgp_; }
    [[nodiscard]] const RowMatrix& covariates() const { return x_; }
    [[nodiscard]] const RowMatrix& features() const { return phi_; }

    struct Moments {
        double risk;
        Vector score;
        Matrix hessian;
        Matrix score_cov;
    };

    /// a and r supplied as (n x d) and (n) arrays over the oracle covariates.
    [[nodiscard]] Moments moments(const RowMatrix& a, const Vector& r, const Vector& delta, bool want_cov) const {
        const Index d = dgp_.d();
        const double n = static_cast<double>(r.size());
        const Matrix& su = dgp_.sigma_u;
        const double s2 = dgp_.sigma_v * dgp_.sigma_v;
        const Vector m = su * delta;
        const double q = delta.dot(m);

        const double er2 = r.squaredNorm() / n;
        const Vector ear = a.transpose() * r / n;
        const Matrix eaa = a.transpose() * a / n;

        Moments out;
        out.risk = er2 + q + s2;
        out.score = -2.0 * (ear + m);
        out.hessian = 2.0 * (eaa + su);
        if (want_cov) {
            const RowMatrix ar = a.array().colwise() * r.array();
            const Matrix eaar2 = ar.transpose() * ar / n;
            const double dd = static_cast<double>(d);
            Matrix second = eaar2 + (q + s2) * eaa + 2.0 * (ear * m.transpose() + m * ear.transpose()) +
                            (er2 + s2) * su + dd / (dd + 2.0) * (q * su + 2.0 * m * m.transpose());
            second *= 4.0;
            out.score_cov = linalg::symmetrize(second - out.score * out.score.transpose());
        }
        return out;
    }

private:
    PlmDgp dgp_;
    RowMatrix x_;
    RowMatrix phi_;
};

} // namespace detail

/// Residualized (Neyman-orthogonal) squared loss
///   l(theta, g; Z) = [Y - zeta(X) - theta^T (D - alpha(X))]^2,  g = (zeta, alpha).
class PartiallyLinearModel final : public LossModel {
public:
    explicit PartiallyLinearModel(Index d) : d_(d) { require(d >= 1, "PartiallyLinearModel: d must be >= 1"); }

    explicit PartiallyLinearModel(const PlmDgp& dgp) : d_(dgp.d()) {
        dgp.validate();
        pop_ = std::make_shared<const detail::PlmPopulation>(dgp);
    }

    using LossModel::hessian;
    using LossModel::loss;
    using LossModel::score;

    [[nodiscard]] std::string_view name() const override { return "plm"; }
    [[nodiscard]] Index dim() const override { return d_; }
    [[nodiscard]] Index nuisance_dim() const override { return d_ + 1; }
    [[nodiscard]] double self_concordance() const override { return 0.0; }

    [[nodiscard]] double loss(const Vector& theta, ConstRow gz, const SampleView& z) const override {
        const double r = residual(theta, gz, z);
        return r * r;
    }

    void score(const Vector& theta, ConstRow gz, const SampleView& z, Eigen::Ref<Vector> out) const override {
        const double r = residual(theta, gz, z);
        for (Index k = 0; k < d_; ++k) out[k] = -2.0 * regressor(gz, z, k) * r;
    }

    void hessian(const Vector&, ConstRow gz, const SampleView& z, Eigen::Ref<Matrix> out) const override {
        for (Index j = 0; j < d_; ++j) {
            const double rj = regressor(gz, z, j);
            for (Index k = 0; k <= j; ++k) {
                out(j, k) = out(k, j) = 2.0 * rj * regressor(gz, z, k);
            }
        }
    }

    [[nodiscard]] bool has_population() const override { return pop_ != nullptr; }
    [[nodiscard]] const PlmDgp& dgp() const {
        if (!pop_) unsupported<int>();
        return pop_->dgp();
    }
    [[nodiscard]] Vector theta_star() const override { return dgp().theta0; }
    [[nodiscard]] NuisanceFn true_nuisance() const override { return dgp().reduced_form_nuisance(); }
    [[nodiscard]] double excess_risk(const Vector& theta) const override { return plm_excess_risk(dgp(), theta); }

    [[nodiscard]] double population_risk(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, false).risk;
    }
    [[nodiscard]] Vector population_score(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, false).score;
    }
    [[nodiscard]] Matrix population_hessian(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, false).hessian;
    }
    [[nodiscard]] Matrix population_score_cov(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, true).score_cov;
    }

private:
    [[nodiscard]] static double regressor(ConstRow gz, const SampleView& z, Index k) {
        const auto ku = static_cast<std::size_t>(k);
        return z.target[ku] - gz[ku + 1];
    }

    [[nodiscard]] double residual(const Vector& theta, ConstRow gz, const SampleView& z) const {
        double r = z.outcome - gz[0];
        for (Index k = 0; k < d_; ++k) r -= theta[k] * regressor(gz, z, k);
        return r;
    }

    [[nodiscard]] detail::PlmPopulation::Moments population(const Vector& theta, const NuisanceFn& g,
                                                            bool want_cov) const {
        if (!pop_) unsupported<int>();
        require(theta.size() == d_ && g.output_dim() == d_ + 1, "plm population: dimension mismatch");
        const PlmDgp& dgp = pop_->dgp();
        const RowMatrix& phi = pop_->features();
        const RowMatrix gv = g.evaluate_all(pop_->covariates());
        Matrix truth(1 + d_, phi.cols());
        truth.row(0) = dgp.zeta_coefs().transpose();
        truth.bottomRows(d_) = dgp.alpha_coefs;
        // a = alpha0 - alpha, b = zeta0 - zeta, r = b - theta^T a
        const RowMatrix diff = phi * truth.transpose() - gv;
        const RowMatrix a = diff.rightCols(d_);
        const Vector r = diff.col(0) - a * theta;
        return pop_->moments(a, r, dgp.theta0 - theta, want_cov);
    }

    Index d_;
    std::shared_ptr<const detail::PlmPopulation> pop_;
};

/// Unresidualized squared loss l(theta, g; Z) = [Y - gamma(X) - theta^T D]^2
/// with g = (gamma, alpha); alpha is carried but unused. theta0 minimizes the
/// population risk at g0 = (gamma0, alpha0), but D_g D_theta L != 0.
class NonOrthogonalPlm final : public LossModel {
public:
    explicit NonOrthogonalPlm(Index d) : d_(d) { require(d >= 1, "NonOrthogonalPlm: d must be >= 1"); }

    explicit NonOrthogonalPlm(const PlmDgp& dgp) : d_(dgp.d()) {
        dgp.validate();
        pop_ = std::make_shared<const detail::PlmPopulation>(dgp);
        alpha0_ = pop_->features() * dgp.alpha_coefs.transpose();
        gamma0_ = pop_->features() * dgp.gamma_coefs;
    }

    using LossModel::hessian;
    using LossModel::loss;
    using LossModel::score;

    [[nodiscard]] std::string_view name() const override { return "plm_nonorth"; }
    [[nodiscard]] Index dim() const override { return d_; }
    [[nodiscard]] Index nuisance_dim() const override { return d_ + 1; }
    [[nodiscard]] double self_concordance() const override { return 0.0; }

    [[nodiscard]] double loss(const Vector& theta, ConstRow gz, const SampleView& z) const override {
        const double r = residual(theta, gz, z);
        return r * r;
    }

    void score(const Vector& theta, ConstRow gz, const SampleView& z, Eigen::Ref<Vector> out) const override {
        const double r = residual(theta, gz, z);
        for (Index k = 0; k < d_; ++k) out[k] = -2.0 * z.target[static_cast<std::size_t>(k)] * r;
    }

    void hessian(const Vector&, ConstRow, const SampleView& z, Eigen::Ref<Matrix> out) const override {
        for (Index j = 0; j < d_; ++j)
            for (Index k = 0; k <= j; ++k)
                out(j, k) = out(k, j) =
                    2.0 * z.target[static_cast<std::size_t>(j)] * z.target[static_cast<std::size_t>(k)];
    }

    [[nodiscard]] bool has_population() const override { return pop_ != nullptr; }
    [[nodiscard]] const PlmDgp& dgp() const {
        if (!pop_) unsupported<int>();
        return pop_->dgp();
    }
    [[nodiscard]] Vector theta_star() const override { return dgp().theta0; }
    [[nodiscard]] NuisanceFn true_nuisance() const override { return dgp().structural_nuisance(); }
    [[nodiscard]] double excess_risk(const Vector& theta) const override {
        return plm_nonorth_excess_risk(dgp(), theta);
    }

    [[nodiscard]] double population_risk(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, false).risk;
    }
    [[nodiscard]] Vector population_score(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, false).score;
    }
    [[nodiscard]] Matrix population_hessian(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, false).hessian;
    }
    [[nodiscard]] Matrix population_score_cov(const Vector& theta, const NuisanceFn& g) const override {
        return population(theta, g, true).score_cov;
    }

private:
    [[nodiscard]] double residual(const Vector& theta, ConstRow gz, const SampleView& z) const {
        double r = z.outcome - gz[0];
        for (Index k = 0; k < d_; ++k) r -= theta[k] * z.target[static_cast<std::size_t>(k)];
        return r;
    }

    [[nodiscard]] detail::PlmPopulation::Moments population(const Vector& theta, const NuisanceFn& g,
                                                            bool want_cov) const {
        if (!pop_) unsupported<int>();
        require(theta.size() == d_ && g.output_dim() == d_ + 1, "plm_nonorth population: dimension mismatch");
        const RowMatrix gv = g.evaluate_all(pop_->covariates());
        const Vector delta = pop_->dgp().theta0 - theta;
        // a = alpha0, r = (gamma0 - gamma) + delta^T alpha0
        const Vector r = (gamma0_ - gv.col(0)) + alpha0_ * delta;
        return pop_->moments(alpha0_, r, delta, want_cov);
    }

    Index d_;
    std::shared_ptr<const detail::PlmPopulation> pop_;
    RowMatrix alpha0_;
    Vector gamma0_;
};

} // namespace osl

#endif
