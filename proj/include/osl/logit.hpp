#ifndef OSL_LOGIT_HPP
#define OSL_LOGIT_HPP

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <string_view>

#include "osl/basis.hpp"
#include "osl/linalg.hpp"
#include "osl/model.hpp"

namespace osl {

[[nodiscard]] inline double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

/// log(1 + exp(u)) without overflow.
[[nodiscard]] inline double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

/// Semi-parametric logistic process: W ~ Uniform[-1, 1]^p,
///   X_j = (M / sqrt(d)) (c sin(pi W_{j mod p}) + (1 - c) xi_j),  xi ~ Uniform[-1, 1]^d,
///   P(Y = 1 | X, W) = sigmoid(theta0^T X + g0(W)),  Y in {-1, 1}.
/// ||X||_2 <= M by construction; c couples X to W.
struct LogitDgp {
    Vector theta0;
    Index covariate_dim = 2;
    double x_bound = 2.0;
    double coupling = 0.5;
    int trig_degree = 2;
    Vector g0_coefs;
    Index oracle_draws = 200000;
    std::uint64_t oracle_seed = 0x10917;

    [[nodiscard]] Index d() const { return theta0.size(); }
    [[nodiscard]] FeatureMap features() const { return {BasisKind::trigonometric, trig_degree, covariate_dim}; }

    void validate() const {
        require(d() >= 1, "LogitDgp: theta0 must be nonempty");
        require(covariate_dim >= 1 && trig_degree >= 0, "LogitDgp: invalid covariate basis");
        require(x_bound > 0.0 && std::isfinite(x_bound), "LogitDgp: x_bound must be positive");
        require(coupling >= 0.0 && coupling <= 1.0, "LogitDgp: coupling must lie in [0, 1]");
        require(g0_coefs.size() == features().size(), "LogitDgp: g0_coefs has the wrong length");
        require(oracle_draws >= 1, "LogitDgp: oracle_draws must be >= 1");
    }

    [[nodiscard]] NuisanceFn true_nuisance() const {
        return linear_in_features(features(), Matrix(g0_coefs.transpose()), NuisanceFn::Kind::oracle);
    }

    /// X given W and uniform noise xi.
    void target_from(ConstRow w, const Vector& xi, double* x) const {
        const double scale = x_bound / std::sqrt(static_cast<double>(d()));
        for (Index j = 0; j < d(); ++j) {
            const double wj = w[static_cast<std::size_t>(j % covariate_dim)];
            x[j] = scale * (coupling * std::sin(std::numbers::pi * wj) + (1.0 - coupling) * xi[j]);
        }
    }

    [[nodiscard]] static LogitDgp make_default(Index d = 2, Index p = 2, std::uint64_t coef_seed = 11,
                                               double x_bound = 2.0, double coupling = 0.5, double coef_scale = 0.5) {
        require(d >= 1 && p >= 1, "LogitDgp::make_default: dimensions must be >= 1");
        LogitDgp g;
        g.covariate_dim = p;
        g.x_bound = x_bound;
        g.coupling = coupling;
        g.theta0.resize(d);
        for (Index k = 0; k < d; ++k) g.theta0[k] = (k % 2 == 0 ? 1.0 : -0.5);
        std::mt19937_64 rng(coef_seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        g.g0_coefs.resize(g.features().size());
        for (Index f = 0; f < g.g0_coefs.size(); ++f) g.g0_coefs[f] = coef_scale * normal(rng);
        g.validate();
        return g;
    }
};

[[nodiscard]] inline SampleBatch sample(const LogitDgp& dgp, Index n, std::uint64_t seed) {
    require(n >= 1, "sample: n must be >= 1");
    const Index d = dgp.d();
    const Index p = dgp.covariate_dim;
    const FeatureMap fm = dgp.features();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Vector y(n);
    RowMatrix x(n, d);
    RowMatrix w(n, p);
    Vector xi(d);
    Vector phi(fm.size());
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) w(i, j) = unif(rng);
        for (Index j = 0; j < d; ++j) xi[j] = unif(rng);
        const ConstRow wr{w.data() + i * p, static_cast<std::size_t>(p)};
        dgp.target_from(wr, xi, x.data() + i * d);
        fm.evaluate(wr, phi.data());
        const double eta = Eigen::Map<const Vector>(x.data() + i * d, d).dot(dgp.theta0) + dgp.g0_coefs.dot(phi);
        y[i] = u01(rng) < sigmoid(eta) ? 1.0 : -1.0;
    }
    return SampleBatch(std::move(y), std::move(x), std::move(w));
}

namespace detail {

/// Fixed oracle draws of (X, W) with the true conditional probability p0;
/// expectations over Y are taken exactly given (X, W).
struct LogitPopulation {
    explicit LogitPopulation(const LogitDgp& dgp) : dgp(dgp) {
        const Index n = dgp.oracle_draws;
        std::mt19937_64 rng(dgp.oracle_seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        x.resize(n, dgp.d());
        w.resize(n, dgp.covariate_dim);
        Vector xi(dgp.d());
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < dgp.covariate_dim; ++j) w(i, j) = unif(rng);
            for (Index j = 0; j < dgp.d(); ++j) xi[j] = unif(rng);
            dgp.target_from({w.data() + i * dgp.covariate_dim, static_cast<std::size_t>(dgp.covariate_dim)}, xi,
                            x.data() + i * dgp.d());
        }
        const Vector g0 = dgp.features().design(w) * dgp.g0_coefs;
        p0 = (x * dgp.theta0 + g0).unaryExpr([](double e) { return sigmoid(e); });
    }

    LogitDgp dgp;
    RowMatrix x;
    RowMatrix w;
    Vector p0;
};

} // namespace detail

/// l(theta, g; Z) = log(1 + exp(-Y (theta^T X + g(W)))), pseudo self-concordant with R = M.
class LogisticModel final : public LossModel {
public:
    /// Unbound model over targets with ||X||_2 <= x_bound.
    LogisticModel(Index d, double x_bound) : d_(d), x_bound_(x_bound) {
        require(d >= 1, "LogisticModel: d must be >= 1");
        require(x_bound > 0.0, "LogisticModel: x_bound must be positive");
    }

    explicit LogisticModel(const LogitDgp& dgp) : d_(dgp.d()), x_bound_(dgp.x_bound) {
        dgp.validate();
        pop_ = std::make_shared<const detail::LogitPopulation>(dgp);
    }

    using LossModel::hessian;
    using LossModel::loss;
    using LossModel::score;

    [[nodiscard]] std::string_view name() const override { return "logit"; }
    [[nodiscard]] Index dim() const override { return d_; }
    [[nodiscard]] Index nuisance_dim() const override { return 1; }
    [[nodiscard]] double self_concordance() const override { return x_bound_; }

    [[nodiscard]] double loss(const Vector& theta, ConstRow gz, const SampleView& z) const override {
        return softplus(-z.outcome * margin(theta, gz, z));
    }

    void score(const Vector& theta, ConstRow gz, const SampleView& z, Eigen::Ref<Vector> out) const override {
        // [sigmoid(m) - 1/2 - Y/2] X
        const double c = sigmoid(margin(theta, gz, z)) - 0.5 - 0.5 * z.outcome;
        for (Index k = 0; k < d_; ++k) out[k] = c * z.target[static_cast<std::size_t>(k)];
    }

    void hessian(const Vector& theta, ConstRow gz, const SampleView& z, Eigen::Ref<Matrix> out) const override {
        const double s = sigmoid(margin(theta, gz, z));
        const double w = s * (1.0 - s);
        for (Index j = 0; j < d_; ++j)
            for (Index k = 0; k <= j; ++k)
                out(j, k) = out(k, j) =
                    w * z.target[static_cast<std::size_t>(j)] * z.target[static_cast<std::size_t>(k)];
    }

    [[nodiscard]] bool has_population() const override { return pop_ != nullptr; }
    [[nodiscard]] const LogitDgp& dgp() const {
        if (!pop_) unsupported<int>();
        return pop_->dgp;
    }
    [[nodiscard]] Vector theta_star() const override { return dgp().theta0; }
    [[nodiscard]] NuisanceFn true_nuisance() const override { return dgp().true_nuisance(); }

    [[nodiscard]] double population_risk(const Vector& theta, const NuisanceFn& g) const override {
        const Vector eta = margins(theta, g);
        const Vector& p0 = pop_->p0;
        double sum = 0.0;
        for (Index i = 0; i < eta.size(); ++i) sum += p0[i] * softplus(-eta[i]) + (1.0 - p0[i]) * softplus(eta[i]);
        return sum / static_cast<double>(eta.size());
    }

    [[nodiscard]] Vector population_score(const Vector& theta, const NuisanceFn& g) const override {
        const Vector eta = margins(theta, g);
        const Vector c = eta.unaryExpr([](double e) { return sigmoid(e); }) - pop_->p0;
        return pop_->x.transpose() * c / static_cast<double>(eta.size());
    }

    [[nodiscard]] Matrix population_hessian(const Vector& theta, const NuisanceFn& g) const override {
        const Vector eta = margins(theta, g);
        const Vector w = eta.unaryExpr([](double e) {
            const double s = sigmoid(e);
            return s * (1.0 - s);
        });
        return weighted_gram(w);
    }

    /// E{[(sigmoid(eta) - p0)^2 + p0 (1 - p0)] X X^T} - S S^T.
    [[nodiscard]] Matrix population_score_cov(const Vector& theta, const NuisanceFn& g) const override {
        const Vector eta = margins(theta, g);
        const Vector& p0 = pop_->p0;
        Vector w(eta.size());
        Vector c(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            c[i] = sigmoid(eta[i]) - p0[i];
            w[i] = c[i] * c[i] + p0[i] * (1.0 - p0[i]);
        }
        const Vector s = pop_->x.transpose() * c / static_cast<double>(eta.size());
        return linalg::symmetrize(weighted_gram(w) - s * s.transpose());
    }

private:
    [[nodiscard]] double margin(const Vector& theta, ConstRow gz, const SampleView& z) const {
        double m = gz[0];
        for (Index k = 0; k < d_; ++k) m += theta[k] * z.target[static_cast<std::size_t>(k)];
        return m;
    }

    [[nodiscard]] Vector margins(const Vector& theta, const NuisanceFn& g) const {
        if (!pop_) unsupported<int>();
        require(theta.size() == d_ && g.output_dim() == 1, "logit population: dimension mismatch");
        return pop_->x * theta + g.evaluate_all(pop_->w).col(0);
    }

    [[nodiscard]] Matrix weighted_gram(const Vector& w) const {
        const RowMatrix xw = pop_->x.array().colwise() * w.array();
        return linalg::symmetrize(pop_->x.transpose() * xw / static_cast<double>(w.size()));
    }

    Index d_;
    double x_bound_;
    std::shared_ptr<const detail::LogitPopulation> pop_;
};

} // namespace osl

#endif
