#ifndef OSL_BASIS_HPP
#define OSL_BASIS_HPP

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "osl/core.hpp"

namespace osl {

enum class BasisKind { polynomial, trigonometric };

[[nodiscard]] inline const char* to_string(BasisKind k) {
    return k == BasisKind::polynomial ? "polynomial" : "trigonometric";
}

/// Feature map of the covariates.
///
/// trigonometric(K): additive {1, sin(j pi x_i), cos(j pi x_i) : i < p, 1 <= j <= K}.
/// polynomial(K): all monomials of total degree <= K.
class FeatureMap {
public:
    FeatureMap(BasisKind kind, int degree, Index input_dim) : kind_(kind), degree_(degree), p_(input_dim) {
        require(degree >= 0, "FeatureMap: degree must be >= 0");
        require(input_dim >= 1, "FeatureMap: covariate dimension must be >= 1");
        if (kind_ == BasisKind::polynomial) build_exponents();
    }

    [[nodiscard]] BasisKind kind() const noexcept { return kind_; }
    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] Index input_dim() const noexcept { return p_; }

    [[nodiscard]] Index size() const noexcept {
        if (kind_ == BasisKind::trigonometric) return 1 + 2 * static_cast<Index>(degree_) * p_;
        return static_cast<Index>(exponents_.size()) / p_;
    }

    void evaluate(ConstRow x, double* out) const {
        if (kind_ == BasisKind::trigonometric) {
            out[0] = 1.0;
            Index k = 1;
            for (Index i = 0; i < p_; ++i) {
                const double a = std::numbers::pi * x[static_cast<std::size_t>(i)];
                // angle addition recurrences keep this to one sin/cos pair per coordinate
                const double s1 = std::sin(a);
                const double c1 = std::cos(a);
                double s = s1;
                double c = c1;
                for (int j = 1; j <= degree_; ++j) {
                    out[k++] = s;
                    out[k++] = c;
                    const double sn = s * c1 + c * s1;
                    c = c * c1 - s * s1;
                    s = sn;
                }
            }
            return;
        }
        const Index m = size();
        for (Index f = 0; f < m; ++f) {
            double v = 1.0;
            for (Index i = 0; i < p_; ++i) {
                const int e = exponents_[static_cast<std::size_t>(f * p_ + i)];
                for (int r = 0; r < e; ++r) v *= x[static_cast<std::size_t>(i)];
            }
            out[f] = v;
        }
    }

    [[nodiscard]] Vector operator()(ConstRow x) const {
        Vector out(size());
        evaluate(x, out.data());
        return out;
    }

    [[nodiscard]] RowMatrix design(const RowMatrix& covariates) const {
        RowMatrix phi(covariates.rows(), size());
        for (Index r = 0; r < covariates.rows(); ++r) {
            evaluate({covariates.data() + r * p_, static_cast<std::size_t>(p_)}, phi.data() + r * size());
        }
        return phi;
    }

private:
    void build_exponents() {
        std::vector<int> cur(static_cast<std::size_t>(p_), 0);
        // enumerate exponent tuples in graded order
        for (int total = 0; total <= degree_; ++total) enumerate(0, total, cur);
    }

    void enumerate(Index pos, int remaining, std::vector<int>& cur) {
        if (pos == p_ - 1) {
            cur[static_cast<std::size_t>(pos)] = remaining;
            exponents_.insert(exponents_.end(), cur.begin(), cur.end());
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[static_cast<std::size_t>(pos)] = e;
            enumerate(pos + 1, remaining - e, cur);
        }
    }

    BasisKind kind_;
    int degree_;
    Index p_;
    std::vector<int> exponents_;
};

/// Linear model over a feature map: x -> C phi(x), C of shape (outputs x features).
[[nodiscard]] inline NuisanceFn linear_in_features(FeatureMap features, Matrix coefs, NuisanceFn::Kind kind) {
    require(coefs.cols() == features.size(), "linear_in_features: coefficient/feature size mismatch");
    const Index out_dim = coefs.rows();
    return NuisanceFn(
        out_dim,
        [features = std::move(features), coefs = std::move(coefs)](ConstRow x, std::span<double> out) {
            Vector phi(features.size());
            features.evaluate(x, phi.data());
            Eigen::Map<Vector>(out.data(), static_cast<Index>(out.size())).noalias() = coefs * phi;
        },
        kind);
}

/// Seeded smooth direction h(x) = v cos(w^T x + phase), ||v||_2 = 1.
///
/// sup_x ||h(x)||_2 = 1 on R^p; frequencies are drawn with |w_i| in
/// [pi/2, 3pi/2] so the cosine crosses +-1 inside the box [-1, 1]^p.
[[nodiscard]] inline NuisanceFn trig_direction(Index output_dim, Index input_dim, std::uint64_t seed) {
    require(output_dim >= 1 && input_dim >= 1, "trig_direction: dimensions must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector v(output_dim);
    do {
        for (Index k = 0; k < output_dim; ++k) v[k] = normal(rng);
    } while (v.norm() < 1e-8);
    v.normalize();
    Vector w(input_dim);
    for (Index i = 0; i < input_dim; ++i) {
        const double mag = std::numbers::pi * (0.5 + unif(rng));
        w[i] = unif(rng) < 0.5 ? -mag : mag;
    }
    const double phase = 2.0 * std::numbers::pi * unif(rng);
    return NuisanceFn(
        output_dim,
        [v, w, phase](ConstRow x, std::span<double> out) {
            double arg = phase;
            for (Index i = 0; i < w.size(); ++i) arg += w[i] * x[static_cast<std::size_t>(i)];
            const double c = std::cos(arg);
            for (Index k = 0; k < v.size(); ++k) out[static_cast<std::size_t>(k)] = v[k] * c;
        },
        NuisanceFn::Kind::oracle);
}

} // namespace osl

#endif
