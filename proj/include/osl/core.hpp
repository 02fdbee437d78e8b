#ifndef OSL_CORE_HPP
#define OSL_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace osl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRow = std::span<const double>;

// Error taxonomy shared by every module.

/// A caller broke a precondition (dimension mismatch, invalid argument).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numeric computation left its domain: non-finite values, singular or
/// non-SPD matrices. Carries the offending sample index when one exists.
class NumericDomainError : public std::runtime_error {
public:
    explicit NumericDomainError(const std::string& what, std::optional<Index> sample = std::nullopt)
        : std::runtime_error(sample ? what + " (sample " + std::to_string(*sample) + ")" : what),
          sample_(sample) {}

    [[nodiscard]] std::optional<Index> sample_index() const noexcept { return sample_; }

private:
    std::optional<Index> sample_;
};

/// Requested a capability the object does not have (e.g. population oracles
/// on a model without a bound data-generating process).
class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

/// One observation Z = (Y, T, X): outcome, target regressors, covariates.
struct SampleView {
    double outcome;
    ConstRow target;
    ConstRow covariates;
};

/// An i.i.d. sample stored row-major so each observation is contiguous.
class SampleBatch {
public:
    SampleBatch() = default;

    SampleBatch(Vector outcomes, RowMatrix targets, RowMatrix covariates)
        : outcomes_(std::move(outcomes)), targets_(std::move(targets)), covariates_(std::move(covariates)) {
        validate();
    }

    [[nodiscard]] Index n() const noexcept { return outcomes_.size(); }
    [[nodiscard]] Index d() const noexcept { return targets_.cols(); }
    [[nodiscard]] Index p() const noexcept { return covariates_.cols(); }
    [[nodiscard]] bool empty() const noexcept { return n() == 0; }

    [[nodiscard]] const Vector& outcomes() const noexcept { return outcomes_; }
    [[nodiscard]] const RowMatrix& targets() const noexcept { return targets_; }
    [[nodiscard]] const RowMatrix& covariates() const noexcept { return covariates_; }

    [[nodiscard]] SampleView operator[](Index i) const {
        return {outcomes_[i], row(targets_, i), row(covariates_, i)};
    }

    [[nodiscard]] ConstRow covariate_row(Index i) const { return row(covariates_, i); }

    /// Rows [begin, begin + count) as an independent batch.
    [[nodiscard]] SampleBatch slice(Index begin, Index count) const {
        require(begin >= 0 && count >= 1 && begin + count <= n(), "SampleBatch::slice: range out of bounds");
        return SampleBatch(outcomes_.segment(begin, count), targets_.middleRows(begin, count),
                           covariates_.middleRows(begin, count));
    }

    [[nodiscard]] static SampleBatch concat(const SampleBatch& a, const SampleBatch& b) {
        require(a.d() == b.d() && a.p() == b.p(), "SampleBatch::concat: dimension mismatch");
        Vector y(a.n() + b.n());
        y << a.outcomes_, b.outcomes_;
        RowMatrix t(a.n() + b.n(), a.d());
        t << a.targets_, b.targets_;
        RowMatrix x(a.n() + b.n(), a.p());
        x << a.covariates_, b.covariates_;
        return SampleBatch(std::move(y), std::move(t), std::move(x));
    }

private:
    static ConstRow row(const RowMatrix& m, Index i) {
        return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
    }

    void validate() const {
        require(outcomes_.size() >= 1, "SampleBatch: n must be >= 1");
        require(targets_.rows() == outcomes_.size() && covariates_.rows() == outcomes_.size(),
                "SampleBatch: row counts differ");
        require(targets_.cols() >= 1, "SampleBatch: target dimension must be >= 1");
        if (!outcomes_.allFinite() || !targets_.allFinite() || !covariates_.allFinite())
            throw ContractViolation("SampleBatch: non-finite entry");
    }

    Vector outcomes_;
    RowMatrix targets_;
    RowMatrix covariates_;
};

/// A first-stage nuisance g: covariate row -> nuisance values.
///
/// PLM nuisances output (zeta(x), alpha(x)) in R^{1+d}; logistic nuisances
/// output the scalar g(w). Copies share the same immutable evaluator.
class NuisanceFn {
public:
    enum class Kind { oracle, fitted, corrupted };
    using Evaluator = std::function<void(ConstRow x, std::span<double> out)>;

    NuisanceFn(Index output_dim, Evaluator eval, Kind kind)
        : dim_(output_dim), eval_(std::make_shared<const Evaluator>(std::move(eval))), kind_(kind) {
        require(dim_ >= 1, "NuisanceFn: output dimension must be >= 1");
    }

    [[nodiscard]] Index output_dim() const noexcept { return dim_; }
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

    void evaluate(ConstRow x, std::span<double> out) const { (*eval_)(x, out); }

    [[nodiscard]] Vector operator()(ConstRow x) const {
        Vector out(dim_);
        evaluate(x, {out.data(), static_cast<std::size_t>(dim_)});
        return out;
    }

    /// Values at every covariate row of a batch, one row per sample.
    [[nodiscard]] RowMatrix evaluate_all(const RowMatrix& covariates) const {
        RowMatrix out(covariates.rows(), dim_);
        for (Index i = 0; i < covariates.rows(); ++i) {
            evaluate({covariates.data() + i * covariates.cols(), static_cast<std::size_t>(covariates.cols())},
                     {out.data() + i * dim_, static_cast<std::size_t>(dim_)});
        }
        return out;
    }

    /// Returns a + scale * b, pointwise.
    [[nodiscard]] static NuisanceFn add_scaled(const NuisanceFn& a, double scale, const NuisanceFn& b, Kind kind) {
        require(a.dim_ == b.dim_, "NuisanceFn::add_scaled: output dimension mismatch");
        auto ea = a.eval_;
        auto eb = b.eval_;
        const Index dim = a.dim_;
        return NuisanceFn(
            dim,
            [ea, eb, scale, dim](ConstRow x, std::span<double> out) {
                (*ea)(x, out);
                // small fixed buffer for the common low-dimensional case
                double stack_buf[16];
                std::unique_ptr<double[]> heap;
                double* tmp = stack_buf;
                if (dim > 16) {
                    heap = std::make_unique<double[]>(static_cast<std::size_t>(dim));
                    tmp = heap.get();
                }
                (*eb)(x, {tmp, static_cast<std::size_t>(dim)});
                for (Index k = 0; k < dim; ++k) out[static_cast<std::size_t>(k)] += scale * tmp[k];
            },
            kind);
    }

    [[nodiscard]] static NuisanceFn zero(Index dim) {
        return NuisanceFn(
            dim, [](ConstRow, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }, Kind::oracle);
    }

private:
    Index dim_;
    std::shared_ptr<const Evaluator> eval_;
    Kind kind_;
};

[[nodiscard]] inline const char* to_string(NuisanceFn::Kind k) {
    switch (k) {
    case NuisanceFn::Kind::oracle: return "oracle";
    case NuisanceFn::Kind::fitted: return "fitted";
    case NuisanceFn::Kind::corrupted: return "corrupted";
    }
    return "unknown";
}

} // namespace osl

#endif
