#ifndef OSL_TESTS_SUPPORT_HPP
#define OSL_TESTS_SUPPORT_HPP

#include <initializer_list>
#include <random>

#include "osl/osl.hpp"

namespace osl::testing {

/// Nuisance that ignores its input.
inline NuisanceFn constant_nuisance(Vector value) {
    const Index dim = value.size();
    return NuisanceFn(
        dim,
        [value](ConstRow, std::span<double> out) {
            for (Index k = 0; k < value.size(); ++k) out[static_cast<std::size_t>(k)] = value[k];
        },
        NuisanceFn::Kind::oracle);
}

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index k = 0;
    for (const double x : v) out[k++] = x;
    return out;
}

inline SampleBatch one_sample(double y, const Vector& t, const Vector& x) {
    RowMatrix tm = t.transpose();
    RowMatrix xm = x.transpose();
    return SampleBatch(vec({y}), tm, xm);
}

inline Vector random_vector(std::mt19937_64& rng, Index d, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(d);
    for (Index k = 0; k < d; ++k) v[k] = normal(rng);
    return v;
}

} // namespace osl::testing

#endif
