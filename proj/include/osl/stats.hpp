#ifndef OSL_STATS_HPP
#define OSL_STATS_HPP

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "osl/core.hpp"

namespace osl {

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};

/// Ordinary least squares of y on x.
[[nodiscard]] inline SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 3, "slope_fit: at least 3 points are required");
    std::vector<double> xs;
    for (const auto& [x, y] : points) {
        require(std::isfinite(x) && std::isfinite(y), "slope_fit: points must be finite");
        xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    require(std::adjacent_find(xs.begin(), xs.end()) == xs.end(), "slope_fit: x values must be distinct");
    const double m = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (const auto& [x, y] : points) {
        const double e = y - f.intercept - f.slope * x;
        ssr += e * e;
    }
    f.stderr_slope = std::sqrt(ssr / (m - 2.0) / sxx);
    return f;
}

/// Type-7 quantile of an unsorted sample.
[[nodiscard]] inline double quantile(std::vector<double> v, double q) {
    require(!v.empty(), "quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace osl

#endif
