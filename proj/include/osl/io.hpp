#ifndef OSL_IO_HPP
#define OSL_IO_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "osl/diagnostics.hpp"
#include "osl/experiments.hpp"

namespace osl::io {

/// Shortest round-trip decimal form; independent of the global locale.
[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline void write_records_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
    os << "n,rep,excess_risk,nuisance_distance,iterations\n";
    for (const auto& r : records)
        os << r.n << ',' << r.rep << ',' << format_double(r.excess_risk) << ',' << format_double(r.nuisance_distance)
           << ',' << r.iterations << '\n';
}

inline void write_levels_csv(std::ostream& os, const std::vector<SweepLevel>& levels) {
    os << "n,replications_ok,mean_excess_risk,q90_excess_risk,log_mean_stderr,mean_nuisance_distance\n";
    for (const auto& l : levels)
        os << l.n << ',' << l.replications_ok << ',' << format_double(l.mean_excess_risk) << ','
           << format_double(l.q90_excess_risk) << ',' << format_double(l.log_mean_stderr) << ','
           << format_double(l.mean_nuisance_distance) << '\n';
}

inline void write_effdim_csv(std::ostream& os, const std::vector<EffDimReport>& rows) {
    os << "regime,g_rate,h_rate,d,d_star,d_prime,ratio,log_d_star,log_d_prime\n";
    for (const auto& r : rows)
        os << to_string(r.regime.kind) << ',' << format_double(r.regime.g_rate) << ','
           << format_double(r.regime.h_rate) << ',' << r.d << ',' << format_double(r.d_star) << ',' << format_double(r.d_prime) << ','
           << format_double(r.ratio) << ',' << format_double(r.log_d_star) << ',' << format_double(r.log_d_prime)
           << '\n';
}

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Log-log line chart; x and y are passed as natural logs. Polylines plus axis
/// labels and a legend, nothing else.
inline void write_loglog_svg(std::ostream& os, const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<Series>& series) {
    constexpr double W = 640, H = 420, L = 70, R = 180, T = 40, B = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
                                   "#7f7f7f"};
    const auto f = format_double;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(W) << "\" height=\"" << f(H) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << f(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << f(L) << "\" y1=\"" << f(H - B) << "\" x2=\"" << f(W - R) << "\" y2=\"" << f(H - B)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << f(L) << "\" y1=\"" << f(T) << "\" x2=\"" << f(L) << "\" y2=\"" << f(H - B)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << f((L + W - R) / 2) << "\" y=\"" << f(H - 12) << "\" text-anchor=\"middle\" font-size=\"12\">"
       << x_label << " (log)</text>\n";
    os << "<text x=\"16\" y=\"" << f((T + H - B) / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << f((T + H - B) / 2) << ")\">" << y_label << " (log)</text>\n";
    os << "<text x=\"" << f(L) << "\" y=\"" << f(H - B + 16) << "\" font-size=\"10\">" << f(std::exp(x0))
       << "</text>\n";
    os << "<text x=\"" << f(W - R) << "\" y=\"" << f(H - B + 16) << "\" text-anchor=\"end\" font-size=\"10\">"
       << f(std::exp(x1)) << "</text>\n";
    os << "<text x=\"" << f(L - 4) << "\" y=\"" << f(H - B) << "\" text-anchor=\"end\" font-size=\"10\">e^"
       << f(std::round(y0 * 10) / 10) << "</text>\n";
    os << "<text x=\"" << f(L - 4) << "\" y=\"" << f(T + 8) << "\" text-anchor=\"end\" font-size=\"10\">e^"
       << f(std::round(y1 * 10) / 10) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* c = colors[k % std::size(colors)];
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << f(px(s.x[i])) << ',' << f(py(s.y[i]));
        os << "\"/>\n";
        const double ly = T + 14.0 * static_cast<double>(k);
        os << "<line x1=\"" << f(W - R + 10) << "\" y1=\"" << f(ly) << "\" x2=\"" << f(W - R + 30) << "\" y2=\""
           << f(ly) << "\" stroke=\"" << c << "\"/>\n";
        os << "<text x=\"" << f(W - R + 34) << "\" y=\"" << f(ly + 4) << "\" font-size=\"10\">" << s.label
           << "</text>\n";
    }
    os << "</svg>\n";
}

} // namespace osl::io

#endif
