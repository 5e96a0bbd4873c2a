#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sharecast/csv.hpp"
#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"

namespace sharecast {

namespace detail {

inline void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_n,
                       const char* metric) {
    if (a.size() != b.size())
        throw InputError(std::string(metric) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    if (a.size() < min_n)
        throw InputError(std::string(metric) + ": needs at least " + std::to_string(min_n) +
                         " values");
}

inline double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline std::span<const double> view(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace detail

/// Pearson correlation between observed y and predictions y_hat.
inline double pcc(std::span<const double> y, std::span<const double> y_hat) {
    detail::check_pair(y, y_hat, 2, "PCC");
    const double my = detail::mean(y), mp = detail::mean(y_hat);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double a = y[i] - my, b = y_hat[i] - mp;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) throw InputError("PCC undefined for a constant vector");
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

/// 1 - SSE/SST. Zero for the mean predictor; negative when predictions are
/// worse than the mean.
inline double pve(std::span<const double> y, std::span<const double> y_hat) {
    detail::check_pair(y, y_hat, 2, "PVE");
    const double my = detail::mean(y);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        sst += (y[i] - my) * (y[i] - my);
    }
    if (sst == 0.0) throw InputError("PVE undefined for a constant response");
    return 1.0 - sse / sst;
}

inline double mse(std::span<const double> y, std::span<const double> y_hat) {
    detail::check_pair(y, y_hat, 1, "MSE");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

inline double mae(std::span<const double> y, std::span<const double> y_hat) {
    detail::check_pair(y, y_hat, 1, "MAE");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

/// Area under the ROC curve in Mann-Whitney form: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties
/// counting one half. Computed from mid-ranks in O(n log n).
inline double auc(std::span<const double> labels, std::span<const double> scores) {
    detail::check_pair(labels, scores, 2, "AUC");
    const std::size_t n = labels.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Twice the rank sum of positives, kept integral: a tie block occupying
    // sorted positions [i, j) has mid-rank (i + j + 1) / 2 (1-based).
    long double rank_sum2 = 0.0L;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        std::size_t pos_in_block = 0;
        for (std::size_t t = i; t < j; ++t) {
            const double l = labels[idx[t]];
            if (l != 0.0 && l != 1.0) throw InputError("AUC labels must be 0/1");
            pos_in_block += l == 1.0;
        }
        rank_sum2 += static_cast<long double>(pos_in_block) * static_cast<long double>(i + j + 1);
        n_pos += pos_in_block;
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InputError("AUC needs both classes");
    const long double pos = static_cast<long double>(n_pos);
    const long double u2 = rank_sum2 - pos * (pos + 1.0L);  // 2 * U statistic
    // Both operands are exact integers in double, so the quotient is the
    // correctly rounded pair fraction.
    return static_cast<double>(u2) /
           (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double pcc(const Vector& y, const Vector& y_hat) {
    return pcc(detail::view(y), detail::view(y_hat));
}
inline double pve(const Vector& y, const Vector& y_hat) {
    return pve(detail::view(y), detail::view(y_hat));
}
inline double mse(const Vector& y, const Vector& y_hat) {
    return mse(detail::view(y), detail::view(y_hat));
}
inline double mae(const Vector& y, const Vector& y_hat) {
    return mae(detail::view(y), detail::view(y_hat));
}
inline double auc(const Vector& labels, const Vector& scores) {
    return auc(detail::view(labels), detail::view(scores));
}

// ---------------------------------------------------------------------------
// Kernel density estimation

/// Silverman's rule of thumb, 0.9 * min(sd, IQR/1.34) * n^(-1/5). When the
/// sample has no spread, falls back to 10% of |mean| (or 1 when the mean
/// is 0) so a single value still yields a proper curve.
inline double silverman_bandwidth(std::span<const double> values) {
    if (values.empty()) throw InputError("bandwidth of an empty sample");
    const double n = static_cast<double>(values.size());
    const double m = detail::mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    auto quantile = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, s.size() - 1);
        return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd;
    if (!(spread > 0.0)) return m != 0.0 ? 0.1 * std::abs(m) : 1.0;
    return 0.9 * spread * std::pow(n, -0.2);
}

struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// `points` evenly spaced values covering [min - pad*h, max + pad*h].
inline std::vector<double> density_grid(std::span<const double> values, double bandwidth,
                                        std::size_t points = 512, double pad = 4.0) {
    if (values.empty()) throw InputError("density grid of an empty sample");
    if (points < 2) throw InputError("density grid needs at least 2 points");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it - pad * bandwidth, hi = *hi_it + pad * bandwidth;
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

/// Gaussian-kernel density on `grid`. bandwidth = nullopt selects
/// Silverman's rule.
inline DensityCurve kde(std::span<const double> values, std::optional<double> bandwidth,
                        std::span<const double> grid) {
    if (values.empty()) throw InputError("KDE of an empty sample");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(values);
    if (!(h > 0.0) || !std::isfinite(h)) throw InputError("KDE bandwidth must be positive");
    DensityCurve c;
    c.bandwidth = h;
    c.grid.assign(grid.begin(), grid.end());
    c.density.resize(grid.size());
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double s = 0.0;
        for (double v : values) {
            const double u = (grid[g] - v) / h;
            s += std::exp(-0.5 * u * u);
        }
        c.density[g] = s * norm;
    }
    return c;
}

/// Trapezoid integral of the curve over its grid.
inline double integrate(const DensityCurve& c) {
    double s = 0.0;
    for (std::size_t i = 1; i < c.grid.size(); ++i)
        s += 0.5 * (c.density[i] + c.density[i - 1]) * (c.grid[i] - c.grid[i - 1]);
    return s;
}

inline void write_density_csv(std::ostream& out, const DensityCurve& c,
                              const std::vector<std::string>& comment = {}) {
    for (const auto& line : comment) out << "# " << line << "\n";
    out << "grid,density\n";
    for (std::size_t i = 0; i < c.grid.size(); ++i)
        out << csv::format_number(c.grid[i]) << ',' << csv::format_number(c.density[i]) << "\n";
}

}  // namespace sharecast
