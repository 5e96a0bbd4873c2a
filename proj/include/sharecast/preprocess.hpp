#pragma once

#include <cmath>
#include <vector>

#include "sharecast/csv.hpp"
#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"

namespace sharecast {

/// Per-column standardization statistics, fitted on training rows only.
/// Constant columns carry sd = 1 and are mapped to all zeros.
struct ScalerParams {
    std::vector<double> means;
    std::vector<double> sds;
    std::vector<bool> constant;

    std::size_t size() const { return means.size(); }
    bool operator==(const ScalerParams&) const = default;
};

/// Column means and sample (n-1) standard deviations. NaN cells are
/// ignored; a column with fewer than two observed values, or zero spread,
/// is flagged constant.
inline ScalerParams fit_scaler(const Matrix& train) {
    if (train.rows() < 2) throw InputError("scaler needs at least 2 training rows");
    ScalerParams p;
    const auto cols = static_cast<std::size_t>(train.cols());
    p.means.resize(cols);
    p.sds.resize(cols);
    p.constant.resize(cols);
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        double sum = 0.0;
        long count = 0;
        for (Eigen::Index i = 0; i < train.rows(); ++i)
            if (!std::isnan(train(i, j))) sum += train(i, j), ++count;
        const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
        double ss = 0.0;
        for (Eigen::Index i = 0; i < train.rows(); ++i)
            if (!std::isnan(train(i, j))) ss += (train(i, j) - mean) * (train(i, j) - mean);
        const double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
        const auto u = static_cast<std::size_t>(j);
        p.means[u] = mean;
        p.constant[u] = !(sd > 0.0);
        p.sds[u] = p.constant[u] ? 1.0 : sd;
    }
    return p;
}

/// (x - mean) / sd per column; NaN cells become 0 (mean imputation) and
/// constant columns become 0.
inline Matrix apply_scaler(const Matrix& m, const ScalerParams& p) {
    if (static_cast<std::size_t>(m.cols()) != p.size())
        throw InputError("scaler fitted on " + std::to_string(p.size()) + " columns, matrix has " +
                         std::to_string(m.cols()));
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const auto u = static_cast<std::size_t>(j);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double x = m(i, j);
            out(i, j) = (p.constant[u] || std::isnan(x)) ? 0.0 : (x - p.means[u]) / p.sds[u];
        }
    }
    return out;
}

/// log(y / (1 - y)) for y in (0,1).
inline double logit(double y) {
    if (!(y > 0.0 && y < 1.0))
        throw InputError("logit undefined for " + csv::format_number(y) + " (needs 0 < y < 1)");
    return std::log(y / (1.0 - y));
}

/// 1 / (1 + exp(-t)), evaluated without overflow for either sign.
inline double inv_logit(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline Vector logit(const Vector& y) {
    Vector out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = logit(y[i]);
    return out;
}

inline Vector inv_logit(const Vector& t) {
    Vector out(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = inv_logit(t[i]);
    return out;
}

}  // namespace sharecast
