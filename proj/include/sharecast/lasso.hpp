#pragma once

// L1-penalized least squares and logistic regression by cyclic coordinate
// descent.
//
// Objectives (unscaled; lambda therefore grows with n):
//   squared:   sum_i (y_i - b0 - x_i.b)^2 + lambda * sum_j |b_j|
//   logistic:  -sum_i [y_i eta_i - log(1 + exp(eta_i))] + lambda * sum_j |b_j|,
//              eta_i = b0 + x_i.b
// The intercept b0 is never penalized. The logistic objective is stored in
// its minimized form (negative log-likelihood plus penalty).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sharecast/csv.hpp"
#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"
#include "sharecast/folds.hpp"
#include "sharecast/rng.hpp"

namespace sharecast {

enum class LossKind { Squared, Logistic };

inline const char* to_string(LossKind k) {
    return k == LossKind::Squared ? "squared" : "logistic";
}

inline constexpr double kSelectionTolerance = 1e-8;

struct LassoFit {
    double intercept = 0.0;
    Vector beta;
    double lambda = 0.0;
    double objective_value = 0.0;
    LossKind loss = LossKind::Squared;
    std::vector<std::size_t> selected;  // |beta_j| > kSelectionTolerance
    long sweeps = 0;
    bool used_majorizer = false;  // logistic only: a 0.25-bound step was needed

    /// Linear predictor b0 + X b.
    Vector linear_predictor(const Matrix& X) const {
        return (X * beta).array() + intercept;
    }
};

struct LassoOptions {
    double tol = 1e-7;  // max coefficient change per sweep
    double kkt_tol_squared = 1e-6;
    double kkt_tol_logistic = 1e-5;
    long max_sweeps = 100000;
    double coef_cap = 30.0;  // logistic divergence guard
};

/// Raised when a logistic fit diverges (|b_j| exceeds the cap), which
/// happens under (quasi-)separation. Carries the last iterate.
class SeparationError : public SolverError {
public:
    SeparationError(const std::string& what, LassoFit last)
        : SolverError(what), last_(std::move(last)) {}
    const LassoFit& last_fit() const noexcept { return last_; }

private:
    LassoFit last_;
};

struct LambdaGrid {
    std::vector<double> values;  // strictly decreasing
    double ratio = 1e-3;
    std::size_t size() const { return values.size(); }
};

namespace detail {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline void require_finite(const Matrix& X, const Vector& y) {
    if (X.rows() != y.size())
        throw InputError("design has " + std::to_string(X.rows()) + " rows, response has " +
                         std::to_string(y.size()));
    if (X.rows() == 0) throw InputError("empty design");
    if (!X.allFinite() || !y.allFinite()) throw InputError("non-finite value in LASSO input");
}

inline double l1(const Vector& b) { return b.cwiseAbs().sum(); }

inline double log1p_exp(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline std::vector<std::size_t> support(const Vector& b) {
    std::vector<std::size_t> s;
    for (Eigen::Index j = 0; j < b.size(); ++j)
        if (std::abs(b[j]) > kSelectionTolerance) s.push_back(static_cast<std::size_t>(j));
    return s;
}

}  // namespace detail

/// Penalized objective of either loss at (b0, b).
inline double lasso_objective(const Matrix& X, const Vector& y, double b0, const Vector& b,
                              double lambda, LossKind loss) {
    const Vector eta = (X * b).array() + b0;
    double data = 0.0;
    if (loss == LossKind::Squared) {
        data = (y - eta).squaredNorm();
    } else {
        for (Eigen::Index i = 0; i < y.size(); ++i)
            data += detail::log1p_exp(eta[i]) - y[i] * eta[i];
    }
    return data + lambda * detail::l1(b);
}

/// Gradient of the unpenalized loss: squared -2 X'r, logistic -X'(y - p).
/// The last entry is the intercept component.
inline Vector loss_gradient(const Matrix& X, const Vector& y, double b0, const Vector& b,
                            LossKind loss) {
    const Vector eta = (X * b).array() + b0;
    Vector resid(y.size());
    double scale = 1.0;
    if (loss == LossKind::Squared) {
        resid = y - eta;
        scale = -2.0;
    } else {
        for (Eigen::Index i = 0; i < y.size(); ++i) resid[i] = y[i] - detail::sigmoid(eta[i]);
        scale = -1.0;
    }
    Vector g(X.cols() + 1);
    g.head(X.cols()) = scale * (X.transpose() * resid);
    g[X.cols()] = scale * resid.sum();
    return g;
}

/// Largest violation of the subgradient optimality conditions:
///   b_j == 0:  |g_j| <= lambda
///   b_j != 0:  g_j + lambda * sign(b_j) == 0
///   intercept: g_0 == 0
inline double kkt_residual(const Matrix& X, const Vector& y, const LassoFit& fit) {
    const Vector g = loss_gradient(X, y, fit.intercept, fit.beta, fit.loss);
    double worst = std::abs(g[X.cols()]);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double bj = fit.beta[j];
        const double v = bj == 0.0 ? std::max(std::abs(g[j]) - fit.lambda, 0.0)
                                   : std::abs(g[j] + fit.lambda * (bj > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

/// Squared-loss LASSO by cyclic coordinate descent with soft-thresholding.
/// Iterates until the largest coefficient change in a full sweep is below
/// `opt.tol` and the KKT residual is below `opt.kkt_tol_squared`.
inline LassoFit lasso_fit(const Matrix& X, const Vector& y, double lambda,
                          const LassoFit* warm_start = nullptr, const LassoOptions& opt = {}) {
    detail::require_finite(X, y);
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw InputError("lambda must be a finite value >= 0");
    const Eigen::Index n = X.rows(), p = X.cols();

    LassoFit fit;
    fit.loss = LossKind::Squared;
    fit.lambda = lambda;
    fit.beta = Vector::Zero(p);
    fit.intercept = y.mean();
    if (warm_start && warm_start->beta.size() == p) {
        fit.beta = warm_start->beta;
        fit.intercept = warm_start->intercept;
    }
    const Vector col_sq = X.colwise().squaredNorm();
    Vector r = y - X * fit.beta - Vector::Constant(n, fit.intercept);
    const double half_lambda = 0.5 * lambda;

    auto update = [&](Eigen::Index j) {
        if (col_sq[j] == 0.0) {
            const double d = -fit.beta[j];
            fit.beta[j] = 0.0;
            return std::abs(d);
        }
        const double old = fit.beta[j];
        const double rho = X.col(j).dot(r) + col_sq[j] * old;
        const double nb = detail::soft_threshold(rho, half_lambda) / col_sq[j];
        const double d = nb - old;
        if (d != 0.0) {
            r.noalias() -= d * X.col(j);
            fit.beta[j] = nb;
        }
        return std::abs(d);
    };
    auto update_intercept = [&] {
        const double d = r.mean();
        fit.intercept += d;
        r.array() -= d;
        return std::abs(d);
    };

    double last_kkt = std::numeric_limits<double>::infinity();
    std::vector<Eigen::Index> active;
    while (fit.sweeps < opt.max_sweeps) {
        double change = update_intercept();
        for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
        ++fit.sweeps;
        if (change < opt.tol) {
            // Recompute residuals from scratch before certifying.
            r = y - X * fit.beta - Vector::Constant(n, fit.intercept);
            last_kkt = kkt_residual(X, y, fit);
            if (last_kkt < opt.kkt_tol_squared) break;
            continue;
        }
        // Iterate on the current support until it settles, then re-sweep all.
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (fit.beta[j] != 0.0) active.push_back(j);
        while (fit.sweeps < opt.max_sweeps) {
            double c = update_intercept();
            for (auto j : active) c = std::max(c, update(j));
            ++fit.sweeps;
            if (c < opt.tol) break;
        }
    }
    if (!(last_kkt < opt.kkt_tol_squared)) {
        r = y - X * fit.beta - Vector::Constant(n, fit.intercept);
        last_kkt = kkt_residual(X, y, fit);
        if (!(last_kkt < opt.kkt_tol_squared))
            throw SolverError("LASSO did not converge after " + std::to_string(fit.sweeps) +
                                  " sweeps (KKT residual " + csv::format_number(last_kkt) + ")",
                              last_kkt);
    }
    fit.objective_value = lasso_objective(X, y, fit.intercept, fit.beta, lambda, fit.loss);
    fit.selected = detail::support(fit.beta);
    return fit;
}

/// L1-penalized logistic regression. Each outer iteration forms the
/// IRLS quadratic approximation at the current iterate and solves it by
/// weighted coordinate descent. If that step fails to decrease the
/// objective, it is redone with the fixed curvature bound 0.25, which
/// majorizes the logistic loss and guarantees descent.
inline LassoFit logistic_lasso_fit(const Matrix& X, const Vector& y01, double lambda,
                                   const LassoFit* warm_start = nullptr,
                                   const LassoOptions& opt = {}) {
    detail::require_finite(X, y01);
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw InputError("lambda must be a finite value >= 0");
    const Eigen::Index n = X.rows(), p = X.cols();
    double positives = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y01[i] != 0.0 && y01[i] != 1.0) throw InputError("logistic response must be 0/1");
        positives += y01[i];
    }
    if (positives == 0.0 || positives == static_cast<double>(n))
        throw InputError("logistic LASSO needs both classes in the response");

    LassoFit fit;
    fit.loss = LossKind::Logistic;
    fit.lambda = lambda;
    fit.beta = Vector::Zero(p);
    const double prev = positives / static_cast<double>(n);
    fit.intercept = std::log(prev / (1.0 - prev));
    if (warm_start && warm_start->beta.size() == p) {
        fit.beta = warm_start->beta;
        fit.intercept = warm_start->intercept;
    }

    auto objective = [&](double b0, const Vector& b) {
        return lasso_objective(X, y01, b0, b, lambda, LossKind::Logistic);
    };
    const double inner_tol = opt.tol * 1e-2;

    // Minimizes 0.5 sum w (z - b0 - Xb)^2 + lambda |b|_1 starting at (b0, b).
    auto weighted_cd = [&](const Vector& w, const Vector& z, double& b0, Vector& b) {
        Vector r = z - X * b - Vector::Constant(n, b0);
        const double wsum = w.sum();
        Vector wcol(p);
        for (Eigen::Index j = 0; j < p; ++j) wcol[j] = X.col(j).cwiseAbs2().dot(w);
        while (fit.sweeps < opt.max_sweeps) {
            const double d0 = r.dot(w) / wsum;
            b0 += d0;
            r.array() -= d0;
            double change = std::abs(d0);
            for (Eigen::Index j = 0; j < p; ++j) {
                if (wcol[j] <= 0.0) continue;
                const double old = b[j];
                const double rho = X.col(j).cwiseProduct(w).dot(r) + wcol[j] * old;
                const double nb = detail::soft_threshold(rho, lambda) / wcol[j];
                const double d = nb - old;
                if (d != 0.0) {
                    r.noalias() -= d * X.col(j);
                    b[j] = nb;
                }
                change = std::max(change, std::abs(d));
            }
            ++fit.sweeps;
            if (change < inner_tol) break;
        }
    };

    double current = objective(fit.intercept, fit.beta);
    double last_kkt = kkt_residual(X, y01, fit);
    while (last_kkt >= opt.kkt_tol_logistic && fit.sweeps < opt.max_sweeps) {
        const Vector eta = fit.linear_predictor(X);
        Vector w(n), z(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = detail::sigmoid(eta[i]);
            w[i] = std::max(pi * (1.0 - pi), 1e-5);
            z[i] = eta[i] + (y01[i] - pi) / w[i];
        }
        double b0 = fit.intercept;
        Vector b = fit.beta;
        weighted_cd(w, z, b0, b);
        double next = objective(b0, b);
        if (!(next <= current + 1e-12 * std::max(1.0, std::abs(current)))) {
            fit.used_majorizer = true;
            for (Eigen::Index i = 0; i < n; ++i) {
                w[i] = 0.25;
                z[i] = eta[i] + (y01[i] - detail::sigmoid(eta[i])) / 0.25;
            }
            b0 = fit.intercept;
            b = fit.beta;
            weighted_cd(w, z, b0, b);
            next = objective(b0, b);
        }
        fit.intercept = b0;
        fit.beta = b;
        current = next;
        if (fit.beta.cwiseAbs().maxCoeff() > opt.coef_cap || std::abs(fit.intercept) > opt.coef_cap) {
            fit.objective_value = current;
            fit.selected = detail::support(fit.beta);
            throw SeparationError("logistic LASSO diverged (coefficient magnitude above " +
                                      csv::format_number(opt.coef_cap) +
                                      "); classes are (quasi-)separable at lambda " +
                                      csv::format_number(lambda),
                                  fit);
        }
        last_kkt = kkt_residual(X, y01, fit);
    }
    if (!(last_kkt < opt.kkt_tol_logistic))
        throw SolverError("logistic LASSO did not converge after " + std::to_string(fit.sweeps) +
                              " sweeps (KKT residual " + csv::format_number(last_kkt) + ")",
                          last_kkt);
    fit.objective_value = objective(fit.intercept, fit.beta);
    fit.selected = detail::support(fit.beta);
    return fit;
}

inline LassoFit fit_lasso(const Matrix& X, const Vector& y, double lambda, LossKind loss,
                          const LassoFit* warm_start = nullptr, const LassoOptions& opt = {}) {
    return loss == LossKind::Squared ? lasso_fit(X, y, lambda, warm_start, opt)
                                     : logistic_lasso_fit(X, y, lambda, warm_start, opt);
}

/// Smallest lambda at which the all-zero coefficient vector is optimal:
/// max_j |2 X_j'(y - ybar)| for squared loss, max_j |X_j'(y - ybar)| for
/// logistic loss.
inline double lambda_max(const Matrix& X, const Vector& y, LossKind loss) {
    const Vector centered = y.array() - y.mean();
    const double scale = loss == LossKind::Squared ? 2.0 : 1.0;
    return X.cols() == 0 ? 0.0 : scale * (X.transpose() * centered).cwiseAbs().maxCoeff();
}

/// n_lambda log-spaced values from lambda_max down to ratio * lambda_max.
inline LambdaGrid lambda_grid(const Matrix& X, const Vector& y, std::size_t n_lambda = 100,
                              double ratio = 1e-3, LossKind loss = LossKind::Squared) {
    if (n_lambda < 2) throw InputError("lambda grid needs at least 2 values");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("lambda ratio must lie in (0,1)");
    double top = lambda_max(X, y, loss);
    if (!(top > 0.0)) top = std::numeric_limits<double>::min() / ratio;
    LambdaGrid g;
    g.ratio = ratio;
    g.values.resize(n_lambda);
    const double step = std::log(ratio) / static_cast<double>(n_lambda - 1);
    for (std::size_t l = 0; l < n_lambda; ++l)
        g.values[l] = top * std::exp(step * static_cast<double>(l));
    g.values.front() = top;
    g.values.back() = top * ratio;
    return g;
}

struct LambdaTuning {
    std::size_t best_index = 0;
    double lambda_best = 0.0;
    std::vector<double> cv_errors;  // mean held-out loss per grid value
};

/// Held-out loss of one prediction: squared error, or binomial deviance.
inline double heldout_loss(double y, double eta, LossKind loss) {
    if (loss == LossKind::Squared) return (y - eta) * (y - eta);
    return 2.0 * (detail::log1p_exp(eta) - y * eta);
}

/// k-fold CV over the grid with warm starts along the path. Picks the lambda
/// with the lowest mean held-out loss; ties go to the larger lambda. A
/// logistic path that diverges on some fold marks that lambda and every
/// smaller one as unusable (infinite error).
inline LambdaTuning tune_lambda_cv(const Matrix& X, const Vector& y, std::size_t k,
                                   const LambdaGrid& grid, std::uint64_t seed,
                                   LossKind loss = LossKind::Squared,
                                   const LassoOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (k < 2 || n < k)
        throw InputError("inner CV needs n >= k >= 2 (n=" + std::to_string(n) +
                         ", k=" + std::to_string(k) + ")");
    Rng rng(seed);
    const auto folds = make_folds(n, k, rng);
    const std::size_t L = grid.size();
    std::vector<double> total(L, 0.0);

    for (std::size_t f = 0; f < k; ++f) {
        const auto train = folds.train_indices(f);
        const auto test = folds.test_indices(f);
        Matrix Xtr(static_cast<Eigen::Index>(train.size()), X.cols());
        Vector ytr(static_cast<Eigen::Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(train[i]));
            ytr[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(train[i])];
        }
        std::optional<LassoFit> prev;
        for (std::size_t l = 0; l < L; ++l) {
            LassoFit fit;
            try {
                fit = fit_lasso(Xtr, ytr, grid.values[l], loss, prev ? &*prev : nullptr, opt);
            } catch (const SeparationError&) {
                for (std::size_t m = l; m < L; ++m)
                    total[m] = std::numeric_limits<double>::infinity();
                break;
            }
            for (auto i : test) {
                const auto r = static_cast<Eigen::Index>(i);
                const double eta = fit.intercept + X.row(r).dot(fit.beta);
                total[l] += heldout_loss(y[r], eta, loss);
            }
            prev = std::move(fit);
        }
    }

    LambdaTuning t;
    t.cv_errors.resize(L);
    for (std::size_t l = 0; l < L; ++l) t.cv_errors[l] = total[l] / static_cast<double>(n);
    for (std::size_t l = 1; l < L; ++l)
        if (t.cv_errors[l] < t.cv_errors[t.best_index]) t.best_index = l;
    t.lambda_best = grid.values[t.best_index];
    return t;
}

/// Names of the selected features, largest |beta| first (ties by index).
inline std::vector<std::string> selected_features(const LassoFit& fit,
                                                  const std::vector<std::string>& names,
                                                  double tolerance = kSelectionTolerance) {
    std::vector<std::size_t> idx;
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
        if (std::abs(fit.beta[j]) > tolerance) idx.push_back(static_cast<std::size_t>(j));
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(fit.beta[static_cast<Eigen::Index>(a)]) >
               std::abs(fit.beta[static_cast<Eigen::Index>(b)]);
    });
    std::vector<std::string> out;
    for (auto j : idx) out.push_back(names.at(j));
    return out;
}

/// Diagnostic dump of a regularization path: one row per fit.
inline void write_lasso_path_csv(std::ostream& out, const std::vector<LassoFit>& path,
                                 const std::vector<std::string>& names) {
    out << "lambda,objective,intercept";
    for (const auto& n : names) out << ',' << csv::escape(n);
    out << '\n';
    for (const auto& f : path) {
        out << csv::format_number(f.lambda) << ',' << csv::format_number(f.objective_value) << ','
            << csv::format_number(f.intercept);
        for (Eigen::Index j = 0; j < f.beta.size(); ++j) out << ',' << csv::format_number(f.beta[j]);
        out << '\n';
    }
}

}  // namespace sharecast
