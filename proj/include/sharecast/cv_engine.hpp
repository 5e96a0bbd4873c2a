#pragma once

// Repeated k-fold cross-validation of the scale -> select -> fit -> predict
// pipeline. Everything fitted inside a fold (scaler, lambda, selected
// features, forests) sees training rows only; the held-out rows are touched
// once, after fitting, to produce predictions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"
#include "sharecast/evaluation.hpp"
#include "sharecast/folds.hpp"
#include "sharecast/lasso.hpp"
#include "sharecast/parallel.hpp"
#include "sharecast/preprocess.hpp"
#include "sharecast/random_forest.hpp"
#include "sharecast/rng.hpp"

namespace sharecast {

struct LassoSettings {
    std::size_t inner_k = 10;
    std::size_t n_lambda = 100;
    double ratio = 1e-3;
    LassoOptions solver;
};

/// One column of the hyperparameter grid. A fixed value is clamped to the
/// number of features available in the fold; a rule is resolved against it.
struct MtrySpec {
    enum class Rule { Fixed, One, Sqrt, Third, Half, All };
    Rule rule = Rule::Fixed;
    std::size_t value = 0;

    std::size_t resolve(std::size_t p) const {
        const auto pd = static_cast<double>(p);
        std::size_t m = 1;
        switch (rule) {
            case Rule::Fixed: m = value; break;
            case Rule::One: m = 1; break;
            case Rule::Sqrt: m = static_cast<std::size_t>(std::ceil(std::sqrt(pd))); break;
            case Rule::Third: m = (p + 2) / 3; break;
            case Rule::Half: m = (p + 1) / 2; break;
            case Rule::All: m = p; break;
        }
        return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(p, 1));
    }

    std::string label() const {
        switch (rule) {
            case Rule::Fixed: return std::to_string(value);
            case Rule::One: return "1";
            case Rule::Sqrt: return "ceil(sqrt(p))";
            case Rule::Third: return "ceil(p/3)";
            case Rule::Half: return "ceil(p/2)";
            case Rule::All: return "p";
        }
        return "?";
    }

    static MtrySpec fixed(std::size_t v) { return {Rule::Fixed, v}; }
};

/// {1, ceil(sqrt p), ceil(p/3), ceil(p/2), p}, resolved per fold against
/// the features that survive selection. Ordered so that, for p >= 9,
/// mtry is non-decreasing along the grid.
inline std::vector<MtrySpec> default_mtry_grid() {
    using R = MtrySpec::Rule;
    return {{R::One, 0}, {R::Sqrt, 0}, {R::Third, 0}, {R::Half, 0}, {R::All, 0}};
}

/// Fixed grid, sorted ascending with duplicates removed.
inline std::vector<MtrySpec> fixed_mtry_grid(std::vector<std::size_t> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<MtrySpec> g;
    for (auto v : values) {
        if (v == 0) throw InputError("mtry values must be >= 1");
        g.push_back(MtrySpec::fixed(v));
    }
    return g;
}

enum class Metric { PVE, PCC, AUC };

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::PVE: return "PVE";
        case Metric::PCC: return "PCC";
        case Metric::AUC: return "AUC";
    }
    return "?";
}

struct CvConfig {
    std::size_t k = 10;
    std::size_t repetitions = 50;
    std::vector<MtrySpec> mtry_grid = default_mtry_grid();
    LassoSettings lasso;
    Task task = Task::Regression;
    bool use_lasso_selection = true;
    std::uint64_t master_seed = 2020;
    ForestConfig forest;  // mtry and seed are set per fold
    double importance_threshold = 0.5;
    unsigned threads = 1;  // never affects results

    Metric selection_metric() const {
        return task == Task::Regression ? Metric::PVE : Metric::AUC;
    }

    void validate() const {
        if (k < 2) throw InputError("k must be >= 2");
        if (repetitions < 1) throw InputError("repetitions must be >= 1");
        if (mtry_grid.empty()) throw InputError("mtry grid is empty");
        if (forest.n_trees < 1) throw InputError("forest needs at least one tree");
    }
};

/// Held-out predictions: n rows, one column per grid entry.
struct PredictionMatrix {
    Matrix values;
    std::vector<std::string> labels;
};

/// Output of one fold plus the training-side artifacts it produced.
struct FoldResult {
    std::vector<Vector> predictions;  // per grid column, one per test row
    Vector lasso_predictions;         // share or probability scale; empty without LASSO
    std::vector<std::size_t> selected;
    bool fallback = false;
    std::string fallback_reason;

    ScalerParams scaler;
    std::optional<double> lambda;
    std::vector<std::size_t> effective_mtry;  // per grid column
    std::vector<std::uint64_t> forest_fingerprints;  // per grid column
};

namespace detail {

inline Matrix take_columns(const Matrix& X, const std::vector<std::size_t>& cols) {
    Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        out.col(static_cast<Eigen::Index>(c)) = X.col(static_cast<Eigen::Index>(cols[c]));
    return out;
}

inline bool single_class(const Vector& y) {
    return y.size() == 0 || y.minCoeff() == y.maxCoeff();
}

}  // namespace detail

/// Steps, in order: fit the scaler on train; scale train and test; select
/// features by LASSO with lambda tuned by inner CV on train (logit response
/// for regression, logistic loss for classification); fit one forest per
/// distinct effective mtry on the selected columns (share scale); predict
/// the test rows.
///
/// When LASSO cannot run or selects nothing, the fold falls back to all
/// features and records why.
inline FoldResult run_fold(const Dataset& train, const Dataset& test, const CvConfig& config,
                           std::uint64_t fold_seed) {
    if (train.cols() != test.cols()) throw InputError("train/test column counts differ");
    FoldResult r;
    r.scaler = fit_scaler(train.X);
    const Matrix Xtr = apply_scaler(train.X, r.scaler);
    const Matrix Xte = apply_scaler(test.X, r.scaler);
    const std::size_t p = train.cols();
    const bool regression = config.task == Task::Regression;

    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    r.selected = all;

    if (config.use_lasso_selection) {
        try {
            const LossKind loss = regression ? LossKind::Squared : LossKind::Logistic;
            const Vector ytr = regression ? logit(train.y) : train.y;
            const auto grid = lambda_grid(Xtr, ytr, config.lasso.n_lambda, config.lasso.ratio, loss);
            const std::size_t inner_k = std::min(config.lasso.inner_k, train.rows());
            const auto tuning = tune_lambda_cv(Xtr, ytr, inner_k, grid, derive_seed(fold_seed, 1),
                                               loss, config.lasso.solver);
            const auto fit = fit_lasso(Xtr, ytr, tuning.lambda_best, loss, nullptr,
                                       config.lasso.solver);
            r.lambda = tuning.lambda_best;
            r.lasso_predictions = inv_logit(Vector(fit.linear_predictor(Xte)));
            if (fit.selected.empty()) {
                r.fallback = true;
                r.fallback_reason = "LASSO selected no features";
            } else {
                r.selected = fit.selected;
            }
        } catch (const std::exception& e) {
            r.fallback = true;
            r.fallback_reason = e.what();
            r.lambda.reset();
            r.lasso_predictions.resize(0);
        }
    }

    const Matrix Ftr = detail::take_columns(Xtr, r.selected);
    const Matrix Fte = detail::take_columns(Xte, r.selected);
    const std::size_t p_sel = r.selected.size();

    std::vector<std::pair<std::size_t, std::size_t>> fitted;  // (mtry, column holding it)
    for (std::size_t c = 0; c < config.mtry_grid.size(); ++c) {
        const std::size_t m = config.mtry_grid[c].resolve(p_sel);
        r.effective_mtry.push_back(m);
        const auto hit = std::find_if(fitted.begin(), fitted.end(),
                                      [&](const auto& f) { return f.first == m; });
        if (hit != fitted.end()) {
            r.predictions.push_back(r.predictions[hit->second]);
            r.forest_fingerprints.push_back(r.forest_fingerprints[hit->second]);
            continue;
        }
        ForestConfig fc = config.forest;
        fc.mtry = m;
        fc.seed = derive_seed(fold_seed, 2);
        const Forest forest = fit_forest(Ftr, train.y, fc, config.task, 1);
        r.predictions.push_back(predict(forest, Fte));
        r.forest_fingerprints.push_back(fingerprint(forest));
        fitted.push_back({m, c});
    }
    return r;
}

/// Result of one full pass over the k folds.
struct RepetitionResult {
    FoldAssignment folds;
    PredictionMatrix predictions;
    Vector lasso_predictions;  // empty unless every fold produced LASSO predictions
    std::vector<std::vector<std::size_t>> selected_per_fold;
    std::vector<std::optional<double>> lambda_per_fold;
    std::vector<std::string> fallbacks;  // "fold i: reason"
};

namespace detail {

inline std::vector<std::string> grid_labels(const CvConfig& config) {
    std::vector<std::string> labels;
    for (const auto& m : config.mtry_grid) labels.push_back("mtry=" + m.label());
    return labels;
}

inline FoldResult run_fold_of(const Dataset& data, const FoldAssignment& folds, std::size_t f,
                              const CvConfig& config, std::uint64_t fold_seed) {
    const auto tr = folds.train_indices(f);
    const auto te = folds.test_indices(f);
    return run_fold(data.select_rows(tr), data.select_rows(te), config, fold_seed);
}

inline RepetitionResult assemble(const Dataset& data, const FoldAssignment& folds,
                                 std::vector<FoldResult>& results, const CvConfig& config) {
    RepetitionResult rep;
    rep.folds = folds;
    const auto n = static_cast<Eigen::Index>(data.rows());
    const auto M = static_cast<Eigen::Index>(config.mtry_grid.size());
    rep.predictions.labels = grid_labels(config);
    rep.predictions.values = Matrix::Constant(n, M, std::numeric_limits<double>::quiet_NaN());
    bool have_lasso = config.use_lasso_selection;
    Vector lasso = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t f = 0; f < folds.k; ++f) {
        const auto te = folds.test_indices(f);
        auto& fr = results[f];
        for (Eigen::Index c = 0; c < M; ++c)
            for (std::size_t i = 0; i < te.size(); ++i)
                rep.predictions.values(static_cast<Eigen::Index>(te[i]), c) =
                    fr.predictions[static_cast<std::size_t>(c)][static_cast<Eigen::Index>(i)];
        if (fr.lasso_predictions.size() == static_cast<Eigen::Index>(te.size())) {
            for (std::size_t i = 0; i < te.size(); ++i)
                lasso[static_cast<Eigen::Index>(te[i])] = fr.lasso_predictions[static_cast<Eigen::Index>(i)];
        } else {
            have_lasso = false;
        }
        rep.selected_per_fold.push_back(fr.selected);
        rep.lambda_per_fold.push_back(fr.lambda);
        if (fr.fallback)
            rep.fallbacks.push_back("fold " + std::to_string(f) + ": " + fr.fallback_reason);
    }
    if (have_lasso) rep.lasso_predictions = lasso;
    return rep;
}

}  // namespace detail

/// One k-fold pass with partition and per-fold streams derived from
/// `repetition_seed`.
inline RepetitionResult run_cv(const Dataset& data, const CvConfig& config,
                               std::uint64_t repetition_seed) {
    config.validate();
    Rng rng(derive_seed(repetition_seed, 0));
    const auto folds = make_folds(data.rows(), config.k, rng);
    std::vector<FoldResult> results(config.k);
    parallel_for(config.k, config.threads, [&](std::size_t f) {
        results[f] = detail::run_fold_of(data, folds, f, config, derive_seed(repetition_seed, 1, f));
    });
    return detail::assemble(data, folds, results, config);
}

inline double evaluate_metric(Metric m, const Vector& y, const Vector& pred) {
    switch (m) {
        case Metric::PVE: return pve(y, pred);
        case Metric::PCC: return pcc(y, pred);
        case Metric::AUC: return auc(y, pred);
    }
    return 0.0;
}

struct HyperparameterChoice {
    std::size_t best_index = 0;
    std::vector<double> values;
};

/// Metric per column against y; the first (smallest-mtry) maximum wins.
inline HyperparameterChoice select_hyperparameter(const PredictionMatrix& m, const Vector& y,
                                                  Metric metric) {
    HyperparameterChoice c;
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
        c.values.push_back(evaluate_metric(metric, y, Vector(m.values.col(j))));
        if (c.values.back() > c.values[c.best_index]) c.best_index = static_cast<std::size_t>(j);
    }
    return c;
}

struct MetricSummary {
    std::vector<double> per_repetition;
    double mean = 0.0;
    double sd = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Mean +- 1.96 * sd / sqrt(R) across repetitions; R = 1 gives a
/// zero-width interval.
inline MetricSummary summarize(std::vector<double> values) {
    MetricSummary s;
    s.per_repetition = std::move(values);
    const auto& v = s.per_repetition;
    if (v.empty()) return s;
    const double R = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / R;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(ss / (R - 1.0)) : 0.0;
    const double half = 1.96 * s.sd / std::sqrt(R);
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

struct HyperparameterSummary {
    std::string label;
    MetricSummary pve, pcc, auc;  // regression: pve+pcc; classification: auc
};

struct CvReport {
    std::string season;
    std::string kind;
    Task task = Task::Regression;
    bool use_lasso = true;
    std::size_t n = 0;
    std::vector<std::string> feature_names;
    CvConfig config;

    std::vector<HyperparameterSummary> per_hyperparameter;
    std::size_t best_index = 0;  // by mean of the selection metric
    std::vector<std::size_t> best_per_repetition;
    std::optional<HyperparameterSummary> lasso;  // LASSO's own predictions

    std::vector<std::size_t> selection_counts;  // per feature, out of total_fits
    std::size_t total_fits = 0;
    std::vector<std::string> most_important;  // frequency > threshold, most frequent first
    std::vector<std::string> fallbacks;
    bool ci_degenerate = false;

    std::vector<RepetitionResult> repetitions;

    double selection_frequency(std::size_t j) const {
        return total_fits ? static_cast<double>(selection_counts[j]) /
                                static_cast<double>(total_fits)
                          : 0.0;
    }
    const HyperparameterSummary& best() const { return per_hyperparameter[best_index]; }
};

/// Runs config.repetitions independent k-fold passes (partition r seeded
/// by derive_seed(master_seed, r)) and aggregates them. All R*k folds run
/// concurrently on config.threads workers; the report does not depend on
/// the thread count.
inline CvReport repeat_cv(const Dataset& data, const CvConfig& config) {
    config.validate();
    if (data.rows() < config.k)
        throw InputError("dataset has " + std::to_string(data.rows()) + " rows, fewer than k=" +
                         std::to_string(config.k));
    const std::size_t R = config.repetitions, k = config.k;

    std::vector<FoldAssignment> partitions;
    for (std::size_t r = 0; r < R; ++r) {
        Rng rng(derive_seed(derive_seed(config.master_seed, r), 0));
        partitions.push_back(make_folds(data.rows(), k, rng));
    }
    std::vector<FoldResult> results(R * k);
    parallel_for(R * k, config.threads, [&](std::size_t t) {
        const std::size_t r = t / k, f = t % k;
        results[t] = detail::run_fold_of(data, partitions[r], f, config,
                                         derive_seed(derive_seed(config.master_seed, r), 1, f));
    });

    CvReport rep;
    rep.season = data.season;
    rep.kind = data.kind;
    rep.task = config.task;
    rep.use_lasso = config.use_lasso_selection;
    rep.n = data.rows();
    rep.feature_names = data.feature_names;
    rep.config = config;
    rep.selection_counts.assign(data.cols(), 0);

    const std::size_t M = config.mtry_grid.size();
    std::vector<std::vector<double>> pve_v(M), pcc_v(M), auc_v(M);
    std::vector<double> lasso_pve, lasso_pcc, lasso_auc;
    const Metric sel = config.selection_metric();
    for (std::size_t r = 0; r < R; ++r) {
        std::vector<FoldResult> fold_results(std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>(r * k)),
                                             std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>((r + 1) * k)));
        auto rr = detail::assemble(data, partitions[r], fold_results, config);
        for (std::size_t c = 0; c < M; ++c) {
            const Vector col = rr.predictions.values.col(static_cast<Eigen::Index>(c));
            if (config.task == Task::Regression) {
                pve_v[c].push_back(pve(data.y, col));
                pcc_v[c].push_back(pcc(data.y, col));
            } else {
                auc_v[c].push_back(auc(data.y, col));
            }
        }
        rep.best_per_repetition.push_back(
            select_hyperparameter(rr.predictions, data.y, sel).best_index);
        if (rr.lasso_predictions.size() == data.y.size()) {
            if (config.task == Task::Regression) {
                lasso_pve.push_back(pve(data.y, rr.lasso_predictions));
                lasso_pcc.push_back(pcc(data.y, rr.lasso_predictions));
            } else {
                lasso_auc.push_back(auc(data.y, rr.lasso_predictions));
            }
        }
        if (config.use_lasso_selection) {
            for (std::size_t f = 0; f < k; ++f) {
                ++rep.total_fits;
                const auto& fr = fold_results[f];
                if (fr.fallback) continue;  // nothing was selected by LASSO
                for (auto j : fr.selected) ++rep.selection_counts[j];
            }
        }
        for (auto& note : rr.fallbacks)
            rep.fallbacks.push_back("repetition " + std::to_string(r) + ", " + note);
        rep.repetitions.push_back(std::move(rr));
    }

    const auto labels = detail::grid_labels(config);
    for (std::size_t c = 0; c < M; ++c) {
        HyperparameterSummary h;
        h.label = labels[c];
        h.pve = summarize(pve_v[c]);
        h.pcc = summarize(pcc_v[c]);
        h.auc = summarize(auc_v[c]);
        rep.per_hyperparameter.push_back(std::move(h));
    }
    auto selection_mean = [&](const HyperparameterSummary& h) {
        return sel == Metric::AUC ? h.auc.mean : h.pve.mean;
    };
    for (std::size_t c = 1; c < M; ++c)
        if (selection_mean(rep.per_hyperparameter[c]) >
            selection_mean(rep.per_hyperparameter[rep.best_index]))
            rep.best_index = c;
    if (lasso_pve.size() == R || lasso_auc.size() == R) {
        HyperparameterSummary h;
        h.label = "LASSO";
        h.pve = summarize(lasso_pve);
        h.pcc = summarize(lasso_pcc);
        h.auc = summarize(lasso_auc);
        rep.lasso = std::move(h);
    }

    std::vector<std::size_t> order(data.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rep.selection_counts[a] > rep.selection_counts[b];
    });
    for (auto j : order)
        if (rep.selection_frequency(j) > config.importance_threshold)
            rep.most_important.push_back(data.feature_names[j]);
    rep.ci_degenerate = R == 1;
    return rep;
}

}  // namespace sharecast
