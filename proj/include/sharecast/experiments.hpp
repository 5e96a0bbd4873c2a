#pragma once

// Synthetic data with known truth, season-ahead validation, the internal
// (training-data) evaluation, and the overfitting demonstration on noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sharecast/csv.hpp"
#include "sharecast/cv_engine.hpp"
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

enum class SyntheticForm { Linear, Nonlinear };
enum class SyntheticScale { Raw, Share };

struct SyntheticSpec {
    std::size_t n = 450;
    std::size_t p = 30;
    std::vector<std::size_t> support;
    SyntheticForm form = SyntheticForm::Linear;
    double noise_sd = 1.0;
    std::uint64_t seed = 1;
    std::vector<double> coefficients;  // linear form; empty draws them
    SyntheticScale scale = SyntheticScale::Raw;
    double share_offset = -3.0;  // share = inv_logit(offset + slope * (f + noise))
    double share_slope = 0.5;
};

struct SyntheticData {
    Dataset data;
    Vector signal;                 // f(X_support), before noise and link
    std::vector<double> coefficients;  // linear form only
    std::vector<std::size_t> support;
};

/// Term t of the nonlinear form, applied to its support column.
inline double nonlinear_term(std::size_t t, double x) {
    switch (t % 4) {
        case 0: return 2.0 * std::sin(1.5 * x);
        case 1: return x > 0.0 ? 1.5 : -1.5;
        case 2: return x * x - 1.0;
        default: return 2.0 * std::tanh(3.0 * (x + 0.5));
    }
}

/// X standard normal; y = f(X_support) + noise on the raw scale, or its
/// inverse logit (after an affine map) on the share scale.
inline SyntheticData synthetic_generate(const SyntheticSpec& spec) {
    if (spec.n < 1 || spec.p < 1) throw InputError("synthetic data needs n, p >= 1");
    if (spec.support.size() > spec.p) throw InputError("support larger than p");
    for (auto j : spec.support)
        if (j >= spec.p) throw InputError("support index out of range");
    if (!spec.coefficients.empty() && spec.coefficients.size() != spec.support.size())
        throw InputError("one coefficient per support index");
    if (spec.noise_sd < 0.0) throw InputError("noise_sd must be >= 0");

    Rng rng(spec.seed);
    SyntheticData out;
    out.support = spec.support;
    auto& d = out.data;
    d.X.resize(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.p));
    for (Eigen::Index i = 0; i < d.X.rows(); ++i)
        for (Eigen::Index j = 0; j < d.X.cols(); ++j) d.X(i, j) = standard_normal(rng);
    if (spec.form == SyntheticForm::Linear) {
        out.coefficients = spec.coefficients;
        if (out.coefficients.empty())
            for (std::size_t t = 0; t < spec.support.size(); ++t) {
                const double mag = 0.5 + 1.5 * uniform01(rng);
                out.coefficients.push_back(uniform01(rng) < 0.5 ? -mag : mag);
            }
    }
    out.signal = Vector::Zero(d.X.rows());
    for (Eigen::Index i = 0; i < d.X.rows(); ++i)
        for (std::size_t t = 0; t < spec.support.size(); ++t) {
            const double x = d.X(i, static_cast<Eigen::Index>(spec.support[t]));
            out.signal[i] += spec.form == SyntheticForm::Linear ? out.coefficients[t] * x
                                                                : nonlinear_term(t, x);
        }
    d.y.resize(d.X.rows());
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
        const double raw = out.signal[i] + spec.noise_sd * standard_normal(rng);
        d.y[i] = spec.scale == SyntheticScale::Raw
                     ? raw
                     : inv_logit(spec.share_offset + spec.share_slope * raw);
    }
    for (std::size_t j = 0; j < spec.p; ++j) d.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < spec.n; ++i) d.row_ids.push_back("row" + std::to_string(i));
    d.task = Task::Regression;
    d.kind = "synthetic";
    d.season = "seed" + std::to_string(spec.seed);
    return out;
}

// ---------------------------------------------------------------------------

/// LASSO selection on a whole dataset: scaler and lambda from these rows
/// only. Returns feature names, strongest first; all features when LASSO
/// selects none.
inline std::vector<std::string> lasso_select(const Dataset& data, const LassoSettings& settings,
                                             std::uint64_t seed) {
    const bool reg = data.task == Task::Regression;
    const LossKind loss = reg ? LossKind::Squared : LossKind::Logistic;
    const Matrix Z = apply_scaler(data.X, fit_scaler(data.X));
    const Vector y = reg ? logit(data.y) : data.y;
    const auto grid = lambda_grid(Z, y, settings.n_lambda, settings.ratio, loss);
    const auto tuning = tune_lambda_cv(Z, y, std::min(settings.inner_k, data.rows()), grid, seed,
                                       loss, settings.solver);
    const auto fit = fit_lasso(Z, y, tuning.lambda_best, loss, nullptr, settings.solver);
    auto names = selected_features(fit, data.feature_names);
    return names.empty() ? data.feature_names : names;
}

struct ValidationResult {
    double pve = 0.0, pcc = 0.0, auc = 0.0;  // pve/pcc for regression, auc for classification
    std::vector<std::string> features;
    std::size_t n_train = 0, n_test = 0;
    std::uint64_t forest_fingerprint = 0;
    ScalerParams scaler;
};

/// Fit on all of season t restricted to `features`, predict season t+1.
/// The test season is read only after the forest is grown.
inline ValidationResult season_ahead_validation(const Dataset& train, const Dataset& test,
                                                const std::vector<std::string>& features,
                                                const ForestConfig& forest) {
    if (train.task != test.task) throw InputError("train and test seasons have different tasks");
    if (features.empty()) throw InputError("no features selected");
    const Dataset tr = train.select_columns(features);
    const Dataset te = test.select_columns(features);
    ValidationResult v;
    v.features = features;
    v.n_train = tr.rows();
    v.n_test = te.rows();
    v.scaler = fit_scaler(tr.X);
    const Forest f = fit_forest(apply_scaler(tr.X, v.scaler), tr.y, forest, tr.task, 1,
                                tr.feature_names);
    v.forest_fingerprint = fingerprint(f);
    const Vector pred = predict(f, apply_scaler(te.X, v.scaler));
    if (tr.task == Task::Regression) {
        v.pve = pve(te.y, pred);
        v.pcc = pcc(te.y, pred);
    } else {
        v.auc = auc(te.y, pred);
    }
    return v;
}

// ---------------------------------------------------------------------------

struct InternalEvaluation {
    std::vector<std::string> labels;
    std::vector<double> pve, pcc, auc;  // per grid column
    std::optional<double> lasso_pve, lasso_pcc, lasso_auc;
    std::vector<std::size_t> selected;
};

/// The optimistic protocol: standardize, tune, select and fit on every row,
/// then score the predictions on those same rows.
inline InternalEvaluation internal_evaluation(const Dataset& data, const CvConfig& config) {
    InternalEvaluation ev;
    const FoldResult fr = run_fold(data, data, config, derive_seed(config.master_seed, 0x1e));
    ev.labels = detail::grid_labels(config);
    ev.selected = fr.selected;
    const bool reg = config.task == Task::Regression;
    for (const auto& p : fr.predictions) {
        if (reg) {
            ev.pve.push_back(pve(data.y, p));
            ev.pcc.push_back(pcc(data.y, p));
        } else {
            ev.auc.push_back(auc(data.y, p));
        }
    }
    if (fr.lasso_predictions.size() == data.y.size()) {
        if (reg) {
            ev.lasso_pve = pve(data.y, fr.lasso_predictions);
            ev.lasso_pcc = pcc(data.y, fr.lasso_predictions);
        } else {
            ev.lasso_auc = auc(data.y, fr.lasso_predictions);
        }
    }
    return ev;
}

// ---------------------------------------------------------------------------

struct DemoResult {
    std::vector<std::size_t> levels;
    std::vector<double> internal_pcc;
    std::vector<double> external_pve;
};

struct DemoOptions {
    std::size_t n = 400;
    std::size_t p = 20;
    std::vector<std::size_t> levels = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
    std::size_t k = 10;
    std::uint64_t seed = 12345;
};

/// Regression tree of depth `level` (one unbootstrapped tree, every feature
/// tried at every split, leaves down to one row).
inline ForestConfig demo_tree_config(std::size_t level, std::size_t p, std::uint64_t seed) {
    ForestConfig c;
    c.n_trees = 1;
    c.mtry = p;
    c.min_leaf = 1;
    c.max_depth = level;
    c.bootstrap = false;
    c.seed = seed;
    return c;
}

/// Pure noise in, increasing model complexity: the fit to its own training
/// rows keeps improving while held-out performance stays at or below zero.
inline DemoResult leakage_demo(const DemoOptions& opt) {
    if (opt.levels.empty()) throw InputError("no complexity levels");
    for (std::size_t i = 0; i < opt.levels.size(); ++i) {
        if (opt.levels[i] < 1) throw InputError("complexity levels must be >= 1");
        if (i && opt.levels[i] <= opt.levels[i - 1])
            throw InputError("complexity levels must be increasing");
    }
    SyntheticSpec spec;
    spec.n = opt.n;
    spec.p = opt.p;
    spec.noise_sd = 1.0;
    spec.seed = opt.seed;
    const Dataset data = synthetic_generate(spec).data;
    Rng fold_rng(derive_seed(opt.seed, 1));
    const auto folds = make_folds(data.rows(), opt.k, fold_rng);

    DemoResult r;
    r.levels = opt.levels;
    for (auto level : opt.levels) {
        const auto cfg = demo_tree_config(level, opt.p, derive_seed(opt.seed, 2, level));
        const Forest whole = fit_forest(data.X, data.y, cfg, Task::Regression);
        r.internal_pcc.push_back(pcc(data.y, predict(whole, data.X)));
        Vector held(data.y.size());
        for (std::size_t f = 0; f < opt.k; ++f) {
            const auto tr = data.select_rows(folds.train_indices(f));
            const auto te_idx = folds.test_indices(f);
            const auto te = data.select_rows(te_idx);
            const Vector pr = predict(fit_forest(tr.X, tr.y, cfg, Task::Regression), te.X);
            for (std::size_t i = 0; i < te_idx.size(); ++i)
                held[static_cast<Eigen::Index>(te_idx[i])] = pr[static_cast<Eigen::Index>(i)];
        }
        r.external_pve.push_back(pve(data.y, held));
    }
    return r;
}

inline void write_demo_csv(std::ostream& out, const DemoResult& r,
                           const std::vector<std::string>& comment = {}) {
    for (const auto& line : comment) out << "# " << line << "\n";
    out << "level,internal_pcc,external_pve\n";
    for (std::size_t i = 0; i < r.levels.size(); ++i)
        out << r.levels[i] << ',' << csv::format_number(r.internal_pcc[i]) << ','
            << csv::format_number(r.external_pve[i]) << "\n";
}

inline DemoResult read_demo_csv(std::istream& in) {
    const auto t = csv::read(in);
    const auto cl = t.find("level"), ci = t.find("internal_pcc"), ce = t.find("external_pve");
    if (!cl || !ci || !ce) throw InputError("demo CSV lacks level/internal_pcc/external_pve");
    DemoResult r;
    for (const auto& row : t.rows) {
        const auto level = csv::parse_number(row.cells[*cl]);
        const auto a = csv::parse_number(row.cells[*ci]);
        const auto b = csv::parse_number(row.cells[*ce]);
        if (!level || !a || !b) throw InputError("empty cell in demo CSV");
        r.levels.push_back(static_cast<std::size_t>(*level));
        r.internal_pcc.push_back(*a);
        r.external_pve.push_back(*b);
    }
    return r;
}

inline std::string demo_markdown(const DemoResult& r) {
    std::ostringstream o;
    o << "| tree depth | internal PCC | external PVE |\n|---|---|---|\n";
    char buf[96];
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        std::snprintf(buf, sizeof buf, "| %zu | %.3f | %.3f |\n", r.levels[i], r.internal_pcc[i],
                      r.external_pve[i]);
        o << buf;
    }
    return o.str();
}

}  // namespace sharecast
