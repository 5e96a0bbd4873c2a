#pragma once

// Machine (JSON) and human (markdown) renderings of CV results.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharecast/cv_engine.hpp"
#include "sharecast/rng.hpp"

namespace sharecast {

using Json = nlohmann::ordered_json;

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Everything that can change a result. The thread count is left out on
/// purpose: it cannot.
inline Json config_json(const CvConfig& c) {
    Json grid = Json::array();
    for (const auto& m : c.mtry_grid) grid.push_back(m.label());
    Json forest = {{"n_trees", c.forest.n_trees},
                   {"min_leaf", c.forest.min_leaf},
                   {"max_depth", c.forest.max_depth ? Json(*c.forest.max_depth) : Json(nullptr)},
                   {"bootstrap", c.forest.bootstrap}};
    Json lasso = {{"inner_k", c.lasso.inner_k},
                  {"n_lambda", c.lasso.n_lambda},
                  {"lambda_ratio", c.lasso.ratio},
                  {"tol", c.lasso.solver.tol},
                  {"max_sweeps", c.lasso.solver.max_sweeps}};
    return {{"task", to_string(c.task)},
            {"k", c.k},
            {"repetitions", c.repetitions},
            {"mtry_grid", grid},
            {"use_lasso_selection", c.use_lasso_selection},
            {"lasso", lasso},
            {"forest", forest},
            {"importance_threshold", c.importance_threshold},
            {"master_seed", c.master_seed}};
}

inline std::uint64_t config_hash(const Json& j) { return fnv1a64(j.dump()); }
inline std::uint64_t config_hash(const CvConfig& c) { return config_hash(config_json(c)); }

inline Json to_json(const MetricSummary& s) {
    return {{"mean", s.mean},     {"sd", s.sd},   {"ci_low", s.ci_low}, {"ci_high", s.ci_high},
            {"min", s.min},       {"max", s.max}, {"per_repetition", s.per_repetition}};
}

inline Json to_json(const HyperparameterSummary& h, Task task) {
    Json j = {{"label", h.label}};
    if (task == Task::Regression) {
        j["pve"] = to_json(h.pve);
        j["pcc"] = to_json(h.pcc);
    } else {
        j["auc"] = to_json(h.auc);
    }
    return j;
}

/// Deterministic: no timestamps, no thread counts.
inline Json to_json(const CvReport& r, bool include_predictions = false) {
    const Json cfg = config_json(r.config);
    Json j;
    j["season"] = r.season;
    j["kind"] = r.kind;
    j["task"] = to_string(r.task);
    j["use_lasso"] = r.use_lasso;
    j["n"] = r.n;
    j["p"] = r.feature_names.size();
    j["seed"] = r.config.master_seed;
    j["config_hash"] = hex64(config_hash(cfg));
    j["config"] = cfg;
    j["selection_metric"] = to_string(r.config.selection_metric());
    Json hp = Json::array();
    for (const auto& h : r.per_hyperparameter) hp.push_back(to_json(h, r.task));
    j["hyperparameters"] = hp;
    j["best"] = r.per_hyperparameter.empty() ? "" : r.best().label;
    j["best_per_repetition"] = r.best_per_repetition;
    j["lasso"] = r.lasso ? to_json(*r.lasso, r.task) : Json(nullptr);
    Json feats = Json::array();
    for (std::size_t f = 0; f < r.feature_names.size(); ++f)
        feats.push_back({{"name", r.feature_names[f]},
                         {"count", r.selection_counts[f]},
                         {"frequency", r.selection_frequency(f)}});
    j["selection"] = {{"total_fits", r.total_fits},
                      {"features", feats},
                      {"most_important", r.most_important}};
    j["fallbacks"] = r.fallbacks;
    j["ci_degenerate"] = r.ci_degenerate;
    if (include_predictions) {
        Json reps = Json::array();
        for (const auto& rep : r.repetitions) {
            Json cols = Json::array();
            for (Eigen::Index c = 0; c < rep.predictions.values.cols(); ++c)
                cols.push_back(std::vector<double>(rep.predictions.values.col(c).begin(),
                                                   rep.predictions.values.col(c).end()));
            reps.push_back({{"fold_of", rep.folds.fold_of}, {"columns", cols}});
        }
        j["predictions"] = reps;
    }
    return j;
}

inline std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Per-hyperparameter table for one report.
inline std::string to_markdown(const CvReport& r) {
    std::ostringstream o;
    const bool reg = r.task == Task::Regression;
    o << "### " << (r.kind.empty() ? "dataset" : r.kind)
      << (r.season.empty() ? "" : " " + r.season) << " ("
      << (r.use_lasso ? "with LASSO" : "without LASSO") << ", " << r.n << " rows, "
      << r.feature_names.size() << " features)\n\n";
    o << "config " << hex64(config_hash(r.config)) << ", seed " << r.config.master_seed << ", R = "
      << r.config.repetitions << ", k = " << r.config.k << "\n\n";
    auto cell = [](const MetricSummary& s) {
        return fixed(s.mean) + " [" + fixed(s.ci_low) + ", " + fixed(s.ci_high) + "]";
    };
    if (reg)
        o << "| model | PVE | PCC |\n|---|---|---|\n";
    else
        o << "| model | AUC |\n|---|---|\n";
    auto row = [&](const HyperparameterSummary& h, bool best) {
        o << "| " << h.label << (best ? " (best)" : "") << " | ";
        if (reg)
            o << cell(h.pve) << " | " << cell(h.pcc) << " |\n";
        else
            o << cell(h.auc) << " |\n";
    };
    for (std::size_t c = 0; c < r.per_hyperparameter.size(); ++c)
        row(r.per_hyperparameter[c], c == r.best_index);
    if (r.lasso) row(*r.lasso, false);
    if (r.ci_degenerate) o << "\nSingle repetition: intervals collapse to the point estimate.\n";
    if (r.use_lasso) {
        o << "\nMost frequently selected (> " << fixed(r.config.importance_threshold, 2)
          << " of " << r.total_fits << " fits): ";
        if (r.most_important.empty()) o << "none";
        for (std::size_t i = 0; i < r.most_important.size(); ++i)
            o << (i ? ", " : "") << r.most_important[i];
        o << "\n";
    }
    if (!r.fallbacks.empty())
        o << "\n" << r.fallbacks.size() << " fold(s) used all features after a LASSO fallback.\n";
    return o.str();
}

namespace detail {

template <class Cell>
std::string grid_table(const std::vector<const CvReport*>& reports, Cell cell) {
    std::vector<std::string> kinds, seasons;
    for (const auto* r : reports) {
        if (std::find(kinds.begin(), kinds.end(), r->kind) == kinds.end()) kinds.push_back(r->kind);
        if (std::find(seasons.begin(), seasons.end(), r->season) == seasons.end())
            seasons.push_back(r->season);
    }
    std::ostringstream o;
    o << "| statistics |";
    for (const auto& s : seasons) o << " " << s << " |";
    o << "\n|---|";
    for (std::size_t i = 0; i < seasons.size(); ++i) o << "---|";
    o << "\n";
    for (const auto& k : kinds) {
        o << "| " << k << " |";
        for (const auto& s : seasons) {
            const auto it = std::find_if(reports.begin(), reports.end(), [&](const CvReport* r) {
                return r->kind == k && r->season == s;
            });
            o << " " << (it == reports.end() ? std::string("-") : cell(**it)) << " |";
        }
        o << "\n";
    }
    return o.str();
}

}  // namespace detail

/// Rows are statistic kinds, columns seasons, one block each for runs with
/// and without LASSO selection. Cells hold the best hyperparameter's mean.
inline std::string performance_table(const std::vector<CvReport>& reports, Metric metric) {
    std::ostringstream o;
    for (bool with : {true, false}) {
        std::vector<const CvReport*> block;
        for (const auto& r : reports)
            if (r.use_lasso == with) block.push_back(&r);
        if (block.empty()) continue;
        o << "**" << (with ? "With LASSO" : "Without LASSO") << "** (" << to_string(metric)
          << ")\n\n";
        o << detail::grid_table(block, [&](const CvReport& r) {
            const auto& h = r.best();
            const MetricSummary& s =
                metric == Metric::PVE ? h.pve : metric == Metric::PCC ? h.pcc : h.auc;
            return fixed(s.mean);
        });
        o << "\n";
    }
    return o.str();
}

/// Features above the importance threshold per dataset.
inline std::string importance_table(const std::vector<CvReport>& reports) {
    std::vector<const CvReport*> block;
    for (const auto& r : reports)
        if (r.use_lasso) block.push_back(&r);
    if (block.empty()) return {};
    return detail::grid_table(block, [](const CvReport& r) {
        std::string s;
        for (std::size_t i = 0; i < r.most_important.size(); ++i)
            s += (i ? ", " : "") + r.most_important[i];
        return s.empty() ? std::string("none") : s;
    });
}

struct ClassCount {
    std::string season;
    std::size_t low = 0;
    std::size_t high = 0;
};

inline std::string class_count_table(const std::vector<ClassCount>& counts, double threshold) {
    std::ostringstream o;
    o << "| season | share < " << fixed(threshold, 2) << " | share >= " << fixed(threshold, 2)
      << " | total |\n|---|---|---|---|\n";
    for (const auto& c : counts)
        o << "| " << c.season << " | " << c.low << " | " << c.high << " | " << c.low + c.high
          << " |\n";
    return o.str();
}

}  // namespace sharecast
