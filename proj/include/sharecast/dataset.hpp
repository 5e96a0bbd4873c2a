#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sharecast/error.hpp"

namespace sharecast {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Task { Regression, Classification };

inline const char* to_string(Task t) {
    return t == Task::Regression ? "regression" : "classification";
}

/// Design matrix plus response. Missing predictor cells are NaN until
/// they pass through `apply_scaler`, which imputes them to 0 (the
/// training mean on the standardized scale).
///
/// Regression responses are salary shares in (0,1); classification
/// responses are 0/1 share classes.
struct Dataset {
    Matrix X;
    Vector y;
    std::vector<std::string> feature_names;
    std::vector<std::string> row_ids;
    Task task = Task::Regression;
    std::string season;
    std::string kind;

    std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

    std::optional<std::size_t> column(const std::string& name) const {
        for (std::size_t j = 0; j < feature_names.size(); ++j)
            if (feature_names[j] == name) return j;
        return std::nullopt;
    }

    Dataset select_rows(std::span<const std::size_t> idx) const {
        Dataset out = with_shape(idx.size(), cols());
        out.feature_names = feature_names;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto src = static_cast<Eigen::Index>(idx[r]);
            out.X.row(static_cast<Eigen::Index>(r)) = X.row(src);
            out.y[static_cast<Eigen::Index>(r)] = y[src];
            if (!row_ids.empty()) out.row_ids.push_back(row_ids[idx[r]]);
        }
        return out;
    }

    Dataset select_columns(std::span<const std::size_t> idx) const {
        Dataset out = with_shape(rows(), idx.size());
        out.y = y;
        out.row_ids = row_ids;
        for (std::size_t c = 0; c < idx.size(); ++c) {
            out.X.col(static_cast<Eigen::Index>(c)) = X.col(static_cast<Eigen::Index>(idx[c]));
            out.feature_names.push_back(feature_names.at(idx[c]));
        }
        return out;
    }

    /// Columns by name, in the order given. Throws InputError when a name
    /// is absent.
    Dataset select_columns(const std::vector<std::string>& names) const {
        std::vector<std::size_t> idx;
        for (const auto& n : names) {
            const auto j = column(n);
            if (!j) throw InputError("missing column " + n + " in season " + season);
            idx.push_back(*j);
        }
        return select_columns(std::span<const std::size_t>(idx));
    }

private:
    Dataset with_shape(std::size_t r, std::size_t c) const {
        Dataset out;
        out.X.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        out.y.resize(static_cast<Eigen::Index>(r));
        out.task = task;
        out.season = season;
        out.kind = kind;
        return out;
    }
};

}  // namespace sharecast
