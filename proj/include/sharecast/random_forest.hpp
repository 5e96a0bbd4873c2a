#pragma once

// CART random forest for regression and 0/1 classification.
//
// Each tree is grown on a bootstrap sample drawn from a canonical row order
// (rows sorted by content), so two datasets that differ only in row order
// produce identical forests for the same seed. Tree i draws from its own
// stream derive_seed(seed, i); the forest is identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"
#include "sharecast/parallel.hpp"
#include "sharecast/rng.hpp"

namespace sharecast {

struct ForestConfig {
    std::size_t n_trees = 500;
    std::size_t mtry = 0;      // 0: ceil(p/3) regression, ceil(sqrt p) classification
    std::size_t min_leaf = 0;  // 0: 5 regression, 1 classification
    std::optional<std::size_t> max_depth;  // nullopt: unlimited
    bool bootstrap = true;
    std::uint64_t seed = 0;

    /// Copy with defaults resolved for p features; validates ranges.
    ForestConfig resolved(std::size_t p, Task task) const {
        ForestConfig c = *this;
        if (c.n_trees < 1) throw InputError("forest needs at least one tree");
        if (p == 0) throw InputError("forest needs at least one feature");
        if (c.mtry == 0)
            c.mtry = task == Task::Regression
                         ? (p + 2) / 3
                         : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
        if (c.mtry < 1 || c.mtry > p)
            throw InputError("mtry " + std::to_string(c.mtry) + " outside [1, " +
                             std::to_string(p) + "]");
        if (c.min_leaf == 0) c.min_leaf = task == Task::Regression ? 5 : 1;
        return c;
    }
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x[feature] <= threshold goes left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;  // mean response (class-1 fraction for classification)
    std::uint32_t n_samples = 0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> x) const {
        const TreeNode* node = &nodes[0];
        while (!node->is_leaf())
            node = &nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                        : node->right];
        return *node;
    }
    double predict(std::span<const double> x) const { return leaf_for(x).value; }
    std::size_t depth() const;
    bool operator==(const Tree&) const = default;
};

inline std::size_t Tree::depth() const {
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (!nodes[i].is_leaf()) {
            stack.push_back({nodes[i].left, d + 1});
            stack.push_back({nodes[i].right, d + 1});
        }
    }
    return best;
}

struct Forest {
    std::vector<Tree> trees;
    ForestConfig config;  // resolved
    Task task = Task::Regression;
    std::vector<std::string> feature_names;
    std::size_t n_features = 0;
};

namespace detail {

// Grows one CART tree on the sample multiset `samples` (row indices into
// X, duplicates allowed). Keeps, for every feature, the sample positions
// sorted by that feature; a node owns the same [begin, end) segment in each
// order, and splitting stably partitions every order, so each level costs
// O(p * m) after the initial sort.
class TreeGrower {
public:
    // `row_orders[j]` lists the rows of X sorted by feature j.
    TreeGrower(const Matrix& X, const Vector& y, const ForestConfig& cfg,
               std::span<const std::size_t> samples,
               const std::vector<std::vector<std::uint32_t>>& row_orders)
        : cfg_(cfg), p_(static_cast<std::size_t>(X.cols())), m_(samples.size()) {
        xs_.resize(p_ * m_);
        ys_.resize(m_);
        for (std::size_t pos = 0; pos < m_; ++pos) {
            const auto r = static_cast<Eigen::Index>(samples[pos]);
            ys_[pos] = y[r];
            for (std::size_t j = 0; j < p_; ++j)
                xs_[j * m_ + pos] = X(r, static_cast<Eigen::Index>(j));
        }
        // Bucket sample positions by row, then read each feature's order
        // through the buckets: O(n + m) per feature instead of a sort.
        const auto n = static_cast<std::size_t>(X.rows());
        std::vector<std::uint32_t> start(n + 1, 0), by_row(m_);
        for (auto r : samples) ++start[r + 1];
        for (std::size_t r = 0; r < n; ++r) start[r + 1] += start[r];
        std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
        for (std::size_t pos = 0; pos < m_; ++pos)
            by_row[fill[samples[pos]]++] = static_cast<std::uint32_t>(pos);
        order_.resize(p_ * m_);
        for (std::size_t j = 0; j < p_; ++j) {
            auto* ord = &order_[j * m_];
            std::size_t k = 0;
            for (auto r : row_orders[j])
                for (auto q = start[r]; q < start[r + 1]; ++q) ord[k++] = by_row[q];
        }
    }

    Tree grow(Rng& rng) {
        if (m_ == 0) throw InputError("cannot grow a tree on zero rows");
        goes_left_.assign(m_, 0);
        scratch_.resize(m_);
        features_.resize(p_);
        std::iota(features_.begin(), features_.end(), std::size_t{0});

        Tree tree;
        tree.nodes.emplace_back();
        struct Pending {
            std::uint32_t node;
            std::size_t begin, end, depth;
        };
        std::vector<Pending> stack{{0, 0, m_, 0}};
        while (!stack.empty()) {
            const Pending cur = stack.back();
            stack.pop_back();
            const auto split = find_split(cur.begin, cur.end, cur.depth, rng);
            TreeNode& node = tree.nodes[cur.node];
            node.n_samples = static_cast<std::uint32_t>(cur.end - cur.begin);
            node.value = leaf_value(cur.begin, cur.end);
            if (!split) continue;

            const std::size_t mid =
                partition(cur.begin, cur.end, split->feature, split->threshold, cur.depth + 1);
            const auto left = static_cast<std::uint32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            TreeNode& parent = tree.nodes[cur.node];
            parent.feature = static_cast<std::int32_t>(split->feature);
            parent.threshold = split->threshold;
            parent.left = left;
            parent.right = left + 1;
            stack.push_back({left + 1, mid, cur.end, cur.depth + 1});
            stack.push_back({left, cur.begin, mid, cur.depth + 1});
        }
        return tree;
    }

private:
    struct Split {
        std::size_t feature;
        double threshold;
    };

    double x(std::uint32_t pos, std::size_t j) const { return xs_[j * m_ + pos]; }
    double yv(std::uint32_t pos) const { return ys_[pos]; }

    double leaf_value(std::size_t begin, std::size_t end) const {
        const auto* ord = &order_[0];
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = yv(ord[i]);
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return std::clamp(sum / static_cast<double>(end - begin), lo, hi);
    }

    // Best (feature, threshold) by decrease in sum of squared deviations;
    // for 0/1 labels this is proportional to the decrease in weighted Gini
    // impurity, so one criterion serves both tasks. Candidate thresholds
    // are midpoints between consecutive distinct values; ties go to the
    // lowest feature index, then the lowest threshold.
    std::optional<Split> find_split(std::size_t begin, std::size_t end, std::size_t depth,
                                    Rng& rng) {
        const std::size_t count = end - begin;
        if (cfg_.max_depth && depth >= *cfg_.max_depth) return std::nullopt;
        if (count < 2 * cfg_.min_leaf) return std::nullopt;
        const auto* ord0 = &order_[0];
        double total = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = yv(ord0[i]);
            total += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo == hi) return std::nullopt;

        // Partial Fisher-Yates: the first mtry entries become the draw.
        for (std::size_t i = 0; i < cfg_.mtry; ++i) {
            const auto j = i + uniform_index(rng, p_ - i);
            std::swap(features_[i], features_[j]);
        }
        drawn_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(cfg_.mtry));
        std::sort(drawn_.begin(), drawn_.end());

        const double n = static_cast<double>(count);
        const double parent_score = total * total / n;
        double best_score = parent_score;
        std::optional<Split> best;
        for (auto f : drawn_) {
            const auto* ord = &order_[f * m_];
            double left_sum = 0.0;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                left_sum += yv(ord[i]);
                const std::size_t n_left = i + 1 - begin;
                const std::size_t n_right = count - n_left;
                if (n_left < cfg_.min_leaf) continue;
                if (n_right < cfg_.min_leaf) break;
                const double a = x(ord[i], f), b = x(ord[i + 1], f);
                if (!(a < b)) continue;
                const double right_sum = total - left_sum;
                const double score = left_sum * left_sum / static_cast<double>(n_left) +
                                     right_sum * right_sum / static_cast<double>(n_right);
                if (score > best_score) {
                    best_score = score;
                    double t = a + (b - a) * 0.5;
                    if (!(t < b)) t = a;
                    best = Split{f, t};
                }
            }
        }
        return best;
    }

    bool may_split(std::size_t count, std::size_t depth) const {
        return count >= 2 * cfg_.min_leaf && count >= 2 && !(cfg_.max_depth && depth >= *cfg_.max_depth);
    }

    // When neither child can split again only order 0 (which leaf values
    // read) has to be partitioned.
    std::size_t partition(std::size_t begin, std::size_t end, std::size_t f, double threshold,
                          std::size_t child_depth) {
        std::size_t n_left = 0;
        const auto* ordf = &order_[f * m_];
        for (std::size_t i = begin; i < end; ++i) {
            const bool l = x(ordf[i], f) <= threshold;
            goes_left_[ordf[i]] = l;
            n_left += l;
        }
        const bool all = may_split(n_left, child_depth) || may_split(end - begin - n_left, child_depth);
        for (std::size_t j = 0; j < (all ? p_ : 1); ++j) {
            auto* ord = &order_[j * m_];
            std::size_t li = begin, ri = 0;
            for (std::size_t i = begin; i < end; ++i) {
                if (goes_left_[ord[i]]) ord[li++] = ord[i];
                else scratch_[ri++] = ord[i];
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(ri),
                      ord + li);
        }
        return begin + n_left;
    }

    const ForestConfig& cfg_;
    std::size_t p_, m_;
    std::vector<double> xs_;  // feature-major, by sample position
    std::vector<double> ys_;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> drawn_;
};

// Rows sorted by each feature, ties by row index.
inline std::vector<std::vector<std::uint32_t>> feature_row_orders(const Matrix& X) {
    std::vector<std::vector<std::uint32_t>> orders(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        auto& o = orders[static_cast<std::size_t>(j)];
        o.resize(static_cast<std::size_t>(X.rows()));
        std::iota(o.begin(), o.end(), std::uint32_t{0});
        std::stable_sort(o.begin(), o.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return X(a, j) < X(b, j); });
    }
    return orders;
}

// Row order that depends only on row contents (hash, then values).
inline std::vector<std::size_t> canonical_row_order(const Matrix& X, const Vector& y) {
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::uint64_t> hash(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&](double v) {
            if (v == 0.0) v = 0.0;  // fold -0.0
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = mix64(h ^ bits);
        };
        for (Eigen::Index j = 0; j < X.cols(); ++j) mix(X(static_cast<Eigen::Index>(i), j));
        mix(y[static_cast<Eigen::Index>(i)]);
        hash[i] = h;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (hash[a] != hash[b]) return hash[a] < hash[b];
        const auto ra = static_cast<Eigen::Index>(a), rb = static_cast<Eigen::Index>(b);
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            if (X(ra, j) != X(rb, j)) return X(ra, j) < X(rb, j);
        if (y[ra] != y[rb]) return y[ra] < y[rb];
        return false;
    });
    return order;
}

inline void check_training_input(const Matrix& X, const Vector& y, Task task) {
    if (X.rows() == 0) throw InputError("cannot fit a forest on zero rows");
    if (X.rows() != y.size()) throw InputError("forest: X and y row counts differ");
    if (!X.allFinite() || !y.allFinite()) throw InputError("forest: non-finite training value");
    if (task == Task::Classification)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y[i] != 0.0 && y[i] != 1.0) throw InputError("classification labels must be 0/1");
}

}  // namespace detail

/// One CART tree on the given rows (all rows when `samples` is empty).
inline Tree grow_tree(const Matrix& X, const Vector& y, const ForestConfig& config, Rng& rng,
                      std::span<const std::size_t> samples = {},
                      Task task = Task::Regression) {
    detail::check_training_input(X, y, task);
    const auto cfg = config.resolved(static_cast<std::size_t>(X.cols()), task);
    std::vector<std::size_t> all;
    if (samples.empty()) {
        all.resize(static_cast<std::size_t>(X.rows()));
        std::iota(all.begin(), all.end(), std::size_t{0});
        samples = all;
    }
    detail::TreeGrower g(X, y, cfg, samples, detail::feature_row_orders(X));
    return g.grow(rng);
}

/// Grows config.n_trees trees, each on a bootstrap sample of n rows drawn
/// with replacement (or all rows when bootstrap is off).
inline Forest fit_forest(const Matrix& X, const Vector& y, const ForestConfig& config,
                         Task task = Task::Regression, unsigned threads = 1,
                         std::vector<std::string> feature_names = {}) {
    detail::check_training_input(X, y, task);
    Forest forest;
    forest.task = task;
    forest.n_features = static_cast<std::size_t>(X.cols());
    forest.config = config.resolved(forest.n_features, task);
    forest.feature_names = std::move(feature_names);
    forest.trees.resize(forest.config.n_trees);

    const auto canonical = detail::canonical_row_order(X, y);
    const std::size_t n = canonical.size();
    const auto row_orders = detail::feature_row_orders(X);
    parallel_for(forest.config.n_trees, threads, [&](std::size_t t) {
        Rng rng(derive_seed(forest.config.seed, t));
        std::vector<std::size_t> sample(n);
        if (forest.config.bootstrap) {
            for (auto& s : sample) s = canonical[uniform_index(rng, n)];
        } else {
            sample = canonical;
        }
        detail::TreeGrower g(X, y, forest.config, sample, row_orders);
        forest.trees[t] = g.grow(rng);
    });
    return forest;
}

/// Mean of the trees' leaf values. For a regression forest the result
/// lies in [min(y_train), max(y_train)]; for a classification forest it is
/// the mean class-1 fraction.
inline double predict(const Forest& forest, std::span<const double> x) {
    if (x.size() != forest.n_features)
        throw InputError("forest expects " + std::to_string(forest.n_features) +
                         " features, got " + std::to_string(x.size()));
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& t : forest.trees) {
        const double v = t.predict(x);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return std::clamp(sum / static_cast<double>(forest.trees.size()), lo, hi);
}

inline double predict_proba(const Forest& forest, std::span<const double> x) {
    if (forest.task != Task::Classification)
        throw InputError("predict_proba called on a regression forest");
    return predict(forest, x);
}

/// Predictions for every row of X.
inline Vector predict(const Forest& forest, const Matrix& X) {
    if (static_cast<std::size_t>(X.cols()) != forest.n_features)
        throw InputError("forest expects " + std::to_string(forest.n_features) +
                         " features, got " + std::to_string(X.cols()));
    Vector out(X.rows());
    std::vector<double> row(forest.n_features);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = X(i, static_cast<Eigen::Index>(j));
        out[i] = predict(forest, std::span<const double>(row));
    }
    return out;
}

/// Hash of every tree's structure and leaf values.
inline std::uint64_t fingerprint(const Forest& forest) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t v) { h = mix64(h ^ v); };
    auto mixd = [&](double d) {
        std::uint64_t b;
        std::memcpy(&b, &d, sizeof b);
        mix(b);
    };
    for (const auto& t : forest.trees) {
        mix(t.nodes.size());
        for (const auto& n : t.nodes) {
            mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.feature)));
            mixd(n.threshold);
            mix(n.left);
            mix(n.right);
            mixd(n.value);
            mix(n.n_samples);
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Text serialization (doubles in hexfloat, so a reload is bit-exact).
//
//   sharecast-forest 1
//   task regression|classification
//   config <n_trees> <mtry> <min_leaf> <max_depth|-> <bootstrap 0/1> <seed>
//   features <p>
//   <one feature name per line>           (p lines; may be empty)
//   tree <node_count>
//   <feature> <threshold> <left> <right> <value> <n_samples>   (per node)

inline constexpr int kForestFormatVersion = 1;

inline void save_forest(std::ostream& out, const Forest& f) {
    out << "sharecast-forest " << kForestFormatVersion << "\n";
    out << "task " << to_string(f.task) << "\n";
    out << "config " << f.config.n_trees << ' ' << f.config.mtry << ' ' << f.config.min_leaf << ' ';
    if (f.config.max_depth) out << *f.config.max_depth;
    else out << '-';
    out << ' ' << (f.config.bootstrap ? 1 : 0) << ' ' << f.config.seed << "\n";
    out << "features " << f.n_features << "\n";
    for (std::size_t j = 0; j < f.n_features; ++j)
        out << (j < f.feature_names.size() ? f.feature_names[j] : std::string()) << "\n";
    out << std::hexfloat;
    for (const auto& t : f.trees) {
        out << "tree " << t.nodes.size() << "\n";
        for (const auto& n : t.nodes)
            out << n.feature << ' ' << n.threshold << ' ' << n.left << ' ' << n.right << ' '
                << n.value << ' ' << n.n_samples << "\n";
    }
    out << std::defaultfloat;
}

inline Forest load_forest(std::istream& in) {
    auto fail = [](const std::string& what) -> Forest {
        throw InputError("forest file: " + what);
    };
    std::string word, line;
    int version = 0;
    if (!(in >> word >> version) || word != "sharecast-forest") return fail("bad magic");
    if (version != kForestFormatVersion) return fail("unsupported version " + std::to_string(version));
    Forest f;
    std::string task;
    if (!(in >> word >> task) || word != "task") return fail("missing task");
    if (task == "regression") f.task = Task::Regression;
    else if (task == "classification") f.task = Task::Classification;
    else return fail("unknown task " + task);
    std::string depth;
    int boot = 0;
    if (!(in >> word >> f.config.n_trees >> f.config.mtry >> f.config.min_leaf >> depth >> boot >>
          f.config.seed) ||
        word != "config")
        return fail("bad config line");
    if (depth != "-") f.config.max_depth = std::stoull(depth);
    f.config.bootstrap = boot != 0;
    if (!(in >> word >> f.n_features) || word != "features") return fail("missing features");
    std::getline(in, line);
    for (std::size_t j = 0; j < f.n_features; ++j) {
        if (!std::getline(in, line)) return fail("truncated feature names");
        f.feature_names.push_back(line);
    }
    for (std::size_t t = 0; t < f.config.n_trees; ++t) {
        std::size_t count = 0;
        if (!(in >> word >> count) || word != "tree" || count == 0) return fail("bad tree header");
        Tree tree;
        tree.nodes.resize(count);
        for (auto& n : tree.nodes) {
            std::string thr, val;
            if (!(in >> n.feature >> thr >> n.left >> n.right >> val >> n.n_samples))
                return fail("truncated tree");
            n.threshold = std::strtod(thr.c_str(), nullptr);
            n.value = std::strtod(val.c_str(), nullptr);
            if (!n.is_leaf() && (n.left >= count || n.right >= count ||
                                 static_cast<std::size_t>(n.feature) >= f.n_features))
                return fail("node reference out of range");
        }
        f.trees.push_back(std::move(tree));
    }
    return f;
}

}  // namespace sharecast
