#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "sharecast/error.hpp"
#include "sharecast/rng.hpp"

namespace sharecast {

/// Balanced random partition of n indices into k folds.
struct FoldAssignment {
    std::vector<std::size_t> fold_of;
    std::size_t k = 0;

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> s(k, 0);
        for (auto f : fold_of) ++s[f];
        return s;
    }
};

/// Shuffles 0..n-1 and deals positions round-robin, so fold sizes differ by
/// at most one.
inline FoldAssignment make_folds(std::size_t n, std::size_t k, Rng& rng) {
    if (k < 2) throw InputError("need at least 2 folds");
    if (n < k)
        throw InputError("cannot split " + std::to_string(n) + " rows into " +
                         std::to_string(k) + " folds");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(perm.begin(), perm.end(), rng);
    FoldAssignment f;
    f.k = k;
    f.fold_of.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) f.fold_of[perm[pos]] = pos % k;
    return f;
}

}  // namespace sharecast
