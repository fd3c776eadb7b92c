#include "scribseg/folds.hpp"

#include <set>

#include "scribseg/rng.hpp"

namespace scribseg {

FoldSplit split_folds(const std::vector<std::string>& patient_ids, int n_folds, uint64_t seed) {
    if (n_folds < 2) throw std::invalid_argument("split_folds: n_folds must be >= 2");
    if (static_cast<int>(patient_ids.size()) < n_folds)
        throw std::invalid_argument("split_folds: fewer patients than folds");
    std::set<std::string> uniq(patient_ids.begin(), patient_ids.end());
    if (uniq.size() != patient_ids.size())
        throw std::invalid_argument("split_folds: duplicate patient ids");

    std::vector<std::string> shuffled = patient_ids;
    Rng rng(derive_seed({seed, 0xf0}));
    rng.shuffle(shuffled);

    FoldSplit split;
    split.folds.resize(n_folds);
    for (size_t i = 0; i < shuffled.size(); ++i)
        split.folds[i % n_folds].push_back(std::move(shuffled[i]));
    return split;
}

}  // namespace scribseg
