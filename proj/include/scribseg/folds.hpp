#pragma once

#include "scribseg/dataset.hpp"

namespace scribseg {

// Deterministic shuffled partition of patient ids into n_folds near-equal
// disjoint sets (sizes differ by at most one).
FoldSplit split_folds(const std::vector<std::string>& patient_ids, int n_folds, uint64_t seed);

}  // namespace scribseg
