#pragma once

#include "scribseg/dataset.hpp"

namespace scribseg {

struct PruneSpec {
    double ratio = 1.0;  // kept fraction per class, in (0, 1]
    uint64_t seed = 0;   // for the random-pixel fallback

    void validate() const {
        if (!(ratio > 0.0 && ratio <= 1.0))
            throw std::invalid_argument("PruneSpec: ratio must be in (0, 1]");
    }
};

// Morphological skeleton (Zhang-Suen thinning) of a binary mask.
Array2D<uint8_t> skeletonize(const Array2D<uint8_t>& mask);

// Artificial scribbles from a dense mask: per-class skeletons, with the
// background skeleton subsampled to roughly bg_coverage of background pixels.
ScribbleLabel synthesize_scribbles(const LabelArray& gt_mask, int num_classes, uint64_t seed,
                                   double bg_coverage = 0.005);

// Iterative endpoint pruning per class down to ceil(ratio * count) pixels,
// with a seeded random-pixel fallback when a class has no endpoint.
ScribbleLabel prune_scribbles(const ScribbleLabel& scribble, const PruneSpec& spec);

}  // namespace scribseg
