#pragma once

#include "scribseg/dataset.hpp"

namespace scribseg {

// Desk-scale synthetic benchmark: each slice holds a filled disk (class 1) and
// a ring (class 2) on a noisy background, with per-patient randomized
// geometry and intensities. Deterministic in its arguments.
std::vector<ImageSample> generate_synthetic_dataset(int n_patients, int images_per_patient,
                                                    int height, int width, uint64_t seed);

}  // namespace scribseg
