#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scribseg/array.hpp"

namespace scribseg {

// Per-pixel class labels over K classes with an explicit unlabeled sentinel.
struct ScribbleLabel {
    LabelArray labels;
    int num_classes = 0;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("ScribbleLabel: num_classes must be >= 2");
        for (uint8_t v : labels.data)
            if (v != kUnlabeled && v >= num_classes)
                throw std::invalid_argument("ScribbleLabel: label value out of range");
    }
};

// One 2D grayscale slice with its scribble and optional dense ground truth.
struct ImageSample {
    Image2D image;
    ScribbleLabel scribble;
    std::optional<LabelArray> gt_mask;
    std::string patient_id;
    int slice_index = 0;
    double spacing_row_mm = 1.0;
    double spacing_col_mm = 1.0;

    void validate() const {
        if (spacing_row_mm <= 0.0 || spacing_col_mm <= 0.0)
            throw std::invalid_argument("ImageSample: spacing must be strictly positive");
        if (!image.same_shape(scribble.labels))
            throw std::invalid_argument("ImageSample: image/scribble shape mismatch");
        if (gt_mask && !image.same_shape(*gt_mask))
            throw std::invalid_argument("ImageSample: image/gt_mask shape mismatch");
        scribble.validate();
    }
};

struct DatasetSpec {
    std::string root_path;
    double target_spacing_row_mm = 1.0;
    double target_spacing_col_mm = 1.0;
    int target_height = 256;
    int target_width = 256;
    int num_classes = 2;
    std::vector<std::string> class_names;

    void validate() const {
        if (target_height <= 0 || target_width <= 0)
            throw std::invalid_argument("DatasetSpec: target_size must be positive");
        if (target_spacing_row_mm <= 0.0 || target_spacing_col_mm <= 0.0)
            throw std::invalid_argument("DatasetSpec: target_spacing must be positive");
        if (num_classes < 2) throw std::invalid_argument("DatasetSpec: num_classes must be >= 2");
    }
};

// Disjoint patient-id sets covering the whole patient list.
struct FoldSplit {
    std::vector<std::vector<std::string>> folds;

    std::set<std::string> fold_set(size_t i) const {
        return {folds.at(i).begin(), folds.at(i).end()};
    }
};

}  // namespace scribseg
