#pragma once

#include "scribseg/dataset.hpp"

namespace scribseg {

// On-disk layout: <root>/<patient_id>/<slice>_img.png (16-bit grayscale,
// intensities in [0,1] scaled to 65535), _scrib.png and _gt.png (8-bit class
// indices, 255 = unlabeled), plus a dataset.json manifest with per-slice
// spacing, K and class names.
void save_dataset(const std::vector<ImageSample>& samples, const std::string& root,
                  int num_classes, const std::vector<std::string>& class_names);

std::vector<ImageSample> load_dataset(const std::string& root);

struct DatasetManifest {
    int num_classes = 0;
    std::vector<std::string> class_names;
};

DatasetManifest read_manifest(const std::string& root);

std::vector<std::string> patient_ids_of(const std::vector<ImageSample>& samples);

}  // namespace scribseg
