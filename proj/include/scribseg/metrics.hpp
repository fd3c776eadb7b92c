#pragma once

#include <map>
#include <optional>

#include "scribseg/dataset.hpp"

namespace scribseg {

// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
double dice(const Array2D<uint8_t>& pred, const Array2D<uint8_t>& gt);

// Symmetric 95th-percentile surface distance in mm. Both empty -> 0.0,
// exactly one empty -> nullopt (UNDEFINED).
std::optional<double> hd95(const Array2D<uint8_t>& pred, const Array2D<uint8_t>& gt,
                           double spacing_row_mm, double spacing_col_mm);

// Border-aware surface pixels: mask pixels with a non-mask 4-neighbor or on
// the image border.
std::vector<std::pair<int, int>> surface_pixels(const Array2D<uint8_t>& mask);

// Linear-interpolated percentile of a sample (q in [0,100]).
double percentile(std::vector<double> values, double q);

struct EvalEntry {
    std::string patient_id;
    int class_index = 0;
    double dsc = 0.0;
    std::optional<double> hd95_mm;
};

struct ClassAggregate {
    double dsc_mean = 0.0, dsc_sd = 0.0;
    double hd95_mean = 0.0, hd95_sd = 0.0;
    int n_patients = 0;
    int hd95_undefined = 0;
};

struct EvalResult {
    std::vector<EvalEntry> entries;  // one per (patient, class), classes 1..K-1
    std::map<int, ClassAggregate> per_class;
    ClassAggregate overall;  // across foreground classes and patients
    int skipped_patients = 0;  // missing gt
};

// Per-patient pooled metrics from per-slice prediction/gt pairs.
struct PatientSlices {
    std::string patient_id;
    std::vector<LabelArray> pred;
    std::vector<LabelArray> gt;
    double spacing_row_mm = 1.0, spacing_col_mm = 1.0;
};

EvalResult aggregate_patients(const std::vector<PatientSlices>& patients, int num_classes);

// Text table in MEAN(SD) layout plus a CSV row form.
std::string render_report(const EvalResult& result, const std::vector<std::string>& class_names);
std::string eval_result_csv(const EvalResult& result);

}  // namespace scribseg
