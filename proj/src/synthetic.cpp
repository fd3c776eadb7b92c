#include "scribseg/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "scribseg/rng.hpp"
#include "scribseg/scribble.hpp"

namespace scribseg {

namespace {

struct Blob {
    double cr, cc, r_outer, r_inner;  // r_inner == 0 for a filled disk
};

void paint(LabelArray& gt, const Blob& b, uint8_t cls) {
    for (int r = 0; r < gt.rows; ++r)
        for (int c = 0; c < gt.cols; ++c) {
            double d = std::hypot(r - b.cr, c - b.cc);
            if (d <= b.r_outer && d > b.r_inner) gt.at(r, c) = cls;
        }
}

// Adjust one foreground class to the target pixel count: endpoint-prune when
// the skeleton is too long, dilate inside the gt region when too short.
void adjust_class_coverage(ScribbleLabel& scrib, const LabelArray& gt, int k, size_t target) {
    std::vector<size_t> px;
    for (size_t i = 0; i < scrib.labels.size(); ++i)
        if (scrib.labels.data[i] == k) px.push_back(i);
    if (target == 0) return;
    if (px.empty()) {
        // Thin structures can skeletonize to nothing; seed one pixel and grow.
        for (size_t i = 0; i < gt.size(); ++i)
            if (gt.data[i] == k) {
                scrib.labels.data[i] = static_cast<uint8_t>(k);
                px.push_back(i);
                break;
            }
        if (px.empty()) return;
    }

    if (px.size() > target) {
        ScribbleLabel only;
        only.num_classes = scrib.num_classes;
        only.labels = LabelArray(gt.rows, gt.cols, kUnlabeled);
        for (size_t i : px) only.labels.data[i] = static_cast<uint8_t>(k);
        PruneSpec ps;
        ps.ratio = static_cast<double>(target) / px.size();
        ps.seed = derive_seed({static_cast<uint64_t>(k), 0xc0});
        only = prune_scribbles(only, ps);
        for (size_t i : px)
            if (only.labels.data[i] == kUnlabeled) scrib.labels.data[i] = kUnlabeled;
        return;
    }

    size_t count = px.size();
    bool grew = true;
    while (count < target && grew) {
        grew = false;
        for (int r = 0; r < gt.rows && count < target; ++r)
            for (int c = 0; c < gt.cols && count < target; ++c) {
                if (scrib.labels.at(r, c) != kUnlabeled || gt.at(r, c) != k) continue;
                bool touch = false;
                for (int dr = -1; dr <= 1 && !touch; ++dr)
                    for (int dc = -1; dc <= 1; ++dc)
                        if (scrib.labels.in_bounds(r + dr, c + dc) &&
                            scrib.labels.at(r + dr, c + dc) == k) {
                            touch = true;
                            break;
                        }
                if (touch) {
                    scrib.labels.at(r, c) = static_cast<uint8_t>(k);
                    ++count;
                    grew = true;
                }
            }
    }
}

}  // namespace

std::vector<ImageSample> generate_synthetic_dataset(int n_patients, int images_per_patient,
                                                    int height, int width, uint64_t seed) {
    if (n_patients < 5)
        throw std::invalid_argument("generate_synthetic_dataset: need at least 5 patients");
    if (images_per_patient < 1)
        throw std::invalid_argument("generate_synthetic_dataset: images_per_patient must be >= 1");
    if (height < 32 || width < 32)
        throw std::invalid_argument("generate_synthetic_dataset: size must be at least 32x32");

    const double s = std::min(height, width);
    std::vector<ImageSample> out;
    out.reserve(static_cast<size_t>(n_patients) * images_per_patient);

    for (int p = 0; p < n_patients; ++p) {
        Rng prng(derive_seed({seed, 0x5a, static_cast<uint64_t>(p)}));
        // Patient-level geometry/intensity base. Disk stays in the upper-left
        // region, ring in the lower-right, so the two never overlap.
        const double disk_cr = height * prng.uniform(0.22, 0.38);
        const double disk_cc = width * prng.uniform(0.20, 0.36);
        const double disk_rad = s * prng.uniform(0.09, 0.14);
        const double ring_cr = height * prng.uniform(0.62, 0.78);
        const double ring_cc = width * prng.uniform(0.64, 0.80);
        const double ring_ro = s * prng.uniform(0.13, 0.18);
        const double ring_ri = ring_ro * prng.uniform(0.28, 0.42);
        // Both foreground classes draw from one overlapping intensity range:
        // within a patient the disk and ring can look alike (or swap which is
        // brighter), so brightness separates foreground from background but
        // shape and position must distinguish the classes. That keeps the
        // benchmark from being solvable by intensity thresholding alone.
        const double bg_ity = prng.uniform(0.10, 0.20);
        const double disk_ity = prng.uniform(0.50, 0.80);
        const double ring_ity = prng.uniform(0.50, 0.80);

        for (int i = 0; i < images_per_patient; ++i) {
            Rng irng(derive_seed({seed, 0x51, static_cast<uint64_t>(p), static_cast<uint64_t>(i)}));
            Blob disk{disk_cr + irng.uniform(-0.03, 0.03) * s, disk_cc + irng.uniform(-0.03, 0.03) * s,
                      disk_rad * irng.uniform(0.9, 1.1), 0.0};
            double ro = ring_ro * irng.uniform(0.9, 1.1);
            Blob ring{ring_cr + irng.uniform(-0.03, 0.03) * s, ring_cc + irng.uniform(-0.03, 0.03) * s,
                      ro, ring_ri * irng.uniform(0.9, 1.1)};

            LabelArray gt(height, width, 0);
            paint(gt, disk, 1);
            paint(gt, ring, 2);

            // Heavy pixel noise relative to the fg/bg contrast: confident
            // per-pixel decisions need evidence pooled over a neighbourhood,
            // which is what separates averaging-style regularisers from pure
            // per-pixel confidence seeking.
            const double shift = irng.uniform(-0.05, 0.05);
            Image2D img(height, width);
            for (int r = 0; r < height; ++r)
                for (int c = 0; c < width; ++c) {
                    double base = bg_ity;
                    if (gt.at(r, c) == 1) base = disk_ity;
                    if (gt.at(r, c) == 2) base = ring_ity;
                    img.at(r, c) = std::clamp(base + shift + irng.normal(0.0, 0.12), 0.0, 1.0);
                }

            ScribbleLabel scrib = synthesize_scribbles(
                gt, 3, derive_seed({seed, 0x5c, static_cast<uint64_t>(p), static_cast<uint64_t>(i)}));
            for (int k = 1; k < 3; ++k) {
                size_t region = 0;
                for (uint8_t v : gt.data) region += (v == k);
                adjust_class_coverage(scrib, gt, k, static_cast<size_t>(std::llround(0.10 * region)));
            }

            ImageSample sample;
            sample.image = std::move(img);
            sample.scribble = std::move(scrib);
            sample.gt_mask = std::move(gt);
            sample.patient_id = "patient" + std::to_string(p);
            sample.slice_index = i;
            sample.spacing_row_mm = 1.0;
            sample.spacing_col_mm = 1.0;
            out.push_back(std::move(sample));
        }
    }
    return out;
}

}  // namespace scribseg
