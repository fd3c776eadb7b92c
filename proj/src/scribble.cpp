#include "scribseg/scribble.hpp"

#include <algorithm>
#include <cmath>

#include "scribseg/rng.hpp"

namespace scribseg {

namespace {

// 8-neighborhood in Zhang-Suen order P2..P9 (N, NE, E, SE, S, SW, W, NW).
constexpr int kNbr[8][2] = {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}};

int nbr_value(const Array2D<uint8_t>& m, int r, int c, int k) {
    int nr = r + kNbr[k][0], nc = c + kNbr[k][1];
    return m.in_bounds(nr, nc) ? (m.at(nr, nc) != 0) : 0;
}

}  // namespace

Array2D<uint8_t> skeletonize(const Array2D<uint8_t>& mask) {
    Array2D<uint8_t> img(mask.rows, mask.cols, 0);
    for (size_t i = 0; i < mask.size(); ++i) img.data[i] = mask.data[i] ? 1 : 0;

    size_t remaining = 0;
    for (uint8_t v : img.data) remaining += v != 0;

    bool changed = true;
    std::vector<std::pair<int, int>> to_clear;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            to_clear.clear();
            for (int r = 0; r < img.rows; ++r) {
                for (int c = 0; c < img.cols; ++c) {
                    if (!img.at(r, c)) continue;
                    int p[8];
                    int b = 0;
                    for (int k = 0; k < 8; ++k) b += (p[k] = nbr_value(img, r, c, k));
                    if (b < 2 || b > 6) continue;
                    int a = 0;  // 0->1 transitions around the ring
                    for (int k = 0; k < 8; ++k)
                        if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
                    if (a != 1) continue;
                    if (pass == 0) {
                        if (p[0] * p[2] * p[4] != 0) continue;
                        if (p[2] * p[4] * p[6] != 0) continue;
                    } else {
                        if (p[0] * p[2] * p[6] != 0) continue;
                        if (p[0] * p[4] * p[6] != 0) continue;
                    }
                    to_clear.emplace_back(r, c);
                }
            }
            // A symmetric 2x2 remnant deletes itself entirely in one pass;
            // keep one pixel so non-empty masks yield non-empty skeletons.
            if (to_clear.size() == remaining && !to_clear.empty()) to_clear.pop_back();
            for (auto [r, c] : to_clear) img.at(r, c) = 0;
            remaining -= to_clear.size();
            changed = changed || !to_clear.empty();
        }
    }
    return img;
}

ScribbleLabel synthesize_scribbles(const LabelArray& gt_mask, int num_classes, uint64_t seed,
                                   double bg_coverage) {
    for (uint8_t v : gt_mask.data)
        if (v >= num_classes)
            throw std::invalid_argument("synthesize_scribbles: gt value out of range");

    ScribbleLabel out;
    out.num_classes = num_classes;
    out.labels = LabelArray(gt_mask.rows, gt_mask.cols, kUnlabeled);

    for (int k = 0; k < num_classes; ++k) {
        Array2D<uint8_t> mask(gt_mask.rows, gt_mask.cols, 0);
        size_t region = 0;
        for (size_t i = 0; i < gt_mask.size(); ++i)
            if (gt_mask.data[i] == k) {
                mask.data[i] = 1;
                ++region;
            }
        if (region == 0) continue;

        Array2D<uint8_t> skel = skeletonize(mask);
        std::vector<size_t> px;
        for (size_t i = 0; i < skel.size(); ++i)
            if (skel.data[i]) px.push_back(i);

        if (k == 0) {
            // Background: keep only a subsample so coverage stays sparse.
            size_t target = std::max<size_t>(1, static_cast<size_t>(std::llround(bg_coverage * region)));
            if (px.size() > target) {
                Rng rng(derive_seed({seed, 0xb6, static_cast<uint64_t>(k)}));
                rng.shuffle(px);
                px.resize(target);
            }
        }
        for (size_t i : px) out.labels.data[i] = static_cast<uint8_t>(k);
    }
    return out;
}

ScribbleLabel prune_scribbles(const ScribbleLabel& scribble, const PruneSpec& spec) {
    scribble.validate();
    spec.validate();

    ScribbleLabel out = scribble;
    const int h = out.labels.rows, w = out.labels.cols;

    for (int k = 0; k < out.num_classes; ++k) {
        std::vector<std::pair<int, int>> px;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                if (out.labels.at(r, c) == k) px.emplace_back(r, c);
        if (px.empty()) continue;

        const size_t target = static_cast<size_t>(std::ceil(spec.ratio * px.size()));
        Rng rng(derive_seed({spec.seed, 0x9c, static_cast<uint64_t>(k)}));

        auto same_class_neighbors = [&](int r, int c) {
            int n = 0;
            for (auto [dr, dc] : kNbr)
                if (out.labels.in_bounds(r + dr, c + dc) && out.labels.at(r + dr, c + dc) == k) ++n;
            return n;
        };

        while (px.size() > target) {
            // First endpoint in row-major order; random pixel if none exists.
            size_t victim = px.size();
            for (size_t i = 0; i < px.size(); ++i) {
                if (same_class_neighbors(px[i].first, px[i].second) <= 1) {
                    victim = i;
                    break;
                }
            }
            if (victim == px.size()) victim = rng.uniform_int(px.size());
            out.labels.at(px[victim].first, px[victim].second) = kUnlabeled;
            px.erase(px.begin() + victim);
        }
    }
    return out;
}

}  // namespace scribseg
