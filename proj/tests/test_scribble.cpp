#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scribseg/rng.hpp"
#include "scribseg/scribble.hpp"

using namespace scribseg;

namespace {

size_t count_class(const LabelArray& l, uint8_t k) {
    size_t n = 0;
    for (uint8_t v : l.data) n += v == k;
    return n;
}

bool subset_of(const LabelArray& small, const LabelArray& big, uint8_t k) {
    for (size_t i = 0; i < small.size(); ++i)
        if (small.data[i] == k && big.data[i] != k) return false;
    return true;
}

LabelArray filled_disk(int n, double cr, double cc, double rad) {
    LabelArray m(n, n, 0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (std::hypot(r - cr, c - cc) <= rad) m.at(r, c) = 1;
    return m;
}

}  // namespace

TEST_CASE("skeleton is contained in the mask and thin") {
    Array2D<uint8_t> disk = filled_disk(32, 15.5, 15.5, 10.0);
    Array2D<uint8_t> skel = skeletonize(disk);

    size_t mask_px = 0, skel_px = 0;
    for (size_t i = 0; i < disk.size(); ++i) {
        mask_px += disk.data[i] != 0;
        skel_px += skel.data[i] != 0;
        if (skel.data[i]) CHECK(disk.data[i]);  // containment
    }
    CHECK(skel_px > 0);
    CHECK(skel_px < mask_px / 4);  // a disk thins down to a small nucleus

    // Thinness: no fully-set 2x2 square survives thinning.
    for (int r = 0; r + 1 < skel.rows; ++r)
        for (int c = 0; c + 1 < skel.cols; ++c)
            CHECK_FALSE(bool(skel.at(r, c) && skel.at(r, c + 1) && skel.at(r + 1, c) &&
                             skel.at(r + 1, c + 1)));
}

TEST_CASE("skeleton of an elongated bar is a line-like path") {
    Array2D<uint8_t> bar(20, 20, 0);
    for (int r = 8; r < 12; ++r)
        for (int c = 2; c < 18; ++c) bar.at(r, c) = 1;
    Array2D<uint8_t> skel = skeletonize(bar);
    size_t n = 0;
    for (uint8_t v : skel.data) n += v != 0;
    CHECK(n >= 10);  // preserves the long axis
    CHECK(n <= 2 * 16);
}

TEST_CASE("synthesized scribbles sit inside their class regions") {
    LabelArray gt(48, 48, 0);
    for (int r = 8; r < 20; ++r)
        for (int c = 8; c < 20; ++c) gt.at(r, c) = 1;
    for (int r = 28; r < 42; ++r)
        for (int c = 28; c < 42; ++c) gt.at(r, c) = 2;

    ScribbleLabel scrib = synthesize_scribbles(gt, 3, 17);
    scrib.validate();
    for (int k = 0; k < 3; ++k) {
        CHECK(count_class(scrib.labels, k) > 0);
        for (size_t i = 0; i < gt.size(); ++i)
            if (scrib.labels.data[i] == k) CHECK(gt.data[i] == k);
    }

    // Background coverage lands near the requested fraction.
    size_t bg_region = count_class(gt, 0);
    double bg_cov = static_cast<double>(count_class(scrib.labels, 0)) / bg_region;
    CHECK(bg_cov > 0.001);
    CHECK(bg_cov < 0.02);

    // Deterministic in the seed.
    CHECK(synthesize_scribbles(gt, 3, 17).labels == scrib.labels);
    CHECK(synthesize_scribbles(gt, 3, 18).labels != scrib.labels);
}

TEST_CASE("pruning a 10-pixel line at ratio 0.5 keeps 5 endpoint-trimmed pixels") {
    ScribbleLabel s;
    s.num_classes = 2;
    s.labels = LabelArray(5, 16, kUnlabeled);
    for (int c = 3; c < 13; ++c) s.labels.at(2, c) = 1;

    PruneSpec spec;
    spec.ratio = 0.5;
    ScribbleLabel pruned = prune_scribbles(s, spec);
    CHECK(count_class(pruned.labels, 1) == 5);  // ceil(0.5 * 10)
    CHECK(subset_of(pruned.labels, s.labels, 1));
    // Endpoint trimming keeps a contiguous run on row 2.
    int first = -1, last = -1;
    for (int c = 0; c < 16; ++c)
        if (pruned.labels.at(2, c) == 1) {
            if (first < 0) first = c;
            last = c;
        }
    CHECK(last - first + 1 == 5);
}

TEST_CASE("closed loop without endpoints falls back to seeded random removal") {
    ScribbleLabel s;
    s.num_classes = 2;
    s.labels = LabelArray(12, 12, kUnlabeled);
    for (int c = 3; c < 9; ++c) {
        s.labels.at(3, c) = 1;
        s.labels.at(8, c) = 1;
    }
    for (int r = 3; r < 9; ++r) {
        s.labels.at(r, 3) = 1;
        s.labels.at(r, 8) = 1;
    }
    const size_t n = count_class(s.labels, 1);

    PruneSpec spec;
    spec.ratio = 0.5;
    spec.seed = 4;
    ScribbleLabel pruned = prune_scribbles(s, spec);
    CHECK(count_class(pruned.labels, 1) == (n + 1) / 2);
    CHECK(subset_of(pruned.labels, s.labels, 1));

    // Determinism of the fallback.
    CHECK(prune_scribbles(s, spec).labels == pruned.labels);
}

TEST_CASE("pruning properties over 100 random scribbles") {
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        ScribbleLabel s;
        s.num_classes = 3;
        s.labels = LabelArray(16, 16, kUnlabeled);
        // Random strokes: a few short runs per class.
        for (int k = 0; k < 3; ++k)
            for (int stroke = 0; stroke < 2; ++stroke) {
                int r = static_cast<int>(rng.uniform_int(16));
                int c = static_cast<int>(rng.uniform_int(10));
                int len = 1 + static_cast<int>(rng.uniform_int(6));
                for (int j = 0; j < len; ++j) s.labels.at(r, std::min(15, c + j)) =
                    static_cast<uint8_t>(k);
            }

        const double r1 = rng.uniform(0.1, 0.6), r2 = rng.uniform(0.6, 0.99);
        PruneSpec sp1{r1, 7}, sp2{r2, 7}, sp_full{1.0, 7};
        ScribbleLabel p1 = prune_scribbles(s, sp1);
        ScribbleLabel p2 = prune_scribbles(s, sp2);
        ScribbleLabel pf = prune_scribbles(s, sp_full);

        CHECK(pf.labels == s.labels);  // ratio 1.0 is the identity, byte-exact
        for (int k = 0; k < 3; ++k) {
            const size_t n = count_class(s.labels, k);
            CHECK(subset_of(p1.labels, s.labels, k));
            CHECK(subset_of(p2.labels, s.labels, k));
            if (n > 0) {
                CHECK(count_class(p1.labels, k) ==
                      static_cast<size_t>(std::ceil(r1 * static_cast<double>(n))));
                CHECK(count_class(p2.labels, k) ==
                      static_cast<size_t>(std::ceil(r2 * static_cast<double>(n))));
            }
            CHECK(count_class(p1.labels, k) <= count_class(p2.labels, k));  // monotone
        }
    }
}

TEST_CASE("prune spec validation") {
    CHECK_THROWS_AS((PruneSpec{0.0, 0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((PruneSpec{1.5, 0}.validate()), std::invalid_argument);
    PruneSpec ok{1.0, 0};
    ok.validate();
}
