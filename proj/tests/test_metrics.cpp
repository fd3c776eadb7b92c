#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "scribseg/metrics.hpp"
#include "scribseg/rng.hpp"

using namespace scribseg;

namespace {

// Independent O(n^2) oracle: surface = mask pixel with a background 4-neighbor
// or on the border; directed distances brute-forced over all pairs.
std::vector<std::pair<int, int>> oracle_surface(const LabelArray& m) {
    std::vector<std::pair<int, int>> s;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c)) continue;
            bool edge = r == 0 || r == m.rows - 1 || c == 0 || c == m.cols - 1;
            if (!edge)
                edge = !m.at(r - 1, c) || !m.at(r + 1, c) || !m.at(r, c - 1) || !m.at(r, c + 1);
            if (edge) s.emplace_back(r, c);
        }
    return s;
}

double oracle_pct(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * (v.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const double f = pos - lo;
    return v[lo] + f * (v[std::min(lo + 1, v.size() - 1)] - v[lo]);
}

std::optional<double> oracle_hd95(const LabelArray& a, const LabelArray& b, double sr, double sc) {
    auto sa = oracle_surface(a), sb = oracle_surface(b);
    if (sa.empty() && sb.empty()) return 0.0;
    if (sa.empty() || sb.empty()) return std::nullopt;
    auto directed = [&](const auto& from, const auto& to) {
        std::vector<double> d;
        for (auto [r1, c1] : from) {
            double best = 1e300;
            for (auto [r2, c2] : to)
                best = std::min(best, std::hypot((r1 - r2) * sr, (c1 - c2) * sc));
            d.push_back(best);
        }
        return oracle_pct(d, 95.0);
    };
    return std::max(directed(sa, sb), directed(sb, sa));
}

double oracle_dice(const LabelArray& a, const LabelArray& b) {
    size_t na = 0, nb = 0, ni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        na += a.data[i] != 0;
        nb += b.data[i] != 0;
        ni += a.data[i] && b.data[i];
    }
    return na + nb == 0 ? 1.0 : 2.0 * ni / static_cast<double>(na + nb);
}

LabelArray random_mask(int h, int w, Rng& rng, double density) {
    LabelArray m(h, w, 0);
    for (auto& v : m.data) v = rng.bernoulli(density);
    return m;
}

}  // namespace

TEST_CASE("dice basics") {
    LabelArray a(4, 4, 1), b(4, 4, 1);
    CHECK(dice(a, b) == 1.0);
    LabelArray empty(4, 4, 0);
    CHECK(dice(empty, empty) == 1.0);  // both empty
    CHECK(dice(a, empty) == 0.0);
    LabelArray half(4, 4, 0);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) half.at(r, c) = 1;
    CHECK(dice(a, half) == doctest::Approx(2.0 * 8 / 24).epsilon(1e-12));
    LabelArray wrong(3, 4, 0);
    CHECK_THROWS_AS(dice(a, wrong), std::invalid_argument);
}

TEST_CASE("hd95 of two points at a 3-4-5 offset is 5") {
    LabelArray a(16, 16, 0), b(16, 16, 0);
    a.at(5, 5) = 1;
    b.at(8, 9) = 1;
    auto d = hd95(a, b, 1.0, 1.0);
    REQUIRE(d.has_value());
    CHECK(*d == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("hd95 edge cases") {
    LabelArray empty(8, 8, 0), one(8, 8, 0);
    one.at(3, 3) = 1;
    CHECK(hd95(empty, empty, 1, 1) == 0.0);
    CHECK_FALSE(hd95(one, empty, 1, 1).has_value());
    CHECK_FALSE(hd95(empty, one, 1, 1).has_value());
    CHECK(*hd95(one, one, 1, 1) == 0.0);
}

TEST_CASE("hd95 symmetry and spacing scale") {
    Rng rng(20);
    for (int t = 0; t < 20; ++t) {
        LabelArray a = random_mask(12, 12, rng, 0.3);
        LabelArray b = random_mask(12, 12, rng, 0.3);
        auto ab = hd95(a, b, 1, 1), ba = hd95(b, a, 1, 1);
        CHECK(ab.has_value() == ba.has_value());
        if (ab) CHECK(*ab == doctest::Approx(*ba).epsilon(1e-12));
        auto scaled = hd95(a, b, 2, 2);
        if (ab && *ab > 0.0) CHECK(*scaled == doctest::Approx(2.0 * *ab).epsilon(1e-12));
    }
}

TEST_CASE("one-pixel dilation keeps hd95 small") {
    LabelArray gt(16, 16, 0);
    for (int r = 5; r < 10; ++r)
        for (int c = 5; c < 10; ++c) gt.at(r, c) = 1;
    LabelArray pred = gt;
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
            if (!gt.at(r, c))
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc)
                        if (gt.in_bounds(r + dr, c + dc) && gt.at(r + dr, c + dc)) pred.at(r, c) = 1;
    auto d = hd95(pred, gt, 1.0, 1.0);
    REQUIRE(d.has_value());
    CHECK(*d <= std::sqrt(2.0) + 1e-12);
}

TEST_CASE("percentile: linear interpolation") {
    CHECK(percentile({1, 2, 3, 4}, 95) == doctest::Approx(3.85).epsilon(1e-12));
    CHECK(percentile({5}, 95) == 5.0);
    CHECK(percentile({1, 2, 3, 4}, 0) == 1.0);
    CHECK(percentile({1, 2, 3, 4}, 100) == 4.0);
    CHECK(percentile({4, 1, 3, 2}, 50) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK_THROWS_AS(percentile({}, 50), std::invalid_argument);
}

TEST_CASE("dice and hd95 match brute-force oracles on 200 random pairs") {
    Rng rng(21);
    int nonempty = 0;
    for (int t = 0; t < 200; ++t) {
        const int h = 4 + static_cast<int>(rng.uniform_int(29));
        const int w = 4 + static_cast<int>(rng.uniform_int(29));
        const double density = rng.uniform(0.0, 0.5);
        LabelArray a = random_mask(h, w, rng, density);
        LabelArray b = random_mask(h, w, rng, density);

        CHECK(dice(a, b) == oracle_dice(a, b));  // exact

        auto got = hd95(a, b, 0.7, 1.3);
        auto want = oracle_hd95(a, b, 0.7, 1.3);
        CHECK(got.has_value() == want.has_value());
        if (got) {
            CHECK(std::abs(*got - *want) < 1e-9);
            ++nonempty;
        }
    }
    CHECK(nonempty > 100);  // the sweep actually exercised the distance path
}

TEST_CASE("patient aggregation fixture") {
    // Three patients, two foreground classes, hand-checkable slices.
    auto box = [](int h, int w, int r0, int r1, int c0, int c1, uint8_t cls) {
        LabelArray m(h, w, 0);
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) m.at(r, c) = cls;
        return m;
    };

    std::vector<PatientSlices> patients(3);
    // p0: perfect prediction on both slices.
    patients[0].patient_id = "p0";
    patients[0].pred = {box(8, 8, 1, 3, 1, 3, 1), box(8, 8, 4, 6, 4, 6, 2)};
    patients[0].gt = patients[0].pred;
    // p1: class 1 predicted half the gt area, class 2 perfect.
    patients[1].patient_id = "p1";
    patients[1].pred = {box(8, 8, 0, 2, 0, 4, 1)};
    patients[1].gt = {box(8, 8, 0, 4, 0, 4, 1)};
    // p2: class 2 exists in gt but the prediction is empty -> hd95 UNDEFINED.
    patients[2].patient_id = "p2";
    patients[2].pred = {LabelArray(8, 8, 0)};
    patients[2].gt = {box(8, 8, 2, 4, 2, 4, 2)};

    EvalResult r = aggregate_patients(patients, 3);
    REQUIRE(r.entries.size() == 6);  // 3 patients x 2 classes

    auto entry = [&](const std::string& id, int k) -> const EvalEntry& {
        for (const auto& e : r.entries)
            if (e.patient_id == id && e.class_index == k) return e;
        throw std::runtime_error("missing entry");
    };

    CHECK(entry("p0", 1).dsc == 1.0);
    CHECK(*entry("p0", 1).hd95_mm == 0.0);
    CHECK(entry("p0", 2).dsc == 1.0);
    // Pooled dice for p1 class 1: 2*8/(8+16).
    CHECK(entry("p1", 1).dsc == doctest::Approx(2.0 * 8 / 24).epsilon(1e-12));
    // Class absent on both sides pools to dice 1 and hd95 0.
    CHECK(entry("p1", 2).dsc == 1.0);
    CHECK(*entry("p1", 2).hd95_mm == 0.0);
    // One-sided empty slice: defined dice, UNDEFINED hd95.
    CHECK(entry("p2", 2).dsc == 0.0);
    CHECK_FALSE(entry("p2", 2).hd95_mm.has_value());

    CHECK(r.per_class.at(1).n_patients == 3);
    CHECK(r.per_class.at(2).hd95_undefined == 1);
    const double expect_mean = (1.0 + 1.0 + 2.0 * 8 / 24 + 1.0 + 1.0 + 0.0) / 6.0;
    CHECK(r.overall.dsc_mean == doctest::Approx(expect_mean).epsilon(1e-12));
    CHECK(r.overall.n_patients == 6);

    // The CSV form round-trips the undefined marker.
    const std::string csv = eval_result_csv(r);
    CHECK(csv.find("undefined") != std::string::npos);
    CHECK(csv.rfind("patient,class,dsc,hd95_mm", 0) == 0);

    const std::string report = render_report(r, {"background", "disk", "ring"});
    CHECK(report.find("disk") != std::string::npos);
    CHECK(report.find("avg") != std::string::npos);
}
