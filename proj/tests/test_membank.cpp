#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scribseg/memory_bank.hpp"
#include "scribseg/rng.hpp"

using namespace scribseg;
using nn::Tensor;

namespace {

// One-pixel-per-feature helper: hidden (1, D, 1, P) with P feature columns.
Tensor features_to_hidden(const std::vector<std::vector<double>>& feats) {
    const int d = static_cast<int>(feats[0].size());
    const int p = static_cast<int>(feats.size());
    Tensor t(1, d, 1, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < d; ++j) t.at(0, j, 0, i) = feats[i][j];
    return t;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
    const double a[] = {1.0, 0.0}, b[] = {0.0, 1.0}, c[] = {2.0, 0.0}, z[] = {0.0, 0.0};
    CHECK(cosine_similarity(a, b, 2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_similarity(a, c, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(a, z, 2) == 0.0);  // zero-norm arguments defined as 0
    CHECK(cosine_similarity(z, z, 2) == 0.0);
}

TEST_CASE("dissimilarity weights: (5/6, 1/6) example") {
    // Prototype along x; two features with cos = 0.5 and 0.9, so the
    // dissimilarities 0.5 and 0.1 normalize to 5/6 and 1/6.
    MemoryBank bank(2, 2, 0.9);
    bank.row(1)[0] = 1.0;
    bank.row(1)[1] = 0.0;
    bank.initialized[1] = 1;

    const std::vector<double> z1{0.5, std::sqrt(0.75)};
    const std::vector<double> z2{0.9, std::sqrt(1.0 - 0.81)};
    Tensor hidden = features_to_hidden({z1, z2});
    LabelBatch scrib{LabelArray(1, 2, 1)};  // both pixels labeled class 1

    auto mean = class_mean_features(hidden, scrib, bank, 1);
    REQUIRE(mean.has_value());
    for (int j = 0; j < 2; ++j)
        CHECK((*mean)[j] == doctest::Approx(5.0 / 6.0 * z1[j] + 1.0 / 6.0 * z2[j]).epsilon(1e-12));
}

TEST_CASE("weights live on the simplex") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 3;
        MemoryBank bank(2, d, 0.9);
        for (int j = 0; j < d; ++j) bank.row(1)[j] = rng.uniform(-1.0, 1.0);
        std::vector<std::vector<double>> feats;
        const int p = 1 + static_cast<int>(rng.uniform_int(6));
        for (int i = 0; i < p; ++i) {
            feats.push_back({});
            for (int j = 0; j < d; ++j) feats.back().push_back(rng.uniform(-2.0, 2.0));
        }
        Tensor hidden = features_to_hidden(feats);
        LabelBatch scrib{LabelArray(1, p, 1)};
        auto mean = class_mean_features(hidden, scrib, bank, 1);
        REQUIRE(mean.has_value());
        // Convex-combination bound: each coordinate inside the feature range.
        for (int j = 0; j < d; ++j) {
            double lo = 1e300, hi = -1e300;
            for (const auto& f : feats) {
                lo = std::min(lo, f[j]);
                hi = std::max(hi, f[j]);
            }
            CHECK((*mean)[j] >= lo - 1e-9);
            CHECK((*mean)[j] <= hi + 1e-9);
        }
    }
}

TEST_CASE("all-similarities-one falls back to the uniform mean") {
    MemoryBank bank(2, 2, 0.9);
    bank.row(1)[0] = 1.0;
    // Both features parallel to the prototype: every dissimilarity is 0.
    Tensor hidden = features_to_hidden({{2.0, 0.0}, {4.0, 0.0}});
    LabelBatch scrib{LabelArray(1, 2, 1)};
    auto mean = class_mean_features(hidden, scrib, bank, 1);
    REQUIRE(mean.has_value());
    CHECK((*mean)[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK((*mean)[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("absent class yields no mean and an untouched row") {
    MemoryBank bank(3, 2, 0.9);
    bank.row(2)[0] = 0.7;
    Tensor hidden = features_to_hidden({{1.0, 1.0}});
    LabelBatch scrib{LabelArray(1, 1, 0)};  // only class 0 labeled
    CHECK_FALSE(class_mean_features(hidden, scrib, bank, 2).has_value());

    std::vector<std::optional<std::vector<double>>> means(3);
    means[0] = std::vector<double>{5.0, 5.0};
    update_bank(bank, means);
    CHECK(bank.row(2)[0] == 0.7);  // class 2 had no mean
    CHECK(bank.row(0)[0] == doctest::Approx(0.5).epsilon(1e-12));  // 0.9*0 + 0.1*5
}

TEST_CASE("momentum update is exact") {
    MemoryBank bank(2, 3, 0.9);
    for (int j = 0; j < 3; ++j) bank.row(1)[j] = j + 1.0;
    std::vector<std::optional<std::vector<double>>> means(2);
    means[1] = std::vector<double>{10.0, 20.0, 30.0};
    update_bank(bank, means);
    for (int j = 0; j < 3; ++j)
        CHECK(bank.row(1)[j] == doctest::Approx(0.9 * (j + 1.0) + 0.1 * 10.0 * (j + 1.0)).epsilon(1e-12));
}

TEST_CASE("geometric convergence under constant means") {
    // Row starts at v; constant zero means shrink it by alpha per step, so
    // after n updates the norm is alpha^n * ||v||.
    const double alpha = 0.9;
    MemoryBank bank(2, 2, alpha);
    bank.row(1)[0] = 3.0;
    bank.row(1)[1] = 4.0;
    bank.initialized[1] = 1;
    std::vector<std::optional<std::vector<double>>> means(2);
    means[1] = std::vector<double>{0.0, 0.0};
    for (int n = 1; n <= 20; ++n) {
        update_bank(bank, means);
        const double norm = std::hypot(bank.row(1)[0], bank.row(1)[1]);
        CHECK(norm == doctest::Approx(std::pow(alpha, n) * 5.0).epsilon(1e-9));
    }

    // And with a constant target m the row converges to m geometrically.
    MemoryBank b2(2, 1, alpha);
    b2.initialized[1] = 1;
    std::vector<std::optional<std::vector<double>>> target(2);
    target[1] = std::vector<double>{1.0};
    for (int n = 1; n <= 30; ++n) {
        update_bank(b2, target);
        CHECK(std::abs(b2.row(1)[0] - 1.0) == doctest::Approx(std::pow(alpha, n)).epsilon(1e-9));
    }
}

TEST_CASE("the bank is detached: plain data, no optimizer state") {
    // Structural check: prototypes are raw doubles with no gradient storage,
    // and reading means never mutates the bank.
    MemoryBank bank(2, 2, 0.9);
    bank.row(1)[0] = 1.0;
    const std::vector<double> before = bank.rows;
    Tensor hidden = features_to_hidden({{0.3, 0.4}});
    LabelBatch scrib{LabelArray(1, 1, 1)};
    (void)class_mean_features(hidden, scrib, bank, 1);
    CHECK(bank.rows == before);
}

TEST_CASE("class means are computed before any update applies") {
    // Folding the means in must not feed back into sibling classes' weights:
    // computing every class mean first, then updating once, equals the API's
    // single update_bank call by construction. Verify against a manual replay.
    Rng rng(10);
    MemoryBank bank(3, 2, 0.9);
    for (double& v : bank.rows) v = rng.uniform(-1.0, 1.0);
    MemoryBank manual = bank;

    Tensor hidden = features_to_hidden({{1.0, 2.0}, {3.0, -1.0}, {0.5, 0.5}});
    LabelBatch scrib{LabelArray(1, 3)};
    scrib[0].data = {0, 1, 2};

    std::vector<std::optional<std::vector<double>>> means(3);
    for (int k = 0; k < 3; ++k) means[k] = class_mean_features(hidden, scrib, bank, k);
    update_bank(bank, means);

    for (int k = 0; k < 3; ++k) {
        auto m = class_mean_features(hidden, scrib, manual, k);  // pre-update bank
        REQUIRE(m.has_value());
        for (int j = 0; j < 2; ++j)
            CHECK(bank.row(k)[j] == doctest::Approx(0.9 * manual.row(k)[j] + 0.1 * (*m)[j])
                                        .epsilon(1e-12));
    }
}
