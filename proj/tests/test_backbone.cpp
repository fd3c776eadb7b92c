#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "scribseg/nn/backbone.hpp"
#include "scribseg/rng.hpp"

using namespace scribseg;
using namespace scribseg::nn;

TEST_CASE("channel schedule and output stride") {
    BackboneConfig cfg;  // depth 6, init 32, cap 512
    const int expect[] = {32, 64, 128, 256, 512, 512};
    for (int s = 0; s < 6; ++s) CHECK(cfg.stage_channels(s) == expect[s]);
    CHECK(cfg.output_stride() == 32);

    BackboneConfig small;
    small.encoder_depth = 3;
    small.init_channels = 4;
    small.max_channels = 8;
    CHECK(small.stage_channels(0) == 4);
    CHECK(small.stage_channels(1) == 8);
    CHECK(small.stage_channels(2) == 8);
    CHECK(small.output_stride() == 4);
}

TEST_CASE("224x224 input reaches a 7x7 bottleneck at depth 6") {
    BackboneConfig cfg;
    cfg.encoder_depth = 6;
    cfg.init_channels = 1;  // keep the arithmetic check cheap
    cfg.max_channels = 2;
    cfg.num_classes = 2;
    cfg.hidden_dim = 2;
    UNet net(cfg);
    net.init_params(1);
    ForwardCache cache;
    net.forward(Tensor(1, 1, 224, 224, 0.1), /*train=*/false, cache);
    CHECK(cache.deepest.h == 7);
    CHECK(cache.deepest.w == 7);
    CHECK(cache.logits.h == 224);
    CHECK(cache.logits.w == 224);
    CHECK(cache.logits.c == 2);
    CHECK(cache.hidden.h == 224);
    CHECK(cache.hidden.c == 2);
}

TEST_CASE("indivisible input sizes are rejected with the required stride") {
    BackboneConfig cfg;
    cfg.encoder_depth = 4;  // stride 8
    cfg.init_channels = 2;
    cfg.max_channels = 4;
    UNet net(cfg);
    net.init_params(1);
    ForwardCache cache;
    CHECK_THROWS_AS(net.forward(Tensor(1, 1, 20, 20), false, cache), std::invalid_argument);
}

namespace {

BackboneConfig tiny_config() {
    BackboneConfig cfg;
    cfg.encoder_depth = 2;
    cfg.init_channels = 2;
    cfg.max_channels = 4;
    cfg.num_classes = 2;
    cfg.hidden_dim = 2;
    return cfg;
}

}  // namespace

TEST_CASE("forward is deterministic in the seed") {
    BackboneConfig cfg = tiny_config();
    UNet a(cfg), b(cfg);
    a.init_params(99);
    b.init_params(99);
    Tensor x(2, 1, 8, 8);
    Rng rng(4);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    ForwardCache ca, cb;
    a.forward(x, true, ca);
    b.forward(x, true, cb);
    CHECK(ca.logits.v == cb.logits.v);
    CHECK(ca.hidden.v == cb.hidden.v);

    UNet c(cfg);
    c.init_params(100);
    ForwardCache cc;
    c.forward(x, true, cc);
    CHECK(ca.logits.v != cc.logits.v);
}

TEST_CASE("parameter audit: names unique, counts as constructed") {
    BackboneConfig cfg;
    cfg.encoder_depth = 3;
    cfg.init_channels = 4;
    cfg.max_channels = 16;
    cfg.num_classes = 3;
    cfg.hidden_dim = 8;
    UNet net(cfg);
    auto params = net.params();

    std::set<std::string> names;
    for (auto* p : params) names.insert(p->name);
    CHECK(names.size() == params.size());

    // depth encoder blocks + depth-1 decoder blocks, 6 params each,
    // plus head, hidden projection and g (weight + bias each).
    CHECK(params.size() == 6u * (3 + 2) + 6u);

    // Every BN block carries running-stat buffers.
    CHECK(net.buffers().size() == 4u * (3 + 2));
}

TEST_CASE("shared head g: pixel route equals row route") {
    BackboneConfig cfg = tiny_config();
    UNet net(cfg);
    net.init_params(5);
    Tensor hidden(1, 2, 1, 3);
    Rng rng(6);
    for (double& v : hidden.v) v = rng.uniform(-1.0, 1.0);

    Tensor via_pixels = net.apply_g(hidden);
    for (int i = 0; i < 3; ++i) {
        std::vector<double> row{hidden.at(0, 0, 0, i), hidden.at(0, 1, 0, i)};
        auto via_rows = net.apply_g_rows(row, 1);
        for (int k = 0; k < cfg.num_classes; ++k)
            CHECK(via_pixels.at(0, k, 0, i) == doctest::Approx(via_rows[k]).epsilon(1e-12));
    }
}

TEST_CASE("full-network gradients match finite differences") {
    // Scalar objective J = <r1, logits> + <r2, g(z)> + <r3, g(M)> exercises the
    // segmentation head, the hidden projection and both uses of g at once.
    BackboneConfig cfg = tiny_config();
    UNet net(cfg);
    net.init_params(7);

    const int K = cfg.num_classes, D = cfg.hidden_dim;
    Tensor x(2, 1, 4, 4);
    Rng rng(8);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);

    Tensor r1(2, K, 4, 4), r2(2, K, 4, 4);
    for (double& v : r1.v) v = rng.uniform(-1.0, 1.0);
    for (double& v : r2.v) v = rng.uniform(-1.0, 1.0);
    std::vector<double> r3(static_cast<size_t>(K) * K), bank(static_cast<size_t>(K) * D);
    for (double& v : r3) v = rng.uniform(-1.0, 1.0);
    for (double& v : bank) v = rng.uniform(-1.0, 1.0);

    auto objective = [&]() {
        ForwardCache cache;
        net.forward(x, /*train=*/true, cache);
        double j = 0.0;
        for (size_t i = 0; i < cache.logits.numel(); ++i) j += r1.v[i] * cache.logits.v[i];
        Tensor aux = net.apply_g(cache.hidden);
        for (size_t i = 0; i < aux.numel(); ++i) j += r2.v[i] * aux.v[i];
        auto bl = net.apply_g_rows(bank, K);
        for (size_t i = 0; i < bl.size(); ++i) j += r3[i] * bl[i];
        return j;
    };

    ForwardCache cache;
    net.forward(x, true, cache);
    Tensor d_aux = r2;
    for (Param* p : net.params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    net.backward(cache, r1, &d_aux, &r3, &bank);

    const double h = 1e-5;
    int checked = 0, failures = 0;
    for (Param* p : net.params()) {
        for (size_t i = 0; i < p->numel(); ++i) {
            const double keep = p->value[i];
            p->value[i] = keep + h;
            const double jp = objective();
            p->value[i] = keep - h;
            const double jm = objective();
            p->value[i] = keep;
            const double fd = (jp - jm) / (2.0 * h);
            const double got = p->grad[i];
            const double denom = std::max({std::abs(fd), std::abs(got), 1e-6});
            if (std::abs(fd - got) / denom >= 1e-4) {
                ++failures;
                if (failures <= 5)
                    MESSAGE("grad mismatch at ", p->name, "[", i, "]: fd=", fd, " got=", got);
            }
            ++checked;
        }
    }
    CHECK(checked > 100);
    CHECK(failures == 0);

    // g's gradient carries both the auxiliary and the bank contribution: with
    // the bank route removed the g weight gradient must change.
    auto collect_g = [&] {
        std::vector<double> out;
        for (Param* p : net.params())
            if (p->name == "g.weight" || p->name == "g.bias")
                out.insert(out.end(), p->grad.begin(), p->grad.end());
        return out;
    };
    std::vector<double> g_grad_full = collect_g();
    for (Param* p : net.params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    net.backward(cache, r1, &d_aux, nullptr, nullptr);
    std::vector<double> g_grad_no_bank = collect_g();
    REQUIRE(!g_grad_full.empty());
    CHECK(g_grad_full != g_grad_no_bank);
}

TEST_CASE("eval mode uses running statistics and is input-batch independent") {
    BackboneConfig cfg = tiny_config();
    UNet net(cfg);
    net.init_params(11);

    Rng rng(12);
    Tensor a(1, 1, 8, 8), b(1, 1, 8, 8);
    for (double& v : a.v) v = rng.uniform(-1.0, 1.0);
    for (double& v : b.v) v = rng.uniform(-1.0, 1.0);

    // Populate running stats with a few train-mode passes.
    for (int i = 0; i < 3; ++i) {
        ForwardCache c;
        net.forward(a, true, c);
    }

    // In eval mode sample a's output must not depend on its batch neighbors.
    ForwardCache solo, batched;
    net.forward(a, false, solo);
    Tensor both(2, 1, 8, 8);
    std::copy(a.v.begin(), a.v.end(), both.v.begin());
    std::copy(b.v.begin(), b.v.end(), both.v.begin() + a.numel());
    net.forward(both, false, batched);
    for (int k = 0; k < cfg.num_classes; ++k)
        for (int i = 0; i < 64; ++i)
            CHECK(solo.logits.plane_ptr(0, k)[i] ==
                  doctest::Approx(batched.logits.plane_ptr(0, k)[i]).epsilon(1e-12));
}
