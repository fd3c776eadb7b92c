#include "scribseg/nn/backbone.hpp"

#include <cmath>

namespace scribseg::nn {

namespace {

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out) {
    out = Tensor(a.n, a.c + b.c, a.h, a.w);
    for (int s = 0; s < a.n; ++s) {
        std::copy(a.plane_ptr(s, 0), a.plane_ptr(s, 0) + static_cast<size_t>(a.c) * a.plane(),
                  out.plane_ptr(s, 0));
        std::copy(b.plane_ptr(s, 0), b.plane_ptr(s, 0) + static_cast<size_t>(b.c) * b.plane(),
                  out.plane_ptr(s, a.c));
    }
}

void split_channels(const Tensor& d, int c_a, Tensor& da, Tensor& db) {
    da = Tensor(d.n, c_a, d.h, d.w);
    db = Tensor(d.n, d.c - c_a, d.h, d.w);
    for (int s = 0; s < d.n; ++s) {
        std::copy(d.plane_ptr(s, 0), d.plane_ptr(s, 0) + static_cast<size_t>(c_a) * d.plane(),
                  da.plane_ptr(s, 0));
        std::copy(d.plane_ptr(s, c_a), d.plane_ptr(s, c_a) + static_cast<size_t>(db.c) * d.plane(),
                  db.plane_ptr(s, 0));
    }
}

void add_into(Tensor& acc, const Tensor& t) {
    for (size_t i = 0; i < acc.numel(); ++i) acc.v[i] += t.v[i];
}

}  // namespace

UNet::UNet(const BackboneConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int depth = cfg_.encoder_depth;
    enc_.resize(depth);
    dec_.resize(depth - 1);

    auto setup_block = [&](ConvBlock& blk, const std::string& prefix, int cin, int cout) {
        blk.w0.resize(prefix + ".conv0.weight", {cout, cin, 3, 3});
        blk.g0.resize(prefix + ".bn0.gamma", {cout});
        blk.b0.resize(prefix + ".bn0.beta", {cout});
        blk.w1.resize(prefix + ".conv1.weight", {cout, cout, 3, 3});
        blk.g1.resize(prefix + ".bn1.gamma", {cout});
        blk.b1.resize(prefix + ".bn1.beta", {cout});
        blk.rm0.assign(cout, 0.0);
        blk.rv0.assign(cout, 1.0);
        blk.rm1.assign(cout, 0.0);
        blk.rv1.assign(cout, 1.0);
    };

    for (int s = 0; s < depth; ++s)
        setup_block(enc_[s], "enc" + std::to_string(s), s == 0 ? 1 : cfg_.stage_channels(s - 1),
                    cfg_.stage_channels(s));
    for (int s = 0; s < depth - 1; ++s)
        setup_block(dec_[s], "dec" + std::to_string(s),
                    cfg_.stage_channels(s + 1) + cfg_.stage_channels(s), cfg_.stage_channels(s));

    head_w_.resize("head.weight", {cfg_.num_classes, cfg_.stage_channels(0), 1, 1});
    head_b_.resize("head.bias", {cfg_.num_classes});
    proj_w_.resize("proj.weight", {cfg_.hidden_dim, cfg_.stage_channels(depth - 1), 1, 1});
    proj_b_.resize("proj.bias", {cfg_.hidden_dim});
    g_w_.resize("g.weight", {cfg_.num_classes, cfg_.hidden_dim, 1, 1});
    g_b_.resize("g.bias", {cfg_.num_classes});
}

void UNet::init_params(uint64_t seed) {
    Rng rng(derive_seed({seed, 0x17}));
    for (Param* p : params()) {
        if (p->name.ends_with(".bias") || p->name.ends_with(".beta")) {
            std::fill(p->value.begin(), p->value.end(), 0.0);
        } else if (p->name.ends_with(".gamma")) {
            std::fill(p->value.begin(), p->value.end(), 1.0);
        } else {
            // Kaiming fan-in for conv weights.
            int fan_in = p->shape[1];
            for (size_t i = 2; i < p->shape.size(); ++i) fan_in *= p->shape[i];
            double std_dev = std::sqrt(2.0 / fan_in);
            for (double& v : p->value) v = rng.normal(0.0, std_dev);
        }
        std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }
}

void UNet::conv_block_forward(const Tensor& in, ConvBlock& blk, bool train, bool update_running,
                              Tensor& out, ConvBlockCache* cache) {
    // Momentum 0 freezes the running statistics while still normalising with
    // the batch's own moments.
    const double mom = update_running ? cfg_.bn_momentum : 0.0;
    Tensor a, b;
    conv2d_forward(in, blk.w0, nullptr, 3, a, cache ? &cache->conv0 : nullptr);
    batchnorm_forward(a, blk.g0, blk.b0, blk.rm0, blk.rv0, train, mom, cfg_.bn_eps, b,
                      cache ? &cache->bn0 : nullptr);
    leaky_relu_forward(b, cfg_.leaky_slope, a, cache ? &cache->act0 : nullptr);
    conv2d_forward(a, blk.w1, nullptr, 3, b, cache ? &cache->conv1 : nullptr);
    batchnorm_forward(b, blk.g1, blk.b1, blk.rm1, blk.rv1, train, mom, cfg_.bn_eps, a,
                      cache ? &cache->bn1 : nullptr);
    leaky_relu_forward(a, cfg_.leaky_slope, out, cache ? &cache->act1 : nullptr);
}

Tensor UNet::conv_block_backward(const Tensor& dout, ConvBlock& blk, const ConvBlockCache& cache) {
    Tensor d1, d2;
    leaky_relu_backward(dout, cache.act1, cfg_.leaky_slope, d1);
    batchnorm_backward(d1, cache.bn1, blk.g1, blk.b1, d2);
    conv2d_backward(d2, cache.conv1, blk.w1, nullptr, 3, d1);
    leaky_relu_backward(d1, cache.act0, cfg_.leaky_slope, d2);
    batchnorm_backward(d2, cache.bn0, blk.g0, blk.b0, d1);
    conv2d_backward(d1, cache.conv0, blk.w0, nullptr, 3, d2);
    return d2;
}

void UNet::forward(const Tensor& input, bool train, ForwardCache& cache, bool update_running) {
    const int depth = cfg_.encoder_depth;
    const int stride = cfg_.output_stride();
    if (input.h % stride || input.w % stride)
        throw std::invalid_argument("UNet::forward: spatial size " + input.shape_str() +
                                    " not divisible by the output stride " + std::to_string(stride));
    if (input.c != 1) throw std::invalid_argument("UNet::forward: expected a single input channel");

    cache.enc.resize(depth);
    cache.dec.resize(depth - 1);
    cache.pools.resize(depth - 1);
    cache.skips.resize(depth);
    cache.in_h = input.h;
    cache.in_w = input.w;

    Tensor cur = input, pooled;
    for (int s = 0; s < depth; ++s) {
        if (s > 0) {
            maxpool2_forward(cur, pooled, &cache.pools[s - 1]);
            cur = pooled;
        }
        conv_block_forward(cur, enc_[s], train, update_running, cache.skips[s], &cache.enc[s]);
        cur = cache.skips[s];
    }
    cache.deepest = cur;

    for (int s = depth - 2; s >= 0; --s) {
        Tensor up, cat;
        upsample_bilinear_forward(cur, cache.skips[s].h, cache.skips[s].w, up);
        concat_channels(up, cache.skips[s], cat);
        conv_block_forward(cat, dec_[s], train, update_running, cur, &cache.dec[s]);
    }

    conv2d_forward(cur, head_w_, &head_b_, 1, cache.logits, &cache.head);

    Tensor hup;
    upsample_bilinear_forward(cache.deepest, input.h, input.w, hup);
    conv2d_forward(hup, proj_w_, &proj_b_, 1, cache.hidden, &cache.proj);
}

void UNet::backward(const ForwardCache& cache, const Tensor& d_logits, const Tensor* d_aux_logits,
                    const std::vector<double>* d_bank_logits, const std::vector<double>* bank_rows) {
    const int depth = cfg_.encoder_depth;

    Tensor d_cur;
    conv2d_backward(d_logits, cache.head, head_w_, &head_b_, 1, d_cur);

    // Hidden path: g -> projection -> upsample -> deepest encoder features.
    Tensor d_deep_hidden;
    bool has_hidden_grad = false;
    if (d_aux_logits) {
        ConvCache g_cache{cache.hidden};
        Tensor d_z, d_hup;
        conv2d_backward(*d_aux_logits, g_cache, g_w_, &g_b_, 1, d_z);
        conv2d_backward(d_z, cache.proj, proj_w_, &proj_b_, 1, d_hup);
        upsample_bilinear_backward(d_hup, cache.deepest.h, cache.deepest.w, d_deep_hidden);
        has_hidden_grad = true;
    }
    if (d_bank_logits) {
        // bank_logits = bank_rows * g_w^T + g_b, with bank_rows constant.
        const int K = cfg_.num_classes, D = cfg_.hidden_dim;
        for (int row = 0; row < K; ++row)
            for (int o = 0; o < K; ++o) {
                const double g = (*d_bank_logits)[row * K + o];
                g_b_.grad[o] += g;
                for (int d = 0; d < D; ++d) g_w_.grad[o * D + d] += g * (*bank_rows)[row * D + d];
            }
    }

    std::vector<Tensor> d_skips(depth);
    for (int s = 0; s <= depth - 2; ++s) {
        Tensor d_cat = conv_block_backward(d_cur, dec_[s], cache.dec[s]);
        Tensor d_up;
        split_channels(d_cat, cfg_.stage_channels(s + 1), d_up, d_skips[s]);
        upsample_bilinear_backward(d_up, s + 1 == depth - 1 ? cache.deepest.h : cache.skips[s + 1].h,
                                   s + 1 == depth - 1 ? cache.deepest.w : cache.skips[s + 1].w, d_cur);
    }
    if (has_hidden_grad) add_into(d_cur, d_deep_hidden);

    for (int s = depth - 1; s >= 0; --s) {
        Tensor d_out = std::move(d_cur);
        if (s < depth - 1) add_into(d_out, d_skips[s]);
        Tensor d_in = conv_block_backward(d_out, enc_[s], cache.enc[s]);
        if (s > 0) maxpool2_backward(d_in, cache.pools[s - 1], d_cur);
    }
}

Tensor UNet::apply_g(const Tensor& hidden) const {
    Tensor out;
    conv2d_forward(hidden, g_w_, &g_b_, 1, out, nullptr);
    return out;
}

std::vector<double> UNet::apply_g_rows(const std::vector<double>& rows, int count) const {
    const int K = cfg_.num_classes, D = cfg_.hidden_dim;
    std::vector<double> out(static_cast<size_t>(count) * K, 0.0);
    for (int r = 0; r < count; ++r)
        for (int o = 0; o < K; ++o) {
            double acc = g_b_.value[o];
            for (int d = 0; d < D; ++d) acc += g_w_.value[o * D + d] * rows[r * D + d];
            out[r * K + o] = acc;
        }
    return out;
}

std::vector<Param*> UNet::params() {
    std::vector<Param*> out;
    auto add_block = [&](ConvBlock& b) {
        for (Param* p : {&b.w0, &b.g0, &b.b0, &b.w1, &b.g1, &b.b1}) out.push_back(p);
    };
    for (auto& b : enc_) add_block(b);
    for (auto& b : dec_) add_block(b);
    for (Param* p : {&head_w_, &head_b_, &proj_w_, &proj_b_, &g_w_, &g_b_}) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> UNet::buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    auto add_block = [&](const std::string& prefix, ConvBlock& b) {
        out.emplace_back(prefix + ".bn0.running_mean", &b.rm0);
        out.emplace_back(prefix + ".bn0.running_var", &b.rv0);
        out.emplace_back(prefix + ".bn1.running_mean", &b.rm1);
        out.emplace_back(prefix + ".bn1.running_var", &b.rv1);
    };
    for (size_t s = 0; s < enc_.size(); ++s) add_block("enc" + std::to_string(s), enc_[s]);
    for (size_t s = 0; s < dec_.size(); ++s) add_block("dec" + std::to_string(s), dec_[s]);
    return out;
}

}  // namespace scribseg::nn
