#pragma once

#include <memory>

#include "scribseg/nn/layers.hpp"
#include "scribseg/rng.hpp"

namespace scribseg::nn {

struct BackboneConfig {
    int encoder_depth = 6;
    int init_channels = 32;
    int max_channels = 512;
    double leaky_slope = 0.01;
    int num_classes = 2;
    int hidden_dim = 64;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    void validate() const {
        if (encoder_depth < 2) throw std::invalid_argument("BackboneConfig: encoder_depth < 2");
        if (init_channels < 1 || max_channels < init_channels)
            throw std::invalid_argument("BackboneConfig: bad channel schedule");
        if (num_classes < 2) throw std::invalid_argument("BackboneConfig: num_classes < 2");
        if (hidden_dim < 1) throw std::invalid_argument("BackboneConfig: hidden_dim < 1");
    }
    int stage_channels(int s) const {
        long long c = static_cast<long long>(init_channels) << s;
        return static_cast<int>(std::min<long long>(c, max_channels));
    }
    int output_stride() const { return 1 << (encoder_depth - 1); }
};

// Two conv(3x3)+BN+LeakyReLU blocks.
struct ConvBlock {
    Param w0, g0, b0, w1, g1, b1;
    std::vector<double> rm0, rv0, rm1, rv1;  // BN running stats
};

struct ConvBlockCache {
    ConvCache conv0, conv1;
    BatchNormCache bn0, bn1;
    LeakyCache act0, act1;
};

// Everything the backward pass needs from one forward call.
struct ForwardCache {
    std::vector<ConvBlockCache> enc, dec;
    std::vector<MaxPoolCache> pools;
    std::vector<Tensor> skips;        // encoder stage outputs
    Tensor deepest;                   // encoder bottom (input to decoder & hidden path)
    std::vector<Tensor> dec_inputs;   // concatenated decoder inputs
    ConvCache head, proj;
    Tensor logits;                    // (N, K, H, W)
    Tensor hidden;                    // z, (N, D, H, W)
    int in_h = 0, in_w = 0;
};

// Encoder-decoder segmentation network with a 1x1 prediction head, plus an
// auxiliary hidden projection and the shared linear head g.
class UNet {
public:
    explicit UNet(const BackboneConfig& cfg);

    void init_params(uint64_t seed);

    // One forward pass. Fills cache.logits and cache.hidden. A training pass
    // on a secondary view can set update_running = false so the BN running
    // statistics track only the primary view's input distribution.
    void forward(const Tensor& input, bool train, ForwardCache& cache, bool update_running = true);

    // Accumulates parameter gradients. d_aux_logits (N,K,H,W) flows through g
    // then the hidden projection; d_bank_logits (K x K, row-major) reaches g's
    // weights only, with bank_rows (K x D) treated as constants.
    void backward(const ForwardCache& cache, const Tensor& d_logits, const Tensor* d_aux_logits,
                  const std::vector<double>* d_bank_logits, const std::vector<double>* bank_rows);

    // Shared head g applied per pixel of z: returns (N, K, H, W).
    Tensor apply_g(const Tensor& hidden) const;
    // g applied to rows (count x D, row-major): returns count x K row-major.
    std::vector<double> apply_g_rows(const std::vector<double>& rows, int count) const;

    std::vector<Param*> params();
    std::vector<std::pair<std::string, std::vector<double>*>> buffers();  // BN running stats

    const BackboneConfig& config() const { return cfg_; }

private:
    void conv_block_forward(const Tensor& in, ConvBlock& blk, bool train, bool update_running,
                            Tensor& out, ConvBlockCache* cache);
    Tensor conv_block_backward(const Tensor& dout, ConvBlock& blk, const ConvBlockCache& cache);

    BackboneConfig cfg_;
    std::vector<ConvBlock> enc_, dec_;
    Param head_w_, head_b_;
    Param proj_w_, proj_b_;
    Param g_w_, g_b_;
};

}  // namespace scribseg::nn
