#pragma once

#include <cstdint>

#include "scribseg/nn/tensor.hpp"

namespace scribseg::nn {

// Named parameter array with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;

    void resize(std::string n, std::vector<int> s) {
        name = std::move(n);
        shape = std::move(s);
        size_t numel = 1;
        for (int d : shape) numel *= static_cast<size_t>(d);
        value.assign(numel, 0.0);
        grad.assign(numel, 0.0);
    }
    size_t numel() const { return value.size(); }
};

// ---- convolution (square kernel, "same" padding for k=3, none for k=1) ----

struct ConvCache {
    Tensor input;
};

// weight shape (co, ci, k, k); bias (co) optional.
void conv2d_forward(const Tensor& in, const Param& weight, const Param* bias, int k, Tensor& out,
                    ConvCache* cache);
void conv2d_backward(const Tensor& dout, const ConvCache& cache, Param& weight, Param* bias, int k,
                     Tensor& din);

// ---- batch normalization ----

struct BatchNormCache {
    Tensor xhat;
    std::vector<double> inv_std;
};

void batchnorm_forward(const Tensor& in, const Param& gamma, const Param& beta,
                       std::vector<double>& running_mean, std::vector<double>& running_var,
                       bool train, double momentum, double eps, Tensor& out, BatchNormCache* cache);
void batchnorm_backward(const Tensor& dout, const BatchNormCache& cache, Param& gamma, Param& beta,
                        Tensor& din);

// ---- LeakyReLU ----

struct LeakyCache {
    std::vector<uint8_t> negative;
};

void leaky_relu_forward(const Tensor& in, double slope, Tensor& out, LeakyCache* cache);
void leaky_relu_backward(const Tensor& dout, const LeakyCache& cache, double slope, Tensor& din);

// ---- 2x2 max pooling (stride 2) ----

struct MaxPoolCache {
    std::vector<uint8_t> argmax;  // 0..3, index within the 2x2 window
};

void maxpool2_forward(const Tensor& in, Tensor& out, MaxPoolCache* cache);
void maxpool2_backward(const Tensor& dout, const MaxPoolCache& cache, Tensor& din);

// ---- bilinear upsampling to an arbitrary size ----

void upsample_bilinear_forward(const Tensor& in, int out_h, int out_w, Tensor& out);
void upsample_bilinear_backward(const Tensor& dout, int in_h, int in_w, Tensor& din);

// ---- pointwise helpers ----

// Channelwise softmax per pixel; out may alias in.
void softmax_channels(const Tensor& logits, Tensor& probs);

}  // namespace scribseg::nn
