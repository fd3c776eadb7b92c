#include "scribseg/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace scribseg::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;
using MapRow = Eigen::Map<RowMat>;
using MapRowConst = Eigen::Map<const RowMat>;

// col(ci*k*k, h*w) for one sample, zero-padded "same" convolution.
void im2col(const Tensor& in, int sample, int k, ColMat& col) {
    const int h = in.h, w = in.w, ci = in.c;
    const int pad = k / 2;
    col.setZero(ci * k * k, h * w);
    for (int c = 0; c < ci; ++c) {
        const double* src = in.plane_ptr(sample, c);
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const int row = (c * k + ky) * k + kx;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + kx - pad;
                        if (sx < 0 || sx >= w) continue;
                        col(row, y * w + x) = src[sy * w + sx];
                    }
                }
            }
    }
}

void col2im_accumulate(const ColMat& col, int sample, int k, Tensor& din) {
    const int h = din.h, w = din.w, ci = din.c;
    const int pad = k / 2;
    for (int c = 0; c < ci; ++c) {
        double* dst = din.plane_ptr(sample, c);
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const int row = (c * k + ky) * k + kx;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + kx - pad;
                        if (sx < 0 || sx >= w) continue;
                        dst[sy * w + sx] += col(row, y * w + x);
                    }
                }
            }
    }
}

}  // namespace

void conv2d_forward(const Tensor& in, const Param& weight, const Param* bias, int k, Tensor& out,
                    ConvCache* cache) {
    const int co = weight.shape[0], ci = weight.shape[1];
    if (in.c != ci) throw std::invalid_argument("conv2d: channel mismatch " + in.shape_str());
    out = Tensor(in.n, co, in.h, in.w);
    const int hw = in.h * in.w;
    MapRowConst wmat(weight.value.data(), co, ci * k * k);

    if (k == 1) {
        for (int s = 0; s < in.n; ++s) {
            MapRowConst x(in.plane_ptr(s, 0), ci, hw);
            MapRow y(out.plane_ptr(s, 0), co, hw);
            y.noalias() = wmat * x;
        }
    } else {
        ColMat col;
        for (int s = 0; s < in.n; ++s) {
            im2col(in, s, k, col);
            MapRow y(out.plane_ptr(s, 0), co, hw);
            y.noalias() = wmat * col;
        }
    }
    if (bias) {
        for (int s = 0; s < in.n; ++s)
            for (int c = 0; c < co; ++c) {
                double* p = out.plane_ptr(s, c);
                const double b = bias->value[c];
                for (int i = 0; i < hw; ++i) p[i] += b;
            }
    }
    if (cache) cache->input = in;
}

void conv2d_backward(const Tensor& dout, const ConvCache& cache, Param& weight, Param* bias, int k,
                     Tensor& din) {
    const Tensor& in = cache.input;
    const int co = weight.shape[0], ci = weight.shape[1];
    const int hw = in.h * in.w;
    din = Tensor(in.n, ci, in.h, in.w);
    MapRowConst wmat(weight.value.data(), co, ci * k * k);
    MapRow dwmat(weight.grad.data(), co, ci * k * k);

    ColMat col, dcol;
    for (int s = 0; s < in.n; ++s) {
        MapRowConst dy(dout.plane_ptr(s, 0), co, hw);
        if (k == 1) {
            MapRowConst x(in.plane_ptr(s, 0), ci, hw);
            dwmat.noalias() += dy * x.transpose();
            MapRow dx(din.plane_ptr(s, 0), ci, hw);
            dx.noalias() = wmat.transpose() * dy;
        } else {
            im2col(in, s, k, col);
            dwmat.noalias() += dy * col.transpose();
            dcol.noalias() = wmat.transpose() * dy;
            col2im_accumulate(dcol, s, k, din);
        }
        if (bias) {
            // Scalar accumulation: a vectorized reduction rounds differently
            // depending on buffer alignment, breaking bitwise reproducibility.
            for (int c = 0; c < co; ++c) {
                const double* p = dout.plane_ptr(s, c);
                double acc = 0.0;
                for (int i = 0; i < hw; ++i) acc += p[i];
                bias->grad[c] += acc;
            }
        }
    }
}

void batchnorm_forward(const Tensor& in, const Param& gamma, const Param& beta,
                       std::vector<double>& running_mean, std::vector<double>& running_var,
                       bool train, double momentum, double eps, Tensor& out, BatchNormCache* cache) {
    const int C = in.c;
    const size_t m = static_cast<size_t>(in.n) * in.plane();
    out = Tensor(in.n, C, in.h, in.w);
    if (cache) {
        cache->xhat = Tensor(in.n, C, in.h, in.w);
        cache->inv_std.assign(C, 0.0);
    }
    for (int c = 0; c < C; ++c) {
        double mean, var;
        if (train) {
            double sum = 0.0, sq = 0.0;
            for (int s = 0; s < in.n; ++s) {
                const double* p = in.plane_ptr(s, c);
                for (int i = 0; i < in.plane(); ++i) {
                    sum += p[i];
                    sq += p[i] * p[i];
                }
            }
            mean = sum / m;
            var = sq / m - mean * mean;
            if (var < 0.0) var = 0.0;
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps);
        if (cache) cache->inv_std[c] = inv;
        const double g = gamma.value[c], b = beta.value[c];
        for (int s = 0; s < in.n; ++s) {
            const double* p = in.plane_ptr(s, c);
            double* q = out.plane_ptr(s, c);
            double* xh = cache ? cache->xhat.plane_ptr(s, c) : nullptr;
            for (int i = 0; i < in.plane(); ++i) {
                double hat = (p[i] - mean) * inv;
                if (xh) xh[i] = hat;
                q[i] = g * hat + b;
            }
        }
    }
}

void batchnorm_backward(const Tensor& dout, const BatchNormCache& cache, Param& gamma, Param& beta,
                        Tensor& din) {
    const Tensor& xhat = cache.xhat;
    const int C = xhat.c;
    const double m = static_cast<double>(xhat.n) * xhat.plane();
    din = Tensor(xhat.n, C, xhat.h, xhat.w);
    for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int s = 0; s < xhat.n; ++s) {
            const double* dy = dout.plane_ptr(s, c);
            const double* xh = xhat.plane_ptr(s, c);
            for (int i = 0; i < xhat.plane(); ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        gamma.grad[c] += sum_dy_xhat;
        beta.grad[c] += sum_dy;
        const double g = gamma.value[c], inv = cache.inv_std[c];
        for (int s = 0; s < xhat.n; ++s) {
            const double* dy = dout.plane_ptr(s, c);
            const double* xh = xhat.plane_ptr(s, c);
            double* dx = din.plane_ptr(s, c);
            for (int i = 0; i < xhat.plane(); ++i)
                dx[i] = g * inv / m * (m * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
        }
    }
}

void leaky_relu_forward(const Tensor& in, double slope, Tensor& out, LeakyCache* cache) {
    out = Tensor(in.n, in.c, in.h, in.w);
    if (cache) cache->negative.assign(in.numel(), 0);
    for (size_t i = 0; i < in.numel(); ++i) {
        bool neg = in.v[i] < 0.0;
        out.v[i] = neg ? slope * in.v[i] : in.v[i];
        if (cache) cache->negative[i] = neg;
    }
}

void leaky_relu_backward(const Tensor& dout, const LeakyCache& cache, double slope, Tensor& din) {
    din = Tensor(dout.n, dout.c, dout.h, dout.w);
    for (size_t i = 0; i < dout.numel(); ++i)
        din.v[i] = cache.negative[i] ? slope * dout.v[i] : dout.v[i];
}

void maxpool2_forward(const Tensor& in, Tensor& out, MaxPoolCache* cache) {
    if (in.h % 2 || in.w % 2) throw std::invalid_argument("maxpool2: odd spatial size");
    const int oh = in.h / 2, ow = in.w / 2;
    out = Tensor(in.n, in.c, oh, ow);
    if (cache) cache->argmax.assign(out.numel(), 0);
    size_t oi = 0;
    for (int s = 0; s < in.n; ++s)
        for (int c = 0; c < in.c; ++c) {
            const double* p = in.plane_ptr(s, c);
            double* q = out.plane_ptr(s, c);
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x, ++oi) {
                    const int base = 2 * y * in.w + 2 * x;
                    double best = p[base];
                    int arg = 0;
                    const int offs[4] = {0, 1, in.w, in.w + 1};
                    for (int j = 1; j < 4; ++j)
                        if (p[base + offs[j]] > best) {
                            best = p[base + offs[j]];
                            arg = j;
                        }
                    q[y * ow + x] = best;
                    if (cache) cache->argmax[oi] = static_cast<uint8_t>(arg);
                }
        }
}

void maxpool2_backward(const Tensor& dout, const MaxPoolCache& cache, Tensor& din) {
    const int ih = dout.h * 2, iw = dout.w * 2;
    din = Tensor(dout.n, dout.c, ih, iw);
    size_t oi = 0;
    for (int s = 0; s < dout.n; ++s)
        for (int c = 0; c < dout.c; ++c) {
            const double* dq = dout.plane_ptr(s, c);
            double* dp = din.plane_ptr(s, c);
            for (int y = 0; y < dout.h; ++y)
                for (int x = 0; x < dout.w; ++x, ++oi) {
                    const int base = 2 * y * iw + 2 * x;
                    const int offs[4] = {0, 1, iw, iw + 1};
                    dp[base + offs[cache.argmax[oi]]] += dq[y * dout.w + x];
                }
        }
}

namespace {

struct LinTap {
    int i0, i1;
    double f;  // weight of i1
};

std::vector<LinTap> make_taps(int out_n, int in_n) {
    std::vector<LinTap> taps(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    for (int i = 0; i < out_n; ++i) {
        double src = std::clamp((i + 0.5) * scale - 0.5, 0.0, in_n - 1.0);
        int i0 = static_cast<int>(std::floor(src));
        taps[i] = {i0, std::min(i0 + 1, in_n - 1), src - i0};
    }
    return taps;
}

}  // namespace

void upsample_bilinear_forward(const Tensor& in, int out_h, int out_w, Tensor& out) {
    out = Tensor(in.n, in.c, out_h, out_w);
    auto ty = make_taps(out_h, in.h);
    auto tx = make_taps(out_w, in.w);
    for (int s = 0; s < in.n; ++s)
        for (int c = 0; c < in.c; ++c) {
            const double* p = in.plane_ptr(s, c);
            double* q = out.plane_ptr(s, c);
            for (int y = 0; y < out_h; ++y) {
                const auto& a = ty[y];
                for (int x = 0; x < out_w; ++x) {
                    const auto& b = tx[x];
                    q[y * out_w + x] =
                        (1 - a.f) * ((1 - b.f) * p[a.i0 * in.w + b.i0] + b.f * p[a.i0 * in.w + b.i1]) +
                        a.f * ((1 - b.f) * p[a.i1 * in.w + b.i0] + b.f * p[a.i1 * in.w + b.i1]);
                }
            }
        }
}

void upsample_bilinear_backward(const Tensor& dout, int in_h, int in_w, Tensor& din) {
    din = Tensor(dout.n, dout.c, in_h, in_w);
    auto ty = make_taps(dout.h, in_h);
    auto tx = make_taps(dout.w, in_w);
    for (int s = 0; s < dout.n; ++s)
        for (int c = 0; c < dout.c; ++c) {
            const double* dq = dout.plane_ptr(s, c);
            double* dp = din.plane_ptr(s, c);
            for (int y = 0; y < dout.h; ++y) {
                const auto& a = ty[y];
                for (int x = 0; x < dout.w; ++x) {
                    const auto& b = tx[x];
                    const double g = dq[y * dout.w + x];
                    dp[a.i0 * in_w + b.i0] += (1 - a.f) * (1 - b.f) * g;
                    dp[a.i0 * in_w + b.i1] += (1 - a.f) * b.f * g;
                    dp[a.i1 * in_w + b.i0] += a.f * (1 - b.f) * g;
                    dp[a.i1 * in_w + b.i1] += a.f * b.f * g;
                }
            }
        }
}

void softmax_channels(const Tensor& logits, Tensor& probs) {
    if (!probs.same_shape(logits)) probs = Tensor(logits.n, logits.c, logits.h, logits.w);
    const int K = logits.c, plane = logits.plane();
    for (int s = 0; s < logits.n; ++s)
        for (int i = 0; i < plane; ++i) {
            double mx = -1e300;
            for (int k = 0; k < K; ++k) mx = std::max(mx, logits.plane_ptr(s, k)[i]);
            double sum = 0.0;
            for (int k = 0; k < K; ++k) {
                double e = std::exp(logits.plane_ptr(s, k)[i] - mx);
                probs.plane_ptr(s, k)[i] = e;
                sum += e;
            }
            for (int k = 0; k < K; ++k) probs.plane_ptr(s, k)[i] /= sum;
        }
}

}  // namespace scribseg::nn
