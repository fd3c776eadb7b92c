#include "scribseg/losses.hpp"

#include <cmath>

#include "scribseg/nn/layers.hpp"

namespace scribseg {

using nn::Tensor;

namespace {

void check_shapes(const Tensor& logits, const LabelBatch& labels, const char* who) {
    if (labels.size() != static_cast<size_t>(logits.n))
        throw std::invalid_argument(std::string(who) + ": batch size mismatch");
    for (const auto& l : labels)
        if (l.rows != logits.h || l.cols != logits.w)
            throw std::invalid_argument(std::string(who) + ": spatial shape mismatch");
}

// log softmax denominator and per-class probabilities at one pixel.
struct PixelSoftmax {
    double logsumexp;
    double max;
};

PixelSoftmax pixel_lse(const Tensor& logits, int s, int i) {
    double mx = -1e300;
    for (int k = 0; k < logits.c; ++k) mx = std::max(mx, logits.plane_ptr(s, k)[i]);
    if (!std::isfinite(mx)) throw std::domain_error("loss: non-finite logits");
    double sum = 0.0;
    for (int k = 0; k < logits.c; ++k) sum += std::exp(logits.plane_ptr(s, k)[i] - mx);
    return {mx + std::log(sum), mx};
}

// d_logits += grad_scale * probs (x) (du - probs . du), the softmax Jacobian
// applied to an upstream per-class gradient du at one pixel.
void softmax_chain(Tensor& d, const Tensor& probs, int s, int i, const std::vector<double>& du,
                   double grad_scale) {
    double dot = 0.0;
    for (int k = 0; k < probs.c; ++k) dot += probs.plane_ptr(s, k)[i] * du[k];
    for (int k = 0; k < probs.c; ++k)
        d.plane_ptr(s, k)[i] += grad_scale * probs.plane_ptr(s, k)[i] * (du[k] - dot);
}

double labeled_cross_entropy(const Tensor& logits, const LabelBatch& labels, Tensor* d_logits,
                             double grad_scale, const char* who) {
    check_shapes(logits, labels, who);
    const double n_total = static_cast<double>(logits.numel() / logits.c);
    double loss = 0.0;
    for (int s = 0; s < logits.n; ++s)
        for (int i = 0; i < logits.plane(); ++i) {
            const uint8_t y = labels[s].data[i];
            if (y == kUnlabeled) continue;
            if (y >= logits.c) throw std::invalid_argument(std::string(who) + ": label out of range");
            auto lse = pixel_lse(logits, s, i);
            loss += (lse.logsumexp - logits.plane_ptr(s, y)[i]) / n_total;
            if (d_logits) {
                for (int k = 0; k < logits.c; ++k) {
                    double p = std::exp(logits.plane_ptr(s, k)[i] - lse.logsumexp);
                    d_logits->plane_ptr(s, k)[i] += grad_scale * (p - (k == y ? 1.0 : 0.0)) / n_total;
                }
            }
        }
    return loss;
}

}  // namespace

double partial_cross_entropy(const Tensor& logits, const LabelBatch& scribbles, Tensor* d_logits,
                             double grad_scale) {
    return labeled_cross_entropy(logits, scribbles, d_logits, grad_scale, "partial_cross_entropy");
}

double auxiliary_loss(const Tensor& hidden_logits, const LabelBatch& scribbles, Tensor* d_logits,
                      double grad_scale) {
    return labeled_cross_entropy(hidden_logits, scribbles, d_logits, grad_scale, "auxiliary_loss");
}

double consistency_regularization(const Tensor& pseudo_probs, const Tensor& logits_further) {
    if (!pseudo_probs.same_shape(logits_further))
        throw std::invalid_argument("consistency_regularization: shape mismatch");
    const double n_total = static_cast<double>(pseudo_probs.numel() / pseudo_probs.c);
    double loss = 0.0;
    for (int s = 0; s < pseudo_probs.n; ++s)
        for (int i = 0; i < pseudo_probs.plane(); ++i) {
            double row_sum = 0.0;
            for (int k = 0; k < pseudo_probs.c; ++k) row_sum += pseudo_probs.plane_ptr(s, k)[i];
            if (std::abs(row_sum - 1.0) > 1e-5)
                throw std::invalid_argument(
                    "consistency_regularization: pseudo-mask rows must sum to 1");
            auto lse = pixel_lse(logits_further, s, i);
            for (int k = 0; k < pseudo_probs.c; ++k)
                loss += pseudo_probs.plane_ptr(s, k)[i] *
                        (lse.logsumexp - logits_further.plane_ptr(s, k)[i]) / n_total;
        }
    return loss;
}

double consistency_regularization_grad(const Tensor& pseudo_logits, const Tensor& logits_further,
                                       bool stop_gradient, Tensor* d_pseudo_logits,
                                       Tensor* d_further_logits, double grad_scale) {
    if (!pseudo_logits.same_shape(logits_further))
        throw std::invalid_argument("consistency_regularization: shape mismatch");
    Tensor pseudo_probs, further_probs;
    nn::softmax_channels(pseudo_logits, pseudo_probs);
    nn::softmax_channels(logits_further, further_probs);
    const int K = pseudo_logits.c;
    const double n_total = static_cast<double>(pseudo_logits.numel() / K);
    double loss = 0.0;
    std::vector<double> du(K);
    for (int s = 0; s < pseudo_logits.n; ++s)
        for (int i = 0; i < pseudo_logits.plane(); ++i) {
            auto lse = pixel_lse(logits_further, s, i);
            for (int k = 0; k < K; ++k) {
                const double log_yp = logits_further.plane_ptr(s, k)[i] - lse.logsumexp;
                loss += -pseudo_probs.plane_ptr(s, k)[i] * log_yp / n_total;
                du[k] = -log_yp / n_total;
            }
            if (d_further_logits) {
                for (int k = 0; k < K; ++k)
                    d_further_logits->plane_ptr(s, k)[i] +=
                        grad_scale *
                        (further_probs.plane_ptr(s, k)[i] - pseudo_probs.plane_ptr(s, k)[i]) /
                        n_total;
            }
            if (!stop_gradient && d_pseudo_logits)
                softmax_chain(*d_pseudo_logits, pseudo_probs, s, i, du, grad_scale);
        }
    return loss;
}

double entropy_regularization(const Tensor& pseudo_probs) {
    const double n_total = static_cast<double>(pseudo_probs.numel() / pseudo_probs.c);
    double loss = 0.0;
    for (int s = 0; s < pseudo_probs.n; ++s)
        for (int i = 0; i < pseudo_probs.plane(); ++i)
            for (int k = 0; k < pseudo_probs.c; ++k) {
                const double p = pseudo_probs.plane_ptr(s, k)[i];
                if (p < 0.0 || p > 1.0 + 1e-9 || !std::isfinite(p))
                    throw std::invalid_argument("entropy_regularization: invalid distribution");
                if (p > 0.0) loss += -p * std::log(p) / n_total;
            }
    return loss;
}

double entropy_regularization_grad(const Tensor& pseudo_logits, Tensor* d_pseudo_logits,
                                   double grad_scale) {
    Tensor probs;
    nn::softmax_channels(pseudo_logits, probs);
    const int K = probs.c;
    const double n_total = static_cast<double>(probs.numel() / K);
    double loss = 0.0;
    std::vector<double> du(K);
    for (int s = 0; s < probs.n; ++s)
        for (int i = 0; i < probs.plane(); ++i) {
            for (int k = 0; k < K; ++k) {
                const double p = probs.plane_ptr(s, k)[i];
                loss += -p * std::log(p) / n_total;
                du[k] = -(std::log(p) + 1.0) / n_total;
            }
            if (d_pseudo_logits) softmax_chain(*d_pseudo_logits, probs, s, i, du, grad_scale);
        }
    return loss;
}

double memory_loss(const std::vector<double>& bank_logits, int num_classes,
                   std::vector<double>* d_bank_logits, double grad_scale) {
    const int K = num_classes;
    if (bank_logits.size() != static_cast<size_t>(K) * K)
        throw std::invalid_argument("memory_loss: logits must be K x K");
    double loss = 0.0;
    for (int r = 0; r < K; ++r) {
        double mx = -1e300;
        for (int k = 0; k < K; ++k) mx = std::max(mx, bank_logits[r * K + k]);
        if (!std::isfinite(mx)) throw std::domain_error("memory_loss: non-finite logits");
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(bank_logits[r * K + k] - mx);
        const double lse = mx + std::log(sum);
        loss += (lse - bank_logits[r * K + r]) / K;
        if (d_bank_logits) {
            for (int k = 0; k < K; ++k) {
                double p = std::exp(bank_logits[r * K + k] - lse);
                (*d_bank_logits)[r * K + k] += grad_scale * (p - (k == r ? 1.0 : 0.0)) / K;
            }
        }
    }
    return loss;
}

double warmup_factor(int t, int warmup_epochs, double eta) {
    if (warmup_epochs <= 0) throw std::invalid_argument("warmup_factor: T must be positive");
    if (t < 0) throw std::invalid_argument("warmup_factor: negative epoch");
    if (t >= warmup_epochs) return 1.0;
    return std::exp(-eta * (1.0 - static_cast<double>(t) / warmup_epochs));
}

LossBreakdown total_loss(double pce, double cr, double ent, double aux, double m,
                         const LossWeights& weights, int epoch) {
    weights.validate();
    const char* names[5] = {"pce", "cr", "ent", "aux", "m"};
    const double parts[5] = {pce, cr, ent, aux, m};
    for (int i = 0; i < 5; ++i)
        if (!std::isfinite(parts[i]))
            throw std::domain_error(std::string("total_loss: non-finite term ") + names[i]);
    LossBreakdown out;
    out.pce = pce;
    out.cr = cr;
    out.ent = ent;
    out.aux = aux;
    out.m = m;
    out.r_t = warmup_factor(epoch, weights.warmup_epochs, weights.warmup_speed);
    out.total = pce + out.r_t * cr + out.r_t * ent + weights.lambda1 * aux + weights.lambda2 * m;
    return out;
}

double dense_cross_entropy(const Tensor& logits, const LabelBatch& gt, Tensor* d_logits,
                           double grad_scale) {
    for (const auto& g : gt)
        for (uint8_t v : g.data)
            if (v == kUnlabeled)
                throw std::invalid_argument("dense_cross_entropy: unlabeled pixel in dense gt");
    return labeled_cross_entropy(logits, gt, d_logits, grad_scale, "dense_cross_entropy");
}

double soft_dice_loss(const Tensor& logits, const LabelBatch& gt, Tensor* d_logits,
                      double grad_scale, double smooth) {
    check_shapes(logits, gt, "soft_dice_loss");
    Tensor probs;
    nn::softmax_channels(logits, probs);
    const int K = logits.c;

    std::vector<double> inter(K, 0.0), psum(K, 0.0), gsum(K, 0.0);
    for (int s = 0; s < logits.n; ++s)
        for (int i = 0; i < logits.plane(); ++i) {
            const uint8_t y = gt[s].data[i];
            for (int k = 0; k < K; ++k) {
                const double p = probs.plane_ptr(s, k)[i];
                psum[k] += p;
                if (y == k) {
                    inter[k] += p;
                    gsum[k] += 1.0;
                }
            }
        }

    double loss = 1.0;
    std::vector<double> dnum(K), dden(K);
    for (int k = 0; k < K; ++k) {
        const double den = psum[k] + gsum[k] + smooth;
        const double num = 2.0 * inter[k] + smooth;
        loss -= num / den / K;
        dnum[k] = num;
        dden[k] = den;
    }
    if (d_logits) {
        std::vector<double> du(K);
        for (int s = 0; s < logits.n; ++s)
            for (int i = 0; i < logits.plane(); ++i) {
                const uint8_t y = gt[s].data[i];
                for (int k = 0; k < K; ++k) {
                    const double gk = (y == k) ? 1.0 : 0.0;
                    du[k] = -(2.0 * gk * dden[k] - dnum[k]) / (dden[k] * dden[k]) / K;
                }
                softmax_chain(*d_logits, probs, s, i, du, grad_scale);
            }
    }
    return loss;
}

}  // namespace scribseg
