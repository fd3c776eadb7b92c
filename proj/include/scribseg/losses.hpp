#pragma once

#include "scribseg/dataset.hpp"
#include "scribseg/nn/tensor.hpp"

namespace scribseg {

struct LossWeights {
    double lambda1 = 0.01;  // auxiliary loss
    double lambda2 = 1.0;   // memory loss
    int warmup_epochs = 80; // T
    double warmup_speed = 8.0;  // eta

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw std::invalid_argument("LossWeights: negative lambda");
        if (warmup_epochs < 1) throw std::invalid_argument("LossWeights: warmup_epochs < 1");
        if (warmup_speed < 0.0) throw std::invalid_argument("LossWeights: negative warmup_speed");
    }
};

struct LossBreakdown {
    double pce = 0.0, cr = 0.0, ent = 0.0, aux = 0.0, m = 0.0;
    double total = 0.0;
    double r_t = 0.0;
};

// Scribble maps for a minibatch, aligned with the logits' sample dimension.
using LabelBatch = std::vector<LabelArray>;

// Mean over all N pixels of CrossEntropy(y_i, logits_i); unlabeled pixels
// contribute zero loss and zero gradient. Gradient accumulates into *d_logits
// when non-null (scaled by grad_scale).
double partial_cross_entropy(const nn::Tensor& logits, const LabelBatch& scribbles,
                             nn::Tensor* d_logits = nullptr, double grad_scale = 1.0);

// Value route per the probability-map contract: rows must sum to 1.
double consistency_regularization(const nn::Tensor& pseudo_probs, const nn::Tensor& logits_further);

// Gradient route, taking both branches as logits. Fills per-branch gradients;
// d_pseudo_logits stays untouched when stop_gradient is set.
double consistency_regularization_grad(const nn::Tensor& pseudo_logits,
                                       const nn::Tensor& logits_further, bool stop_gradient,
                                       nn::Tensor* d_pseudo_logits, nn::Tensor* d_further_logits,
                                       double grad_scale = 1.0);

// Shannon entropy of the pseudo-mask distributions, mean over pixels.
double entropy_regularization(const nn::Tensor& pseudo_probs);
double entropy_regularization_grad(const nn::Tensor& pseudo_logits, nn::Tensor* d_pseudo_logits,
                                   double grad_scale = 1.0);

// Identical contract to partial_cross_entropy, applied to g(z).
double auxiliary_loss(const nn::Tensor& hidden_logits, const LabelBatch& scribbles,
                      nn::Tensor* d_logits = nullptr, double grad_scale = 1.0);

// (1/K) sum_k CrossEntropy(e_k, bank_logits_k) on K x K row-major logits.
double memory_loss(const std::vector<double>& bank_logits, int num_classes,
                   std::vector<double>* d_bank_logits = nullptr, double grad_scale = 1.0);

// exp(-eta * (1 - t/T)) for t < T, exactly 1 afterwards.
double warmup_factor(int t, int warmup_epochs, double eta);

// Weighted sum per the overall objective; throws naming any non-finite term.
LossBreakdown total_loss(double pce, double cr, double ent, double aux, double m,
                         const LossWeights& weights, int epoch);

// Dense cross-entropy / soft Dice for the fully-supervised reference modes.
double dense_cross_entropy(const nn::Tensor& logits, const LabelBatch& gt,
                           nn::Tensor* d_logits = nullptr, double grad_scale = 1.0);
double soft_dice_loss(const nn::Tensor& logits, const LabelBatch& gt,
                      nn::Tensor* d_logits = nullptr, double grad_scale = 1.0,
                      double smooth = 1e-5);

}  // namespace scribseg
