#pragma once

#include <optional>

#include "scribseg/dataset.hpp"
#include "scribseg/losses.hpp"
#include "scribseg/nn/tensor.hpp"

namespace scribseg {

// K momentum-averaged D-dimensional class prototypes. Rows start as zero
// vectors and never receive gradients.
struct MemoryBank {
    int num_classes = 0;
    int dim = 0;
    double alpha = 0.9;
    std::vector<double> rows;         // K x D row-major
    std::vector<uint8_t> initialized; // per class, set once a mean was folded in

    MemoryBank() = default;
    MemoryBank(int k, int d, double a = 0.9)
        : num_classes(k), dim(d), alpha(a), rows(static_cast<size_t>(k) * d, 0.0),
          initialized(k, 0) {
        if (a < 0.0 || a >= 1.0) throw std::invalid_argument("MemoryBank: alpha must be in [0,1)");
    }

    const double* row(int k) const { return rows.data() + static_cast<size_t>(k) * dim; }
    double* row(int k) { return rows.data() + static_cast<size_t>(k) * dim; }
};

// Cosine similarity with zero-norm arguments defined as 0.
double cosine_similarity(const double* a, const double* b, int dim);

// Similarity-weighted mean of class-k labeled-pixel features, or nullopt when
// the class has no labeled pixel in the batch. Weights sum to 1; all-equal
// similarities of 1 fall back to uniform weights.
std::optional<std::vector<double>> class_mean_features(const nn::Tensor& hidden,
                                                       const LabelBatch& scribbles,
                                                       const MemoryBank& bank, int k);

// Momentum update M_k <- alpha*M_k + (1-alpha)*m_k; absent means leave rows
// untouched.
void update_bank(MemoryBank& bank, const std::vector<std::optional<std::vector<double>>>& means);

}  // namespace scribseg
