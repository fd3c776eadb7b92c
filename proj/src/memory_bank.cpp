#include "scribseg/memory_bank.hpp"

#include <cmath>

namespace scribseg {

double cosine_similarity(const double* a, const double* b, int dim) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < dim; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::optional<std::vector<double>> class_mean_features(const nn::Tensor& hidden,
                                                       const LabelBatch& scribbles,
                                                       const MemoryBank& bank, int k) {
    if (hidden.c != bank.dim) throw std::invalid_argument("class_mean_features: dim mismatch");
    if (scribbles.size() != static_cast<size_t>(hidden.n))
        throw std::invalid_argument("class_mean_features: batch size mismatch");
    if (k < 0 || k >= bank.num_classes)
        throw std::invalid_argument("class_mean_features: class out of range");

    const int D = bank.dim, plane = hidden.plane();
    std::vector<std::pair<int, int>> idx;  // (sample, pixel)
    for (int s = 0; s < hidden.n; ++s) {
        if (scribbles[s].rows != hidden.h || scribbles[s].cols != hidden.w)
            throw std::invalid_argument("class_mean_features: spatial shape mismatch");
        for (int i = 0; i < plane; ++i)
            if (scribbles[s].data[i] == k) idx.emplace_back(s, i);
    }
    if (idx.empty()) return std::nullopt;

    std::vector<double> feat(D);
    std::vector<double> weight(idx.size());
    double wsum = 0.0;
    for (size_t j = 0; j < idx.size(); ++j) {
        auto [s, i] = idx[j];
        for (int d = 0; d < D; ++d) feat[d] = hidden.plane_ptr(s, d)[i];
        weight[j] = 1.0 - cosine_similarity(bank.row(k), feat.data(), D);
        wsum += weight[j];
    }
    if (wsum <= 0.0) {
        // All similarities exactly 1; uniform fallback.
        std::fill(weight.begin(), weight.end(), 1.0);
        wsum = static_cast<double>(weight.size());
    }

    std::vector<double> mean(D, 0.0);
    for (size_t j = 0; j < idx.size(); ++j) {
        auto [s, i] = idx[j];
        const double w = weight[j] / wsum;
        for (int d = 0; d < D; ++d) mean[d] += w * hidden.plane_ptr(s, d)[i];
    }
    return mean;
}

void update_bank(MemoryBank& bank, const std::vector<std::optional<std::vector<double>>>& means) {
    if (means.size() != static_cast<size_t>(bank.num_classes))
        throw std::invalid_argument("update_bank: means size mismatch");
    for (int k = 0; k < bank.num_classes; ++k) {
        if (!means[k]) continue;
        if (means[k]->size() != static_cast<size_t>(bank.dim))
            throw std::invalid_argument("update_bank: dimension mismatch");
        double* r = bank.row(k);
        for (int d = 0; d < bank.dim; ++d)
            r[d] = bank.alpha * r[d] + (1.0 - bank.alpha) * (*means[k])[d];
        bank.initialized[k] = 1;
    }
}

}  // namespace scribseg
