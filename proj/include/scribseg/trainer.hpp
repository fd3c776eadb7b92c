#pragma once

#include <functional>

#include "scribseg/augment.hpp"
#include "scribseg/dataset.hpp"
#include "scribseg/folds.hpp"
#include "scribseg/losses.hpp"
#include "scribseg/memory_bank.hpp"
#include "scribseg/metrics.hpp"
#include "scribseg/nn/backbone.hpp"
#include "scribseg/nn/checkpoint.hpp"

namespace scribseg {

enum class Variant {
    kFull,
    kBaselinePce,
    kEntMin,
    kEntMinMemory,
    kFullsupCe,
    kFullsupCeDice,
};

Variant variant_from_string(const std::string& name);
std::string variant_to_string(Variant v);

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 3e-4;
    int batch_size = 12;
    int num_epochs = 400;
    double lr_power = 0.9;
    LossWeights loss;
    Variant variant = Variant::kFull;
    bool stop_gradient = false;
    bool bank_update_before_losses = true;
    double bank_alpha = 0.9;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    uint64_t seed = 0;
    int eval_interval = 10;  // epochs between held-out DSC probes for "best"
    double delta = 1.0;      // further-augmentation strength

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
        if (num_epochs < 1) throw std::invalid_argument("TrainConfig: num_epochs < 1");
        if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
        loss.validate();
    }
};

// Polynomial decay scale (1 - t/num_epochs)^power.
double lr_scale(int t, int num_epochs, double power);

class Trainer {
public:
    Trainer(const nn::BackboneConfig& net_cfg, const TrainConfig& train_cfg,
            const CommonAugmentConfig& common_cfg, const FurtherAugmentConfig& further_cfg);

    void init(uint64_t seed);

    // One optimization step per the siamese training loop. `epoch` and `step`
    // derive the augmentation RNG streams, so runs are reproducible and
    // resumable at epoch boundaries.
    LossBreakdown train_step(const std::vector<const ImageSample*>& batch, int epoch, int step);

    EvalResult evaluate(const std::vector<const ImageSample*>& samples, int num_classes);

    // Inference-mode prediction (argmax labels) for one sample.
    LabelArray predict(const ImageSample& sample);

    nn::Checkpoint make_checkpoint(int epoch) const;
    void load_checkpoint(const nn::Checkpoint& ck);

    nn::UNet& net() { return net_; }
    MemoryBank& bank() { return bank_; }
    const TrainConfig& train_config() const { return train_cfg_; }
    long long adam_step() const { return adam_step_; }

private:
    void adam_update(int epoch);

    nn::BackboneConfig net_cfg_;
    TrainConfig train_cfg_;
    CommonAugmentConfig common_cfg_;
    FurtherAugmentConfig further_cfg_;
    nn::UNet net_;
    MemoryBank bank_;
    std::vector<std::vector<double>> adam_m_, adam_v_;
    long long adam_step_ = 0;
};

struct FitResult {
    struct FoldOutcome {
        int fold = 0;
        double val_mean_dsc = 0.0;  // foreground mean over held-out patients
        EvalResult eval;
        std::string checkpoint_last;
        std::string checkpoint_best;
        std::string metrics_csv;
    };
    std::vector<FoldOutcome> folds;
};

// Trains one model per requested fold on the remaining folds' patients and
// evaluates on the held-out one. `only_fold` = -1 trains every fold.
// Samples must already be preprocessed to a common size.
FitResult fit(const std::vector<ImageSample>& samples, const FoldSplit& folds,
              const nn::BackboneConfig& net_cfg, const TrainConfig& train_cfg,
              const CommonAugmentConfig& common_cfg, const FurtherAugmentConfig& further_cfg,
              int num_classes, const std::string& out_dir, int only_fold = -1,
              const std::string& resume_checkpoint = "");

}  // namespace scribseg
