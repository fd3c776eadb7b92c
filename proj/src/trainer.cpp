#include "scribseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace scribseg {

namespace fs = std::filesystem;
using nn::Tensor;

Variant variant_from_string(const std::string& name) {
    if (name == "full") return Variant::kFull;
    if (name == "baseline_pce") return Variant::kBaselinePce;
    if (name == "entmin") return Variant::kEntMin;
    if (name == "entmin_memory") return Variant::kEntMinMemory;
    if (name == "fullsup_ce") return Variant::kFullsupCe;
    if (name == "fullsup_ce_dice") return Variant::kFullsupCeDice;
    throw std::invalid_argument("unknown variant: " + name);
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::kFull: return "full";
        case Variant::kBaselinePce: return "baseline_pce";
        case Variant::kEntMin: return "entmin";
        case Variant::kEntMinMemory: return "entmin_memory";
        case Variant::kFullsupCe: return "fullsup_ce";
        case Variant::kFullsupCeDice: return "fullsup_ce_dice";
    }
    throw std::invalid_argument("unknown variant enum");
}

double lr_scale(int t, int num_epochs, double power) {
    if (t < 0 || t > num_epochs) throw std::invalid_argument("lr_scale: epoch out of range");
    return std::pow(1.0 - static_cast<double>(t) / num_epochs, power);
}

Trainer::Trainer(const nn::BackboneConfig& net_cfg, const TrainConfig& train_cfg,
                 const CommonAugmentConfig& common_cfg, const FurtherAugmentConfig& further_cfg)
    : net_cfg_(net_cfg), train_cfg_(train_cfg), common_cfg_(common_cfg),
      further_cfg_(further_cfg), net_(net_cfg),
      bank_(net_cfg.num_classes, net_cfg.hidden_dim, train_cfg.bank_alpha) {
    train_cfg_.validate();
    common_cfg_.validate();
    further_cfg_.validate();
    further_cfg_.delta = train_cfg_.delta;
    for (nn::Param* p : net_.params()) {
        adam_m_.emplace_back(p->numel(), 0.0);
        adam_v_.emplace_back(p->numel(), 0.0);
    }
}

void Trainer::init(uint64_t seed) {
    net_.init_params(seed);
    bank_ = MemoryBank(net_cfg_.num_classes, net_cfg_.hidden_dim, train_cfg_.bank_alpha);
    for (auto& m : adam_m_) std::fill(m.begin(), m.end(), 0.0);
    for (auto& v : adam_v_) std::fill(v.begin(), v.end(), 0.0);
    adam_step_ = 0;
    for (auto& [name, buf] : net_.buffers())
        std::fill(buf->begin(), buf->end(), name.find("var") != std::string::npos ? 1.0 : 0.0);
}

namespace {

Tensor image_batch(const std::vector<Image2D>& imgs) {
    Tensor t(static_cast<int>(imgs.size()), 1, imgs[0].rows, imgs[0].cols);
    for (size_t s = 0; s < imgs.size(); ++s)
        std::copy(imgs[s].data.begin(), imgs[s].data.end(), t.plane_ptr(static_cast<int>(s), 0));
    return t;
}

}  // namespace

LossBreakdown Trainer::train_step(const std::vector<const ImageSample*>& batch, int epoch,
                                  int step) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const Variant variant = train_cfg_.variant;
    const bool fullsup = variant == Variant::kFullsupCe || variant == Variant::kFullsupCeDice;
    const bool siamese = variant == Variant::kFull;
    const bool memory = variant == Variant::kFull || variant == Variant::kEntMinMemory;
    const bool entmin = siamese || variant == Variant::kEntMin || variant == Variant::kEntMinMemory;
    const int K = net_cfg_.num_classes;

    // Common augmentation per sample, then the photometric branch on top.
    std::vector<Image2D> imgs_omega, imgs_beta;
    LabelBatch scribbles, gts;
    for (size_t j = 0; j < batch.size(); ++j) {
        Rng rng_omega(derive_seed({train_cfg_.seed, 0xA0, static_cast<uint64_t>(epoch),
                                   static_cast<uint64_t>(step), j}));
        ImageSample view = apply_common(*batch[j], common_cfg_, rng_omega);
        if (fullsup && !view.gt_mask)
            throw std::invalid_argument("train_step: fully-supervised variant requires gt masks");
        if (siamese) {
            Rng rng_beta(derive_seed({train_cfg_.seed, 0xB0, static_cast<uint64_t>(epoch),
                                      static_cast<uint64_t>(step), j}));
            imgs_beta.push_back(apply_further(view.image, further_cfg_, rng_beta));
        }
        scribbles.push_back(std::move(view.scribble.labels));
        if (view.gt_mask) gts.push_back(std::move(*view.gt_mask));
        imgs_omega.push_back(std::move(view.image));
    }

    nn::ForwardCache cache_omega, cache_beta;
    net_.forward(image_batch(imgs_omega), /*train=*/true, cache_omega);
    // The distorted view normalises with its own batch moments but must not
    // drag the running statistics (used at eval) toward distorted inputs.
    if (siamese)
        net_.forward(image_batch(imgs_beta), /*train=*/true, cache_beta, /*update_running=*/false);

    const LabelBatch& supervision = fullsup ? gts : scribbles;
    const double r_t =
        warmup_factor(epoch, train_cfg_.loss.warmup_epochs, train_cfg_.loss.warmup_speed);

    Tensor d_logits_omega(cache_omega.logits.n, K, cache_omega.logits.h, cache_omega.logits.w);
    Tensor d_logits_beta, d_aux;
    std::vector<double> d_bank;

    double pce = 0.0, cr = 0.0, ent = 0.0, aux = 0.0, mloss = 0.0;

    if (fullsup) {
        pce = dense_cross_entropy(cache_omega.logits, gts, &d_logits_omega, 1.0);
        if (variant == Variant::kFullsupCeDice)
            pce += soft_dice_loss(cache_omega.logits, gts, &d_logits_omega, 1.0);
    } else {
        pce = partial_cross_entropy(cache_omega.logits, scribbles, &d_logits_omega, 1.0);
    }
    if (entmin) ent = entropy_regularization_grad(cache_omega.logits, &d_logits_omega, r_t);
    if (siamese) {
        d_logits_beta = Tensor(cache_beta.logits.n, K, cache_beta.logits.h, cache_beta.logits.w);
        cr = consistency_regularization_grad(cache_omega.logits, cache_beta.logits,
                                             train_cfg_.stop_gradient, &d_logits_omega,
                                             &d_logits_beta, r_t);
    }

    Tensor aux_logits;
    if (memory) {
        // Memory bank features come from the omega view; the update precedes
        // the losses (toggle flips the order).
        auto compute_means = [&] {
            std::vector<std::optional<std::vector<double>>> means(K);
            for (int k = 0; k < K; ++k)
                means[k] = class_mean_features(cache_omega.hidden, supervision, bank_, k);
            return means;
        };
        if (train_cfg_.bank_update_before_losses) update_bank(bank_, compute_means());

        aux_logits = net_.apply_g(cache_omega.hidden);
        d_aux = Tensor(aux_logits.n, K, aux_logits.h, aux_logits.w);
        aux = auxiliary_loss(aux_logits, supervision, &d_aux, train_cfg_.loss.lambda1);

        auto bank_logits = net_.apply_g_rows(bank_.rows, K);
        d_bank.assign(static_cast<size_t>(K) * K, 0.0);
        mloss = memory_loss(bank_logits, K, &d_bank, train_cfg_.loss.lambda2);

        if (!train_cfg_.bank_update_before_losses) update_bank(bank_, compute_means());
    }

    LossBreakdown breakdown = total_loss(pce, cr, ent, aux, mloss, train_cfg_.loss, epoch);

    for (nn::Param* p : net_.params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    if (siamese) net_.backward(cache_beta, d_logits_beta, nullptr, nullptr, nullptr);
    net_.backward(cache_omega, d_logits_omega, memory ? &d_aux : nullptr,
                  memory ? &d_bank : nullptr, memory ? &bank_.rows : nullptr);

    adam_update(epoch);
    return breakdown;
}

void Trainer::adam_update(int epoch) {
    const double lr = train_cfg_.learning_rate * lr_scale(epoch, train_cfg_.num_epochs,
                                                          train_cfg_.lr_power);
    ++adam_step_;
    const double bc1 = 1.0 - std::pow(train_cfg_.adam_beta1, static_cast<double>(adam_step_));
    const double bc2 = 1.0 - std::pow(train_cfg_.adam_beta2, static_cast<double>(adam_step_));
    auto params = net_.params();
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        for (size_t j = 0; j < p.numel(); ++j) {
            const double g = p.grad[j] + train_cfg_.weight_decay * p.value[j];
            adam_m_[i][j] = train_cfg_.adam_beta1 * adam_m_[i][j] + (1.0 - train_cfg_.adam_beta1) * g;
            adam_v_[i][j] =
                train_cfg_.adam_beta2 * adam_v_[i][j] + (1.0 - train_cfg_.adam_beta2) * g * g;
            const double mhat = adam_m_[i][j] / bc1;
            const double vhat = adam_v_[i][j] / bc2;
            p.value[j] -= lr * mhat / (std::sqrt(vhat) + train_cfg_.adam_eps);
        }
    }
}

LabelArray Trainer::predict(const ImageSample& sample) {
    // Evaluation uses the z-scored image without augmentation.
    ImageSample s = sample;
    double mean = 0.0;
    for (double v : s.image.data) mean += v;
    mean /= static_cast<double>(s.image.size());
    double var = 0.0;
    for (double v : s.image.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(s.image.size());
    const double inv_std = 1.0 / std::sqrt(var + 1e-8);
    for (double& v : s.image.data) v = (v - mean) * inv_std;

    nn::ForwardCache cache;
    net_.forward(image_batch({s.image}), /*train=*/false, cache);

    LabelArray out(s.image.rows, s.image.cols);
    const int plane = cache.logits.plane();
    for (int i = 0; i < plane; ++i) {
        int best = 0;
        double bv = cache.logits.plane_ptr(0, 0)[i];
        for (int k = 1; k < net_cfg_.num_classes; ++k)
            if (cache.logits.plane_ptr(0, k)[i] > bv) {
                bv = cache.logits.plane_ptr(0, k)[i];
                best = k;
            }
        out.data[i] = static_cast<uint8_t>(best);
    }
    return out;
}

EvalResult Trainer::evaluate(const std::vector<const ImageSample*>& samples, int num_classes) {
    std::map<std::string, PatientSlices> patients;
    int skipped = 0;
    for (const ImageSample* s : samples) {
        if (!s->gt_mask) {
            ++skipped;
            continue;
        }
        auto& p = patients[s->patient_id];
        p.patient_id = s->patient_id;
        p.spacing_row_mm = s->spacing_row_mm;
        p.spacing_col_mm = s->spacing_col_mm;
        p.pred.push_back(predict(*s));
        p.gt.push_back(*s->gt_mask);
    }
    std::vector<PatientSlices> list;
    list.reserve(patients.size());
    for (auto& [id, p] : patients) list.push_back(std::move(p));
    EvalResult result = aggregate_patients(list, num_classes);
    result.skipped_patients = skipped;
    return result;
}

nn::Checkpoint Trainer::make_checkpoint(int epoch) const {
    nn::Checkpoint ck;
    auto& net = const_cast<nn::UNet&>(net_);
    auto params = net.params();
    for (size_t i = 0; i < params.size(); ++i) {
        ck.add("param." + params[i]->name, params[i]->value);
        ck.add("adam.m." + params[i]->name, adam_m_[i]);
        ck.add("adam.v." + params[i]->name, adam_v_[i]);
    }
    for (auto& [name, buf] : net.buffers()) ck.add("buffer." + name, *buf);
    ck.add("memory_bank", bank_.rows);
    std::vector<double> init_flags(bank_.initialized.begin(), bank_.initialized.end());
    ck.add("memory_bank.initialized", init_flags);
    ck.meta["epoch"] = epoch;
    ck.meta["adam_step"] = adam_step_;
    ck.meta["backbone"] = {{"encoder_depth", net_cfg_.encoder_depth},
                           {"init_channels", net_cfg_.init_channels},
                           {"max_channels", net_cfg_.max_channels},
                           {"leaky_slope", net_cfg_.leaky_slope},
                           {"num_classes", net_cfg_.num_classes},
                           {"hidden_dim", net_cfg_.hidden_dim}};
    ck.meta["variant"] = variant_to_string(train_cfg_.variant);
    ck.meta["seed"] = train_cfg_.seed;
    return ck;
}

void Trainer::load_checkpoint(const nn::Checkpoint& ck) {
    auto params = net_.params();
    for (size_t i = 0; i < params.size(); ++i) {
        auto copy_into = [&](const std::string& key, std::vector<double>& dst) {
            const auto& src = ck.require(key);
            if (src.size() != dst.size())
                throw std::runtime_error("checkpoint: size mismatch for " + key);
            dst = src;
        };
        copy_into("param." + params[i]->name, params[i]->value);
        copy_into("adam.m." + params[i]->name, adam_m_[i]);
        copy_into("adam.v." + params[i]->name, adam_v_[i]);
    }
    for (auto& [name, buf] : net_.buffers()) {
        const auto& src = ck.require("buffer." + name);
        if (src.size() != buf->size()) throw std::runtime_error("checkpoint: buffer size mismatch");
        *buf = src;
    }
    bank_.rows = ck.require("memory_bank");
    const auto& flags = ck.require("memory_bank.initialized");
    bank_.initialized.assign(flags.begin(), flags.end());
    adam_step_ = ck.meta.at("adam_step").get<long long>();
}

namespace {

void write_csv_row(std::ofstream& f, int epoch, int step, const LossBreakdown& b, double scale) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  epoch, step, b.pce, b.cr, b.ent, b.aux, b.m, b.total, b.r_t, scale);
    f << buf;
}

double foreground_mean_dsc(const EvalResult& r) { return r.overall.dsc_mean; }

}  // namespace

FitResult fit(const std::vector<ImageSample>& samples, const FoldSplit& folds,
              const nn::BackboneConfig& net_cfg, const TrainConfig& train_cfg,
              const CommonAugmentConfig& common_cfg, const FurtherAugmentConfig& further_cfg,
              int num_classes, const std::string& out_dir, int only_fold,
              const std::string& resume_checkpoint) {
    FitResult result;
    for (int f = 0; f < static_cast<int>(folds.folds.size()); ++f) {
        if (only_fold >= 0 && f != only_fold) continue;
        const std::set<std::string> val_ids = folds.fold_set(f);

        std::vector<const ImageSample*> train_set, val_set;
        for (const auto& s : samples)
            (val_ids.count(s.patient_id) ? val_set : train_set).push_back(&s);
        if (train_set.empty()) throw std::invalid_argument("fit: empty training split");

        const fs::path fold_dir = fs::path(out_dir) / ("fold" + std::to_string(f));
        fs::create_directories(fold_dir);

        Trainer trainer(net_cfg, train_cfg, common_cfg, further_cfg);
        trainer.init(derive_seed({train_cfg.seed, 0x11, static_cast<uint64_t>(f)}));
        int start_epoch = 0;
        if (!resume_checkpoint.empty()) {
            nn::Checkpoint ck = nn::Checkpoint::load(resume_checkpoint);
            trainer.load_checkpoint(ck);
            start_epoch = ck.meta.at("epoch").get<int>() + 1;
        }

        std::ofstream log(fold_dir / "metrics.csv",
                          start_epoch > 0 ? std::ios::app : std::ios::out);
        if (start_epoch == 0) log << "epoch,step,pce,cr,ent,aux,m,total,r_t,lr_scale\n";

        double best_dsc = -1.0;
        const std::string last_path = (fold_dir / "last.ckpt").string();
        const std::string best_path = (fold_dir / "best.ckpt").string();

        for (int epoch = start_epoch; epoch < train_cfg.num_epochs; ++epoch) {
            std::vector<size_t> order(train_set.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng shuffle_rng(derive_seed({train_cfg.seed, 0xE0, static_cast<uint64_t>(f),
                                         static_cast<uint64_t>(epoch)}));
            shuffle_rng.shuffle(order);

            const double scale = lr_scale(epoch, train_cfg.num_epochs, train_cfg.lr_power);
            LossBreakdown epoch_sum;
            int n_steps = 0;
            for (size_t begin = 0; begin < order.size(); begin += train_cfg.batch_size) {
                std::vector<const ImageSample*> batch;
                for (size_t i = begin; i < std::min(order.size(), begin + train_cfg.batch_size); ++i)
                    batch.push_back(train_set[order[i]]);
                LossBreakdown b;
                try {
                    b = trainer.train_step(batch, epoch, n_steps);
                } catch (const std::domain_error& e) {
                    throw std::runtime_error(std::string(e.what()) + " at epoch " +
                                             std::to_string(epoch) + " step " +
                                             std::to_string(n_steps));
                }
                write_csv_row(log, epoch, n_steps, b, scale);
                epoch_sum.pce += b.pce;
                epoch_sum.cr += b.cr;
                epoch_sum.ent += b.ent;
                epoch_sum.aux += b.aux;
                epoch_sum.m += b.m;
                epoch_sum.total += b.total;
                epoch_sum.r_t = b.r_t;
                ++n_steps;
            }
            LossBreakdown mean = epoch_sum;
            mean.pce /= n_steps;
            mean.cr /= n_steps;
            mean.ent /= n_steps;
            mean.aux /= n_steps;
            mean.m /= n_steps;
            mean.total /= n_steps;
            write_csv_row(log, epoch, -1, mean, scale);
            log.flush();

            trainer.make_checkpoint(epoch).save(last_path);

            const bool probe = !val_set.empty() &&
                               (epoch == train_cfg.num_epochs - 1 ||
                                (train_cfg.eval_interval > 0 &&
                                 (epoch + 1) % train_cfg.eval_interval == 0));
            if (probe) {
                EvalResult er = trainer.evaluate(val_set, num_classes);
                const double dsc = foreground_mean_dsc(er);
                if (dsc > best_dsc) {
                    best_dsc = dsc;
                    trainer.make_checkpoint(epoch).save(best_path);
                }
            }
        }

        FitResult::FoldOutcome outcome;
        outcome.fold = f;
        outcome.eval = trainer.evaluate(val_set, num_classes);
        outcome.val_mean_dsc = foreground_mean_dsc(outcome.eval);
        outcome.checkpoint_last = last_path;
        outcome.checkpoint_best = best_dsc >= 0.0 ? best_path : last_path;
        outcome.metrics_csv = (fold_dir / "metrics.csv").string();
        std::ofstream(fold_dir / "eval.csv") << eval_result_csv(outcome.eval);
        result.folds.push_back(std::move(outcome));
    }
    return result;
}

}  // namespace scribseg
