// Command-line front end: dataset generation, scribble tooling, training and
// evaluation. Logs go to stderr; all data products are files.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scribseg/config.hpp"
#include "scribseg/dataset_io.hpp"
#include "scribseg/folds.hpp"
#include "scribseg/metrics.hpp"
#include "scribseg/preprocess.hpp"
#include "scribseg/scribble.hpp"
#include "scribseg/synthetic.hpp"
#include "scribseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace scribseg;

namespace {

void require_distinct_dirs(const std::string& in, const std::string& out) {
    std::error_code ec;
    if (fs::exists(in) && fs::exists(out) && fs::equivalent(in, out, ec))
        throw std::invalid_argument("--out must differ from --in (input datasets are never modified)");
    if (fs::absolute(in) == fs::absolute(out))
        throw std::invalid_argument("--out must differ from --in (input datasets are never modified)");
}

void write_snapshot(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "config.resolved.json");
    f << run_config_to_json(cfg).dump(2) << "\n";
    if (!f) throw std::runtime_error("cannot write config snapshot in " + out_dir);
}

std::vector<ImageSample> load_and_preprocess(const std::string& root, const DatasetSpec& spec) {
    std::vector<ImageSample> raw = load_dataset(root);
    std::vector<ImageSample> out;
    out.reserve(raw.size());
    for (const auto& s : raw) out.push_back(preprocess(s, spec));
    return out;
}

// Patient-level class aggregation for `report`, reconstructed from eval.csv.
EvalResult parse_eval_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("report: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "patient,class,dsc,hd95_mm")
        throw std::invalid_argument("report: unexpected header in " + path);
    std::vector<EvalEntry> entries;
    int max_class = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        EvalEntry e;
        std::string field;
        std::getline(ss, e.patient_id, ',');
        std::getline(ss, field, ',');
        e.class_index = std::stoi(field);
        std::getline(ss, field, ',');
        e.dsc = std::stod(field);
        std::getline(ss, field, ',');
        if (field != "undefined") e.hd95_mm = std::stod(field);
        max_class = std::max(max_class, e.class_index);
        entries.push_back(std::move(e));
    }
    // Re-run the aggregation over degenerate one-"slice" patients so the
    // mean/SD logic stays in one place.
    EvalResult r;
    r.entries = entries;
    std::vector<double> all_dsc, all_hd;
    int all_undef = 0;
    for (int k = 1; k <= max_class; ++k) {
        std::vector<double> dscs, hds;
        int undef = 0;
        for (const auto& e : entries) {
            if (e.class_index != k) continue;
            dscs.push_back(e.dsc);
            all_dsc.push_back(e.dsc);
            if (e.hd95_mm) {
                hds.push_back(*e.hd95_mm);
                all_hd.push_back(*e.hd95_mm);
            } else {
                ++undef;
                ++all_undef;
            }
        }
        auto stat = [](const std::vector<double>& v) {
            double mean = 0.0, sd = 0.0;
            for (double x : v) mean += x;
            if (!v.empty()) mean /= v.size();
            if (v.size() > 1) {
                double acc = 0.0;
                for (double x : v) acc += (x - mean) * (x - mean);
                sd = std::sqrt(acc / (v.size() - 1));
            }
            return std::pair<double, double>{mean, sd};
        };
        auto [dm, dsd] = stat(dscs);
        auto [hm, hsd] = stat(hds);
        r.per_class[k] = {dm, dsd, hm, hsd, static_cast<int>(dscs.size()), undef};
        if (k == max_class) {
            auto [odm, odsd] = stat(all_dsc);
            auto [ohm, ohsd] = stat(all_hd);
            r.overall = {odm, odsd, ohm, ohsd, static_cast<int>(all_dsc.size()), all_undef};
        }
    }
    return r;
}

int run(int argc, char** argv) {
    CLI::App app{"Scribble-supervised segmentation toolkit"};
    app.require_subcommand(1);

    // ---- gen-synthetic ----
    struct {
        std::string out;
        int patients = 10, images = 20, height = 64, width = 64;
        uint64_t seed = 0;
    } gen;
    auto* cmd_gen = app.add_subcommand("gen-synthetic", "Generate the synthetic benchmark dataset");
    cmd_gen->add_option("--out", gen.out, "Output dataset directory")->required();
    cmd_gen->add_option("--patients", gen.patients, "Number of patients (>= 5)");
    cmd_gen->add_option("--images-per-patient", gen.images, "Slices per patient");
    cmd_gen->add_option("--height", gen.height, "Slice height (>= 32)");
    cmd_gen->add_option("--width", gen.width, "Slice width (>= 32)");
    cmd_gen->add_option("--seed", gen.seed, "Master seed");

    // ---- synth-scribbles ----
    struct {
        std::string in, out;
        uint64_t seed = 0;
        double bg_coverage = 0.005;
    } synth;
    auto* cmd_synth =
        app.add_subcommand("synth-scribbles", "Regenerate scribbles from dense masks");
    cmd_synth->add_option("--in", synth.in, "Input dataset (needs gt masks)")->required();
    cmd_synth->add_option("--out", synth.out, "Output dataset directory")->required();
    cmd_synth->add_option("--seed", synth.seed, "Master seed");
    cmd_synth->add_option("--bg-coverage", synth.bg_coverage,
                          "Background scribble fraction of background pixels");

    // ---- prune-scribbles ----
    struct {
        std::string in, out;
        double ratio = 1.0;
        uint64_t seed = 0;
    } prune;
    auto* cmd_prune = app.add_subcommand("prune-scribbles", "Shorten scribbles per class");
    cmd_prune->add_option("--in", prune.in, "Input dataset")->required();
    cmd_prune->add_option("--out", prune.out, "Output dataset directory")->required();
    cmd_prune->add_option("--ratio", prune.ratio, "Kept fraction per class, in (0,1]")->required();
    cmd_prune->add_option("--seed", prune.seed, "Seed for the random fallback");

    // ---- train ----
    struct {
        std::string config, out, data, variant, resume;
        uint64_t seed = 0;
        int epochs = 0, batch = 0, fold = -2, folds = 0;
        double delta = -1.0;
    } tr;
    auto* cmd_train = app.add_subcommand("train", "Train on a scribble dataset");
    cmd_train->add_option("--config", tr.config, "Run configuration JSON");
    cmd_train->add_option("--out", tr.out, "Output run directory")->required();
    auto* o_data = cmd_train->add_option("--data", tr.data, "Dataset root (overrides config)");
    auto* o_seed = cmd_train->add_option("--seed", tr.seed, "Master seed (overrides config)");
    auto* o_var = cmd_train->add_option("--variant", tr.variant,
                                        "full|baseline_pce|entmin|entmin_memory|fullsup_ce|fullsup_ce_dice");
    auto* o_ep = cmd_train->add_option("--epochs", tr.epochs, "Number of epochs");
    auto* o_bs = cmd_train->add_option("--batch-size", tr.batch, "Batch size");
    auto* o_delta = cmd_train->add_option("--delta", tr.delta, "Photometric branch strength");
    auto* o_fold = cmd_train->add_option("--fold", tr.fold, "Held-out fold (-1 trains all folds)");
    auto* o_nf = cmd_train->add_option("--folds", tr.folds, "Number of folds");
    cmd_train->add_option("--resume", tr.resume, "Checkpoint to resume from");

    // ---- eval ----
    struct {
        std::string config, checkpoint, data, out;
        int fold = -1;
        uint64_t seed = 0;
    } ev;
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    cmd_eval->add_option("--config", ev.config, "Run configuration JSON (for geometry/folds)");
    cmd_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    auto* oe_data = cmd_eval->add_option("--data", ev.data, "Dataset root (overrides config)");
    cmd_eval->add_option("--out", ev.out, "Output directory")->required();
    auto* oe_fold = cmd_eval->add_option("--fold", ev.fold, "Restrict to this fold's patients");
    auto* oe_seed = cmd_eval->add_option("--seed", ev.seed, "Fold split seed (overrides config)");

    // ---- report ----
    struct {
        std::string in;
        std::vector<std::string> names;
    } rep;
    auto* cmd_report = app.add_subcommand("report", "Render an eval.csv as a MEAN(SD) table");
    cmd_report->add_option("--in", rep.in, "eval.csv path")->required();
    cmd_report->add_option("--class-names", rep.names, "Class names, background first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (cmd_gen->parsed()) {
        auto samples = generate_synthetic_dataset(gen.patients, gen.images, gen.height, gen.width,
                                                  gen.seed);
        save_dataset(samples, gen.out, 3, {"background", "disk", "ring"});
        std::cerr << "wrote " << samples.size() << " slices to " << gen.out << "\n";
        return 0;
    }

    if (cmd_synth->parsed()) {
        require_distinct_dirs(synth.in, synth.out);
        DatasetManifest m = read_manifest(synth.in);
        auto samples = load_dataset(synth.in);
        for (size_t i = 0; i < samples.size(); ++i) {
            auto& s = samples[i];
            if (!s.gt_mask)
                throw std::invalid_argument("synth-scribbles: slice without gt mask: " +
                                            s.patient_id + "/" + std::to_string(s.slice_index));
            s.scribble = synthesize_scribbles(*s.gt_mask, m.num_classes,
                                              derive_seed({synth.seed, 0x5C, i}), synth.bg_coverage);
        }
        save_dataset(samples, synth.out, m.num_classes, m.class_names);
        std::cerr << "wrote " << samples.size() << " slices to " << synth.out << "\n";
        return 0;
    }

    if (cmd_prune->parsed()) {
        require_distinct_dirs(prune.in, prune.out);
        DatasetManifest m = read_manifest(prune.in);
        auto samples = load_dataset(prune.in);
        for (size_t i = 0; i < samples.size(); ++i) {
            PruneSpec spec;
            spec.ratio = prune.ratio;
            spec.seed = derive_seed({prune.seed, 0x9E, i});
            spec.validate();
            samples[i].scribble = prune_scribbles(samples[i].scribble, spec);
        }
        save_dataset(samples, prune.out, m.num_classes, m.class_names);
        std::cerr << "wrote " << samples.size() << " slices to " << prune.out << "\n";
        return 0;
    }

    if (cmd_train->parsed()) {
        RunConfig cfg = tr.config.empty() ? RunConfig{} : load_run_config(tr.config);
        if (o_data->count()) cfg.dataset.root_path = tr.data;
        if (o_seed->count()) cfg.train.seed = tr.seed;
        if (o_var->count()) cfg.train.variant = variant_from_string(tr.variant);
        if (o_ep->count()) cfg.train.num_epochs = tr.epochs;
        if (o_bs->count()) cfg.train.batch_size = tr.batch;
        if (o_delta->count()) cfg.train.delta = tr.delta;
        if (o_fold->count()) cfg.eval_fold = tr.fold;
        if (o_nf->count()) cfg.n_folds = tr.folds;
        if (cfg.dataset.root_path.empty())
            throw std::invalid_argument("train: no dataset root (set dataset.root or --data)");

        DatasetManifest m = read_manifest(cfg.dataset.root_path);
        cfg.dataset.num_classes = m.num_classes;
        if (cfg.dataset.class_names.empty()) cfg.dataset.class_names = m.class_names;
        cfg.backbone.num_classes = m.num_classes;
        cfg.validate();
        write_snapshot(cfg, tr.out);

        auto samples = load_and_preprocess(cfg.dataset.root_path, cfg.dataset);
        FoldSplit folds = split_folds(patient_ids_of(samples), cfg.n_folds, cfg.train.seed);

        const int only_fold = cfg.eval_fold;  // -1 trains every fold
        FitResult res = fit(samples, folds, cfg.backbone, cfg.train, cfg.common, cfg.further,
                            cfg.dataset.num_classes, tr.out, only_fold, tr.resume);
        for (const auto& fo : res.folds) {
            std::ofstream(fs::path(tr.out) / ("fold" + std::to_string(fo.fold)) / "report.txt")
                << render_report(fo.eval, cfg.dataset.class_names);
            std::cerr << "fold " << fo.fold << ": val DSC " << 100.0 * fo.val_mean_dsc << "%\n";
        }
        return 0;
    }

    if (cmd_eval->parsed()) {
        RunConfig cfg = ev.config.empty() ? RunConfig{} : load_run_config(ev.config);
        if (oe_data->count()) cfg.dataset.root_path = ev.data;
        if (oe_seed->count()) cfg.train.seed = ev.seed;
        if (oe_fold->count()) cfg.eval_fold = ev.fold;
        if (cfg.dataset.root_path.empty())
            throw std::invalid_argument("eval: no dataset root (set dataset.root or --data)");

        nn::Checkpoint ck = nn::Checkpoint::load(ev.checkpoint);
        const auto& b = ck.meta.at("backbone");
        nn::BackboneConfig net_cfg;
        net_cfg.encoder_depth = b.at("encoder_depth").get<int>();
        net_cfg.init_channels = b.at("init_channels").get<int>();
        net_cfg.max_channels = b.at("max_channels").get<int>();
        net_cfg.leaky_slope = b.at("leaky_slope").get<double>();
        net_cfg.num_classes = b.at("num_classes").get<int>();
        net_cfg.hidden_dim = b.at("hidden_dim").get<int>();

        DatasetManifest m = read_manifest(cfg.dataset.root_path);
        if (m.num_classes != net_cfg.num_classes)
            throw std::invalid_argument("eval: dataset and checkpoint disagree on class count");
        cfg.dataset.num_classes = m.num_classes;
        if (cfg.dataset.class_names.empty()) cfg.dataset.class_names = m.class_names;
        auto samples = load_and_preprocess(cfg.dataset.root_path, cfg.dataset);

        std::vector<const ImageSample*> subset;
        if (oe_fold->count() && ev.fold >= 0) {
            FoldSplit folds = split_folds(patient_ids_of(samples), cfg.n_folds, cfg.train.seed);
            auto ids = folds.fold_set(ev.fold);
            for (const auto& s : samples)
                if (ids.count(s.patient_id)) subset.push_back(&s);
        } else {
            for (const auto& s : samples) subset.push_back(&s);
        }

        TrainConfig tcfg = cfg.train;
        tcfg.variant = variant_from_string(ck.meta.at("variant").get<std::string>());
        Trainer trainer(net_cfg, tcfg, cfg.common, cfg.further);
        trainer.load_checkpoint(ck);
        EvalResult r = trainer.evaluate(subset, m.num_classes);

        fs::create_directories(ev.out);
        std::ofstream(fs::path(ev.out) / "eval.csv") << eval_result_csv(r);
        std::ofstream(fs::path(ev.out) / "report.txt")
            << render_report(r, cfg.dataset.class_names);
        std::cerr << "evaluated " << subset.size() << " slices; results in " << ev.out << "\n";
        return 0;
    }

    if (cmd_report->parsed()) {
        EvalResult r = parse_eval_csv(rep.in);
        std::cout << render_report(r, rep.names);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
