#include "scribseg/config.hpp"

#include <fstream>
#include <set>

namespace scribseg {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    reject_unknown(j, {"schema_version", "dataset", "augment", "train", "eval"}, "<root>");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != RunConfig::kSchemaVersion)
        throw std::invalid_argument("config: unsupported schema_version");

    RunConfig cfg;

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        reject_unknown(d, {"root", "target_spacing", "target_size", "num_classes", "class_names"},
                       "dataset");
        get_if(d, "root", cfg.dataset.root_path);
        if (d.contains("target_spacing")) {
            cfg.dataset.target_spacing_row_mm = d.at("target_spacing").at(0).get<double>();
            cfg.dataset.target_spacing_col_mm = d.at("target_spacing").at(1).get<double>();
        }
        if (d.contains("target_size")) {
            cfg.dataset.target_height = d.at("target_size").at(0).get<int>();
            cfg.dataset.target_width = d.at("target_size").at(1).get<int>();
        }
        get_if(d, "num_classes", cfg.dataset.num_classes);
        get_if(d, "class_names", cfg.dataset.class_names);
    }

    if (j.contains("augment")) {
        const json& a = j.at("augment");
        reject_unknown(a, {"common", "further"}, "augment");
        if (a.contains("common")) {
            const json& c = a.at("common");
            reject_unknown(c,
                           {"p_zoom", "zoom_range", "p_elastic", "elastic_grid", "elastic_sigma_px",
                            "p_rotate", "rotate_deg", "p_hflip", "p_vflip", "p_noise",
                            "noise_sigma_max", "crop_pad_to"},
                           "augment.common");
            if (c.contains("crop_pad_to")) {
                cfg.common.crop_h = c.at("crop_pad_to").at(0).get<int>();
                cfg.common.crop_w = c.at("crop_pad_to").at(1).get<int>();
            }
            get_if(c, "p_zoom", cfg.common.p_zoom);
            if (c.contains("zoom_range")) {
                cfg.common.zoom_lo = c.at("zoom_range").at(0).get<double>();
                cfg.common.zoom_hi = c.at("zoom_range").at(1).get<double>();
            }
            get_if(c, "p_elastic", cfg.common.p_elastic);
            get_if(c, "elastic_grid", cfg.common.elastic_grid);
            get_if(c, "elastic_sigma_px", cfg.common.elastic_sigma_px);
            get_if(c, "p_rotate", cfg.common.p_rotate);
            get_if(c, "rotate_deg", cfg.common.rotate_deg);
            get_if(c, "p_hflip", cfg.common.p_hflip);
            get_if(c, "p_vflip", cfg.common.p_vflip);
            get_if(c, "p_noise", cfg.common.p_noise);
            get_if(c, "noise_sigma_max", cfg.common.noise_sigma_max);
        }
        if (a.contains("further")) {
            const json& f = a.at("further");
            reject_unknown(f, {"delta", "p_op"}, "augment.further");
            get_if(f, "delta", cfg.further.delta);
            get_if(f, "p_op", cfg.further.p_op);
            cfg.train.delta = cfg.further.delta;
        }
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"learning_rate", "weight_decay", "batch_size", "num_epochs", "lr_power",
                        "lambda1", "lambda2", "warmup_epochs", "warmup_speed", "variant",
                        "stop_gradient", "bank_update_before_losses", "bank_alpha", "seed",
                        "eval_interval", "n_folds", "backbone"},
                       "train");
        get_if(t, "learning_rate", cfg.train.learning_rate);
        get_if(t, "weight_decay", cfg.train.weight_decay);
        get_if(t, "batch_size", cfg.train.batch_size);
        get_if(t, "num_epochs", cfg.train.num_epochs);
        get_if(t, "lr_power", cfg.train.lr_power);
        get_if(t, "lambda1", cfg.train.loss.lambda1);
        get_if(t, "lambda2", cfg.train.loss.lambda2);
        get_if(t, "warmup_epochs", cfg.train.loss.warmup_epochs);
        get_if(t, "warmup_speed", cfg.train.loss.warmup_speed);
        if (t.contains("variant"))
            cfg.train.variant = variant_from_string(t.at("variant").get<std::string>());
        get_if(t, "stop_gradient", cfg.train.stop_gradient);
        get_if(t, "bank_update_before_losses", cfg.train.bank_update_before_losses);
        get_if(t, "bank_alpha", cfg.train.bank_alpha);
        get_if(t, "seed", cfg.train.seed);
        get_if(t, "eval_interval", cfg.train.eval_interval);
        get_if(t, "n_folds", cfg.n_folds);
        if (t.contains("backbone")) {
            const json& b = t.at("backbone");
            reject_unknown(b,
                           {"encoder_depth", "init_channels", "max_channels", "leaky_slope",
                            "hidden_dim"},
                           "train.backbone");
            get_if(b, "encoder_depth", cfg.backbone.encoder_depth);
            get_if(b, "init_channels", cfg.backbone.init_channels);
            get_if(b, "max_channels", cfg.backbone.max_channels);
            get_if(b, "leaky_slope", cfg.backbone.leaky_slope);
            get_if(b, "hidden_dim", cfg.backbone.hidden_dim);
        }
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown(e, {"fold"}, "eval");
        get_if(e, "fold", cfg.eval_fold);
    }

    cfg.backbone.num_classes = cfg.dataset.num_classes;
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    dataset.validate();
    common.validate();
    further.validate();
    backbone.validate();
    train.validate();
    if (n_folds < 2) throw std::invalid_argument("config: n_folds must be >= 2");
    const int stride = backbone.output_stride();
    if (dataset.target_height % stride || dataset.target_width % stride)
        throw std::invalid_argument("config: target_size must be divisible by " +
                                    std::to_string(stride));
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return json{
        {"schema_version", RunConfig::kSchemaVersion},
        {"dataset",
         {{"root", cfg.dataset.root_path},
          {"target_spacing", {cfg.dataset.target_spacing_row_mm, cfg.dataset.target_spacing_col_mm}},
          {"target_size", {cfg.dataset.target_height, cfg.dataset.target_width}},
          {"num_classes", cfg.dataset.num_classes},
          {"class_names", cfg.dataset.class_names}}},
        {"augment",
         {{"common",
           {{"p_zoom", cfg.common.p_zoom},
            {"zoom_range", {cfg.common.zoom_lo, cfg.common.zoom_hi}},
            {"p_elastic", cfg.common.p_elastic},
            {"elastic_grid", cfg.common.elastic_grid},
            {"elastic_sigma_px", cfg.common.elastic_sigma_px},
            {"p_rotate", cfg.common.p_rotate},
            {"rotate_deg", cfg.common.rotate_deg},
            {"p_hflip", cfg.common.p_hflip},
            {"p_vflip", cfg.common.p_vflip},
            {"p_noise", cfg.common.p_noise},
            {"noise_sigma_max", cfg.common.noise_sigma_max}}},
          {"further", {{"delta", cfg.train.delta}, {"p_op", cfg.further.p_op}}}}},
        {"train",
         {{"learning_rate", cfg.train.learning_rate},
          {"weight_decay", cfg.train.weight_decay},
          {"batch_size", cfg.train.batch_size},
          {"num_epochs", cfg.train.num_epochs},
          {"lr_power", cfg.train.lr_power},
          {"lambda1", cfg.train.loss.lambda1},
          {"lambda2", cfg.train.loss.lambda2},
          {"warmup_epochs", cfg.train.loss.warmup_epochs},
          {"warmup_speed", cfg.train.loss.warmup_speed},
          {"variant", variant_to_string(cfg.train.variant)},
          {"stop_gradient", cfg.train.stop_gradient},
          {"bank_update_before_losses", cfg.train.bank_update_before_losses},
          {"bank_alpha", cfg.train.bank_alpha},
          {"seed", cfg.train.seed},
          {"eval_interval", cfg.train.eval_interval},
          {"n_folds", cfg.n_folds},
          {"backbone",
           {{"encoder_depth", cfg.backbone.encoder_depth},
            {"init_channels", cfg.backbone.init_channels},
            {"max_channels", cfg.backbone.max_channels},
            {"leaky_slope", cfg.backbone.leaky_slope},
            {"hidden_dim", cfg.backbone.hidden_dim}}}}},
        {"eval", {{"fold", cfg.eval_fold}}}};
}

}  // namespace scribseg
