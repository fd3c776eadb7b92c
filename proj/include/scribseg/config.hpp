#pragma once

#include <json.hpp>

#include "scribseg/augment.hpp"
#include "scribseg/dataset.hpp"
#include "scribseg/nn/backbone.hpp"
#include "scribseg/trainer.hpp"

namespace scribseg {

// Parsed run configuration file. Unknown keys are rejected; defaults are the
// published hyperparameter values.
struct RunConfig {
    static constexpr int kSchemaVersion = 1;

    DatasetSpec dataset;
    CommonAugmentConfig common;
    FurtherAugmentConfig further;
    nn::BackboneConfig backbone;
    TrainConfig train;
    int n_folds = 5;
    int eval_fold = 0;

    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace scribseg
