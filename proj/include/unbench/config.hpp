#pragma once

#include "unbench/datagen.hpp"
#include "unbench/harness.hpp"
#include "unbench/metrics.hpp"
#include "unbench/unlearn.hpp"

#include <json.hpp>

#include <string>

namespace unbench {

// JSON forms of the configuration and record types. Keys are the C++ field names.
// Readers accept partial objects (missing keys keep their defaults) and reject unknown keys.

nlohmann::ordered_json gen_config_to_json(const GenConfig &c);
GenConfig gen_config_from_json(const nlohmann::json &j);

nlohmann::ordered_json train_recipe_to_json(const TrainRecipe &r);
TrainRecipe train_recipe_from_json(const nlohmann::json &j);

nlohmann::ordered_json method_config_to_json(const MethodConfig &m);
MethodConfig method_config_from_json(const nlohmann::json &j);

nlohmann::ordered_json eval_record_to_json(const EvalRecord &r);
EvalRecord eval_record_from_json(const nlohmann::json &j);

nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig &c);
ExperimentConfig experiment_config_from_json(const nlohmann::json &j);

ExperimentConfig load_experiment_config(const std::string &path);

} // namespace unbench
