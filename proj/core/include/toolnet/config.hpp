#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "toolnet/model.hpp"
#include "toolnet/optim.hpp"
#include "toolnet/synth.hpp"
#include "toolnet/train.hpp"

namespace toolnet {

/// Schema violation; the message names the offending config key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing or malformed input data (manifests, images, checkpoints).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitConfig {
  std::size_t n_val_videos = 2;
  std::uint64_t seed = 0;
};

struct ExperimentRun {
  std::string name;
  ModelSpec model;
  TrainConfig train;
  std::size_t repeats = 5;
};

/// One JSON document with sections {dataset, split, model, train, eval,
/// experiment}; every field has a default so partial configs are valid.
struct AppConfig {
  std::string manifest_path;
  GeneratorConfig generator;
  std::string generator_out_dir = "data";
  bool generator_source_task = false;

  PipelineConfig pipeline;
  SplitConfig split;
  ModelSpec model;
  std::uint64_t model_init_seed = 0;
  std::string pretrained_checkpoint;  // empty = random init

  TrainConfig train;
  bool blind = false;  // val=none: train without a validation set
  std::size_t eval_every = 500;

  std::vector<ExperimentRun> experiment_runs;

  nlohmann::json resolved() const;  // full round-trippable record
};

AppConfig parse_config(const nlohmann::json& doc);
AppConfig load_config(const std::string& path);

ModelSpec parse_model_spec(const nlohmann::json& section, const ModelSpec& base, const std::string& where);
TrainConfig parse_train_config(const nlohmann::json& section, const TrainConfig& base, const std::string& where);

}  // namespace toolnet
