#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "toolnet/config.hpp"
#include "toolnet/metrics.hpp"
#include "toolnet/synth.hpp"
#include "toolnet/train.hpp"

namespace fs = std::filesystem;
using namespace toolnet;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool quiet = false;
};

AppConfig load_cli_config(const CliOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("--config is required");
  AppConfig cfg = load_config(opts.config_path);
  if (opts.seed) {
    cfg.train.seed = *opts.seed;
    cfg.model_init_seed = *opts.seed;
    cfg.generator.seed = *opts.seed;
  }
  return cfg;
}

DatasetManifest load_dataset(const AppConfig& cfg) {
  if (cfg.manifest_path.empty()) throw ConfigError("config.dataset.manifest is required");
  try {
    return load_manifest(cfg.manifest_path);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
}

Image mean_image_from_checkpoint(const Checkpoint& ckpt, const AugmentationParams& aug) {
  auto it = ckpt.find("pipeline/mean_image");
  if (it == ckpt.end()) throw DataError("checkpoint has no pipeline/mean_image entry");
  const Tensor& t = it->second;
  if (t.ndim() != 3 || t.extent(0) != 3 || t.extent(1) != aug.crop_h || t.extent(2) != aug.crop_w) {
    throw DataError("checkpoint mean image does not match the configured crop resolution");
  }
  Image mean(aug.crop_w, aug.crop_h);
  mean.pix = t.vec();
  return mean;
}

struct TrainedRun {
  std::unique_ptr<Network> net;
  PreparedData data;
  TrainResult result;
  std::string log_text;
};

TrainedRun run_training(const AppConfig& cfg, const DatasetManifest& manifest, const ModelSpec& spec,
                        const TrainConfig& tcfg, bool quiet) {
  TrainedRun run;
  SplitPlan plan;
  if (cfg.blind) {
    for (const auto& v : manifest.videos) plan.train_video_ids.push_back(v.video_id);
  } else {
    plan = plan_split(manifest, cfg.split.n_val_videos, cfg.split.seed);
  }
  run.data = prepare(manifest, plan, cfg.pipeline);

  if (tcfg.weighted) {
    for (std::size_t c = 0; c < run.data.class_frequencies.size(); ++c) {
      if (run.data.class_frequencies[c] == 0.0) {
        throw ConfigError("weighted loss requires training examples for every class; class '" +
                          run.data.class_names[c] + "' has none");
      }
    }
  }

  ModelSpec s = spec;
  s.num_classes = manifest.num_classes();
  if (cfg.pretrained_checkpoint.empty()) {
    run.net = build(s, RandomInit{cfg.model_init_seed});
  } else {
    Checkpoint ckpt;
    try {
      ckpt = load_checkpoint(cfg.pretrained_checkpoint);
    } catch (const std::runtime_error& e) {
      throw DataError(e.what());
    }
    run.net = build(s, PretrainedInit{std::move(ckpt), cfg.model_init_seed});
  }

  TrainOptions opts;
  opts.eval_every = cfg.eval_every;
  opts.validate = !cfg.blind;
  opts.quiet = quiet;
  std::ostringstream log;
  run.result = train_network(*run.net, run.data, tcfg, opts, &log);
  run.log_text = log.str();
  return run;
}

void save_run(const TrainedRun& run, const AppConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  Checkpoint ckpt = run.net->snapshot();
  Tensor mean({3, run.data.mean_image.height, run.data.mean_image.width}, run.data.mean_image.pix);
  ckpt.emplace("pipeline/mean_image", std::move(mean));
  save_checkpoint(ckpt, (fs::path(out_dir) / "checkpoint.bin").string());

  std::ofstream log(fs::path(out_dir) / "train_log.txt");
  log << run.log_text;

  std::ofstream rc(fs::path(out_dir) / "resolved_config.json");
  rc << cfg.resolved().dump(2) << '\n';
}

std::string frame_key(const std::string& video_id, std::size_t frame_index) {
  return video_id + ":" + std::to_string(frame_index);
}

int cmd_generate(const CliOptions& opts) {
  AppConfig cfg = load_cli_config(opts);
  DatasetManifest m = cfg.generator_source_task ? generate_source_task(cfg.generator, cfg.generator_out_dir)
                                                : generate(cfg.generator, cfg.generator_out_dir);
  if (!opts.quiet) {
    std::cout << "generated " << m.videos.size() << " videos, " << m.num_classes() << " classes at "
              << cfg.generator_out_dir << "/manifest.json\n";
  }
  return 0;
}

int cmd_split(const CliOptions& opts) {
  AppConfig cfg = load_cli_config(opts);
  DatasetManifest m = load_dataset(cfg);
  SplitPlan plan = plan_split(m, cfg.split.n_val_videos, cfg.split.seed);
  json j;
  j["train_video_ids"] = plan.train_video_ids;
  j["val_video_ids"] = plan.val_video_ids;
  j["excluded_tools"] = plan.excluded_tools;
  fs::create_directories(opts.out_dir);
  std::ofstream os(fs::path(opts.out_dir) / "split.json");
  os << j.dump(2) << '\n';
  if (!opts.quiet) std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_train(const CliOptions& opts) {
  AppConfig cfg = load_cli_config(opts);
  DatasetManifest m = load_dataset(cfg);
  TrainedRun run = run_training(cfg, m, cfg.model, cfg.train, opts.quiet);
  save_run(run, cfg, opts.out_dir);
  if (!opts.quiet) {
    std::cout << run.log_text;
    if (run.result.final_val_auc) std::cout << "final val_auc=" << *run.result.final_val_auc << '\n';
  }
  return 0;
}

int cmd_pretrain(const CliOptions& opts) {
  AppConfig cfg = load_cli_config(opts);
  DatasetManifest m = load_dataset(cfg);
  SplitPlan plan;
  for (const auto& v : m.videos) plan.train_video_ids.push_back(v.video_id);
  PreparedData data = prepare(m, plan, cfg.pipeline);
  std::ostringstream log;
  Checkpoint backbone = pretrain_source(cfg.model, data, cfg.train, &log);
  fs::create_directories(opts.out_dir);
  save_checkpoint(backbone, (fs::path(opts.out_dir) / "backbone.bin").string());
  std::ofstream lf(fs::path(opts.out_dir) / "pretrain_log.txt");
  lf << log.str();
  if (!opts.quiet) std::cout << log.str();
  return 0;
}

int cmd_predict(const CliOptions& opts, const std::string& checkpoint_path) {
  AppConfig cfg = load_cli_config(opts);
  DatasetManifest m = load_dataset(cfg);

  ModelSpec spec = cfg.model;
  spec.num_classes = m.num_classes();
  auto net = build(spec, RandomInit{0});
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(checkpoint_path);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  net->load(ckpt, /*backbone_only=*/false);

  PreparedData data;  // only the inference path pieces are needed
  data.pipeline = cfg.pipeline;
  data.class_names = m.tool_names;
  data.mean_image = mean_image_from_checkpoint(ckpt, cfg.pipeline.aug);

  fs::create_directories(opts.out_dir);
  std::ofstream csv(fs::path(opts.out_dir) / "predictions.csv");
  csv << "frame";
  for (const auto& n : m.tool_names) csv << ',' << n;
  csv << '\n';
  csv << std::setprecision(17);
  for (const auto& video : m.videos) {
    std::vector<Image> images;
    images.reserve(video.frames.size());
    for (const auto& fe : video.frames) images.push_back(read_ppm(fe.image_path));
    Tensor scores = predict_outputs(*net, images, data);
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
      csv << frame_key(video.video_id, video.frames[i].frame_index);
      for (std::size_t c = 0; c < m.num_classes(); ++c) csv << ',' << scores[i * m.num_classes() + c];
      csv << '\n';
    }
  }
  if (!opts.quiet) std::cout << "wrote " << (fs::path(opts.out_dir) / "predictions.csv").string() << '\n';
  return 0;
}

int cmd_eval(const CliOptions& opts, const std::string& predictions_path) {
  AppConfig cfg = load_cli_config(opts);
  DatasetManifest m = load_dataset(cfg);

  std::ifstream is(predictions_path);
  if (!is) throw DataError("cannot open predictions: " + predictions_path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty predictions file");
  // labels keyed by "video:frame"
  std::map<std::string, const LabelVector*> label_index;
  for (const auto& v : m.videos) {
    for (const auto& fe : v.frames) label_index[frame_key(v.video_id, fe.frame_index)] = &fe.labels;
  }

  std::vector<std::vector<double>> rows;
  std::vector<LabelVector> labels;
  std::size_t c = m.num_classes();
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    auto it = label_index.find(cell);
    if (it == label_index.end()) {
      throw DataError(predictions_path + ":" + std::to_string(lineno) + ": unknown frame key " + cell);
    }
    std::vector<double> scores;
    while (std::getline(ss, cell, ',')) scores.push_back(std::stod(cell));
    if (scores.size() != c) {
      throw DataError(predictions_path + ":" + std::to_string(lineno) + ": expected " + std::to_string(c) +
                      " scores");
    }
    rows.push_back(std::move(scores));
    labels.push_back(*it->second);
  }
  if (rows.empty()) throw DataError("predictions file has no rows");

  Tensor scores({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j) scores[i * c + j] = rows[i][j];
  }
  AucReport report;
  try {
    report = macro_auc(scores, labels, m.tool_names);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }

  fs::create_directories(opts.out_dir);
  std::ofstream csv(fs::path(opts.out_dir) / "auc.csv");
  csv << report.to_csv();
  if (!opts.quiet) std::cout << report.to_table();
  return 0;
}

int cmd_experiments(const CliOptions& opts) {
  AppConfig cfg = load_cli_config(opts);
  if (cfg.experiment_runs.empty()) throw ConfigError("config.experiment.runs is empty");
  DatasetManifest m = load_dataset(cfg);
  fs::create_directories(opts.out_dir);

  std::ofstream results_csv(fs::path(opts.out_dir) / "results.csv");
  results_csv << "run,repeat,seed,val_auc\n";
  results_csv << std::setprecision(10);

  std::ostringstream table;
  table << std::left << std::setw(24) << "Run" << "Val. AUC (mean +/- std)\n";

  for (const auto& run_cfg : cfg.experiment_runs) {
    std::vector<double> aucs;
    for (std::size_t r = 0; r < run_cfg.repeats; ++r) {
      AppConfig rcfg = cfg;
      rcfg.model = run_cfg.model;
      rcfg.train = run_cfg.train;
      rcfg.train.seed = run_cfg.train.seed + r;
      rcfg.model_init_seed = run_cfg.train.seed + r;
      TrainedRun run = run_training(rcfg, m, rcfg.model, rcfg.train, /*quiet=*/true);
      double auc_v = run.result.final_val_auc.value_or(std::nan(""));
      aucs.push_back(auc_v);
      results_csv << run_cfg.name << ',' << r << ',' << rcfg.train.seed << ',' << auc_v << '\n';

      std::string run_dir = (fs::path(opts.out_dir) / (run_cfg.name + "_r" + std::to_string(r))).string();
      save_run(run, rcfg, run_dir);
      if (!opts.quiet) {
        std::cout << run_cfg.name << " repeat " << r << ": val_auc=" << auc_v << '\n';
      }
    }
    double mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    double var = 0.0;
    for (double a : aucs) var += (a - mean) * (a - mean);
    double std_dev = aucs.size() > 1 ? std::sqrt(var / static_cast<double>(aucs.size() - 1)) : 0.0;
    table << std::left << std::setw(24) << run_cfg.name << std::fixed << std::setprecision(4) << mean
          << " +/- " << std_dev << '\n';
    table.unsetf(std::ios::fixed);
  }

  std::ofstream tf(fs::path(opts.out_dir) / "results.txt");
  tf << table.str();
  if (!opts.quiet) std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label surgical-tool frame classification toolkit"};
  app.require_subcommand(1);

  CliOptions opts;
  app.add_option("--config", opts.config_path, "JSON configuration file")->expected(1);
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "Override the configured seeds");
  app.add_option("--out", opts.out_dir, "Output directory");
  app.add_flag("--quiet", opts.quiet, "Suppress progress output");

  auto* generate = app.add_subcommand("generate", "Render a synthetic dataset");
  auto* split = app.add_subcommand("split", "Plan the video-level train/val split");
  auto* train = app.add_subcommand("train", "Train a model");
  auto* pretrain = app.add_subcommand("pretrain", "Train on a source task, save backbone weights");
  auto* predict = app.add_subcommand("predict", "Write per-frame prediction scores");
  auto* evaluate = app.add_subcommand("eval", "Score a predictions file against labels");
  auto* experiments = app.add_subcommand("experiments", "Run the configured experiment matrix");

  std::string checkpoint_path;
  predict->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
  std::string predictions_path;
  evaluate->add_option("--predictions", predictions_path, "Prediction CSV")->required();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opts.seed = seed_val;

  try {
    if (generate->parsed()) return cmd_generate(opts);
    if (split->parsed()) return cmd_split(opts);
    if (train->parsed()) return cmd_train(opts);
    if (pretrain->parsed()) return cmd_pretrain(opts);
    if (predict->parsed()) return cmd_predict(opts, checkpoint_path);
    if (evaluate->parsed()) return cmd_eval(opts, predictions_path);
    if (experiments->parsed()) return cmd_experiments(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    if (msg.find("non-finite") != std::string::npos) {
      std::cerr << "numeric error: " << msg << '\n';
      return 4;
    }
    std::cerr << "data error: " << msg << '\n';
    return 3;
  }
  return 0;
}
