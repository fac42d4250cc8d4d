#include "toolnet/config.hpp"

#include <fstream>
#include <set>

namespace toolnet {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("expected an object at " + where);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key " + where + "." + it.key());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T def, const std::string& where) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value at " + where + "." + key);
  }
}

AugmentationParams parse_augment(const json& j, const AugmentationParams& base, const std::string& where) {
  check_keys(j, {"scale_w", "scale_h", "crop_w", "crop_h", "max_rotation_deg"}, where);
  AugmentationParams a = base;
  a.scale_w = get_or<std::size_t>(j, "scale_w", a.scale_w, where);
  a.scale_h = get_or<std::size_t>(j, "scale_h", a.scale_h, where);
  a.crop_w = get_or<std::size_t>(j, "crop_w", a.crop_w, where);
  a.crop_h = get_or<std::size_t>(j, "crop_h", a.crop_h, where);
  a.max_rotation_deg = get_or<double>(j, "max_rotation_deg", a.max_rotation_deg, where);
  if (a.crop_w > a.scale_w || a.crop_h > a.scale_h) {
    throw ConfigError("crop exceeds scaled size at " + where);
  }
  return a;
}

GeneratorConfig parse_generator(const json& j, const std::string& where) {
  check_keys(j,
             {"out_dir", "num_videos", "frames_per_video", "image_w", "image_h", "seed", "max_simultaneous",
              "annotator_noise", "mean_episode_frames", "classes", "source_task"},
             where);
  GeneratorConfig g;
  g.num_videos = get_or<std::size_t>(j, "num_videos", g.num_videos, where);
  g.frames_per_video = get_or<std::size_t>(j, "frames_per_video", g.frames_per_video, where);
  g.image_w = get_or<std::size_t>(j, "image_w", g.image_w, where);
  g.image_h = get_or<std::size_t>(j, "image_h", g.image_h, where);
  g.seed = get_or<std::uint64_t>(j, "seed", g.seed, where);
  g.max_simultaneous = get_or<std::size_t>(j, "max_simultaneous", g.max_simultaneous, where);
  g.annotator_noise = get_or<double>(j, "annotator_noise", g.annotator_noise, where);
  g.mean_episode_frames = get_or<double>(j, "mean_episode_frames", g.mean_episode_frames, where);
  if (j.contains("classes")) {
    if (!j.at("classes").is_array()) throw ConfigError("expected an array at " + where + ".classes");
    std::size_t idx = 0;
    for (const auto& cj : j.at("classes")) {
      std::string cw = where + ".classes[" + std::to_string(idx) + "]";
      check_keys(cj, {"name", "prevalence", "coverage"}, cw);
      ClassProfile cp;
      cp.name = get_or<std::string>(cj, "name", "tool_" + std::to_string(idx), cw);
      cp.prevalence = get_or<double>(cj, "prevalence", cp.prevalence, cw);
      cp.coverage = get_or<std::size_t>(cj, "coverage", cp.coverage, cw);
      g.classes.push_back(cp);
      ++idx;
    }
  }
  if (g.classes.empty()) {
    const double prev[6] = {0.30, 0.25, 0.20, 0.15, 0.10, 0.06};
    for (std::size_t i = 0; i < 6; ++i) g.classes.push_back({"tool_" + std::to_string(i), prev[i], 0});
  }
  return g;
}

}  // namespace

ModelSpec parse_model_spec(const json& j, const ModelSpec& base, const std::string& where) {
  check_keys(j,
             {"family", "k", "head", "include_custom_part", "num_classes", "stem_channels", "stage_channels",
              "blocks_per_stage", "ffe_cut_points", "custom_feature_maps", "custom_repeats", "conv_max_kernel",
              "input_h", "input_w"},
             where);
  ModelSpec m = base;
  if (j.contains("family")) m.family = family_from_string(get_or<std::string>(j, "family", "", where));
  m.k = get_or<std::size_t>(j, "k", m.k, where);
  if (j.contains("head")) m.head = head_from_string(get_or<std::string>(j, "head", "", where));
  m.include_custom_part = get_or<bool>(j, "include_custom_part", m.include_custom_part, where);
  m.num_classes = get_or<std::size_t>(j, "num_classes", m.num_classes, where);
  m.stem_channels = get_or<std::size_t>(j, "stem_channels", m.stem_channels, where);
  m.stage_channels = get_or<std::vector<std::size_t>>(j, "stage_channels", m.stage_channels, where);
  m.blocks_per_stage = get_or<std::size_t>(j, "blocks_per_stage", m.blocks_per_stage, where);
  m.ffe_cut_points = get_or<std::vector<std::size_t>>(j, "ffe_cut_points", m.ffe_cut_points, where);
  m.custom_feature_maps = get_or<std::size_t>(j, "custom_feature_maps", m.custom_feature_maps, where);
  m.custom_repeats = get_or<std::size_t>(j, "custom_repeats", m.custom_repeats, where);
  m.conv_max_kernel = get_or<std::size_t>(j, "conv_max_kernel", m.conv_max_kernel, where);
  m.input_h = get_or<std::size_t>(j, "input_h", m.input_h, where);
  m.input_w = get_or<std::size_t>(j, "input_w", m.input_w, where);
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " (at " + where + ")");
  }
  return m;
}

TrainConfig parse_train_config(const json& j, const TrainConfig& base, const std::string& where) {
  check_keys(j,
             {"lr0", "decay", "momentum", "batch_size", "iterations", "l2", "weighted", "seed", "val",
              "eval_every", "augment"},
             where);
  TrainConfig t = base;
  t.lr0 = get_or<double>(j, "lr0", t.lr0, where);
  t.decay = get_or<double>(j, "decay", t.decay, where);
  t.momentum = get_or<double>(j, "momentum", t.momentum, where);
  t.batch_size = get_or<std::size_t>(j, "batch_size", t.batch_size, where);
  t.iterations = get_or<std::size_t>(j, "iterations", t.iterations, where);
  t.l2 = get_or<double>(j, "l2", t.l2, where);
  t.weighted = get_or<bool>(j, "weighted", t.weighted, where);
  t.seed = get_or<std::uint64_t>(j, "seed", t.seed, where);
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " (at " + where + ")");
  }
  return t;
}

AppConfig parse_config(const json& doc) {
  check_keys(doc, {"dataset", "split", "model", "train", "eval", "experiment"}, "config");
  AppConfig cfg;

  if (doc.contains("dataset")) {
    const json& d = doc.at("dataset");
    check_keys(d, {"manifest", "generate", "frame_stride", "undersample_ratio", "pipeline_seed"},
               "config.dataset");
    cfg.manifest_path = get_or<std::string>(d, "manifest", "", "config.dataset");
    cfg.pipeline.frame_stride = get_or<std::size_t>(d, "frame_stride", cfg.pipeline.frame_stride,
                                                    "config.dataset");
    cfg.pipeline.undersample_ratio =
        get_or<double>(d, "undersample_ratio", cfg.pipeline.undersample_ratio, "config.dataset");
    cfg.pipeline.seed = get_or<std::uint64_t>(d, "pipeline_seed", cfg.pipeline.seed, "config.dataset");
    if (d.contains("generate")) {
      cfg.generator = parse_generator(d.at("generate"), "config.dataset.generate");
      cfg.generator_out_dir =
          get_or<std::string>(d.at("generate"), "out_dir", cfg.generator_out_dir, "config.dataset.generate");
      cfg.generator_source_task =
          get_or<bool>(d.at("generate"), "source_task", false, "config.dataset.generate");
    }
  }

  if (doc.contains("split")) {
    const json& s = doc.at("split");
    check_keys(s, {"n_val_videos", "seed"}, "config.split");
    cfg.split.n_val_videos = get_or<std::size_t>(s, "n_val_videos", cfg.split.n_val_videos, "config.split");
    cfg.split.seed = get_or<std::uint64_t>(s, "seed", cfg.split.seed, "config.split");
  }

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    json core = m;
    core.erase("pretrained_checkpoint");
    core.erase("init_seed");
    cfg.model = parse_model_spec(core, cfg.model, "config.model");
    cfg.pretrained_checkpoint = get_or<std::string>(m, "pretrained_checkpoint", "", "config.model");
    cfg.model_init_seed = get_or<std::uint64_t>(m, "init_seed", 0, "config.model");
  } else {
    cfg.model.validate();
  }

  // Augmentation geometry defaults to the model input with an 8px margin.
  cfg.pipeline.aug.crop_w = cfg.model.input_w;
  cfg.pipeline.aug.crop_h = cfg.model.input_h;
  cfg.pipeline.aug.scale_w = cfg.model.input_w + 8;
  cfg.pipeline.aug.scale_h = cfg.model.input_h + 8;

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    cfg.train = parse_train_config(t, cfg.train, "config.train");
    std::string val = get_or<std::string>(t, "val", "auto", "config.train");
    if (val != "auto" && val != "none") throw ConfigError("config.train.val must be \"auto\" or \"none\"");
    cfg.blind = val == "none";
    cfg.eval_every = get_or<std::size_t>(t, "eval_every", cfg.eval_every, "config.train");
    if (t.contains("augment")) {
      cfg.pipeline.aug = parse_augment(t.at("augment"), cfg.pipeline.aug, "config.train.augment");
    }
  }

  if (doc.contains("experiment")) {
    const json& e = doc.at("experiment");
    check_keys(e, {"runs"}, "config.experiment");
    std::set<std::string> names;
    if (e.contains("runs")) {
      std::size_t idx = 0;
      for (const auto& rj : e.at("runs")) {
        std::string where = "config.experiment.runs[" + std::to_string(idx) + "]";
        check_keys(rj, {"name", "model", "train", "repeats"}, where);
        ExperimentRun run;
        run.name = get_or<std::string>(rj, "name", "run_" + std::to_string(idx), where);
        if (!names.insert(run.name).second) throw ConfigError("duplicate run name at " + where);
        run.model = rj.contains("model") ? parse_model_spec(rj.at("model"), cfg.model, where + ".model")
                                         : cfg.model;
        run.train = rj.contains("train") ? parse_train_config(rj.at("train"), cfg.train, where + ".train")
                                         : cfg.train;
        run.repeats = get_or<std::size_t>(rj, "repeats", run.repeats, where);
        if (run.repeats < 1) throw ConfigError("repeats must be >= 1 at " + where);
        cfg.experiment_runs.push_back(std::move(run));
        ++idx;
      }
    }
  }
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(doc);
}

namespace {

json model_to_json(const ModelSpec& m) {
  json j;
  j["family"] = to_string(m.family);
  j["k"] = m.k;
  j["head"] = to_string(m.head);
  j["include_custom_part"] = m.include_custom_part;
  j["num_classes"] = m.num_classes;
  j["stem_channels"] = m.stem_channels;
  j["stage_channels"] = m.stage_channels;
  j["blocks_per_stage"] = m.blocks_per_stage;
  j["ffe_cut_points"] = m.ffe_cut_points;
  j["custom_feature_maps"] = m.custom_feature_maps;
  j["custom_repeats"] = m.custom_repeats;
  j["conv_max_kernel"] = m.conv_max_kernel;
  j["input_h"] = m.input_h;
  j["input_w"] = m.input_w;
  return j;
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["lr0"] = t.lr0;
  j["decay"] = t.decay;
  j["momentum"] = t.momentum;
  j["batch_size"] = t.batch_size;
  j["iterations"] = t.iterations;
  j["l2"] = t.l2;
  j["weighted"] = t.weighted;
  j["seed"] = t.seed;
  return j;
}

}  // namespace

json AppConfig::resolved() const {
  json j;
  j["dataset"]["manifest"] = manifest_path;
  j["dataset"]["frame_stride"] = pipeline.frame_stride;
  j["dataset"]["undersample_ratio"] = pipeline.undersample_ratio;
  j["dataset"]["pipeline_seed"] = pipeline.seed;
  j["split"]["n_val_videos"] = split.n_val_videos;
  j["split"]["seed"] = split.seed;
  j["model"] = model_to_json(model);
  j["model"]["pretrained_checkpoint"] = pretrained_checkpoint;
  j["model"]["init_seed"] = model_init_seed;
  j["train"] = train_to_json(train);
  j["train"]["val"] = blind ? "none" : "auto";
  j["train"]["eval_every"] = eval_every;
  j["train"]["augment"]["scale_w"] = pipeline.aug.scale_w;
  j["train"]["augment"]["scale_h"] = pipeline.aug.scale_h;
  j["train"]["augment"]["crop_w"] = pipeline.aug.crop_w;
  j["train"]["augment"]["crop_h"] = pipeline.aug.crop_h;
  j["train"]["augment"]["max_rotation_deg"] = pipeline.aug.max_rotation_deg;
  if (!experiment_runs.empty()) {
    j["experiment"]["runs"] = json::array();
    for (const auto& r : experiment_runs) {
      json rj;
      rj["name"] = r.name;
      rj["model"] = model_to_json(r.model);
      rj["train"] = train_to_json(r.train);
      rj["repeats"] = r.repeats;
      j["experiment"]["runs"].push_back(rj);
    }
  }
  return j;
}

}  // namespace toolnet
