#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toolnet/dataset.hpp"

namespace toolnet {

struct ClassProfile {
  std::string name;
  double prevalence = 0.1;   // target fraction of frames showing the class
  std::size_t coverage = 0;  // number of videos the class appears in; 0 = all
};

struct GeneratorConfig {
  std::size_t num_videos = 8;
  std::size_t frames_per_video = 100;
  std::size_t image_w = 64;
  std::size_t image_h = 64;
  std::vector<ClassProfile> classes;
  std::size_t max_simultaneous = 3;
  double annotator_noise = 0.0;  // per-cell probability of simulated disagreement
  double mean_episode_frames = 8.0;
  std::size_t shape_vocabulary_offset = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-video per-frame activity bits for every class, before rendering.
/// Activity comes in contiguous episodes; at most max_simultaneous classes
/// are active in any frame.
using ToolSchedule = std::vector<std::vector<std::vector<std::uint8_t>>>;  // [video][frame][class]

ToolSchedule schedule_tools(const GeneratorConfig& cfg);

/// Renders frame images and annotation CSVs under out_dir, writes
/// out_dir/manifest.json, and returns the loaded manifest. Deterministic
/// given cfg.seed, bit-exact including image files.
DatasetManifest generate(const GeneratorConfig& cfg, const std::string& out_dir);

/// Same machinery with a shifted shape vocabulary and "src_"-prefixed
/// class names, giving a pretraining task disjoint from the target task.
DatasetManifest generate_source_task(const GeneratorConfig& cfg, const std::string& out_dir);

}  // namespace toolnet
