#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toolnet/augment.hpp"
#include "toolnet/image.hpp"
#include "toolnet/labels.hpp"

namespace toolnet {

struct FrameEntry {
  std::size_t frame_index = 0;
  std::string image_path;
  LabelVector labels;
};

struct VideoRecord {
  std::string video_id;
  std::vector<FrameEntry> frames;  // frame_index strictly increasing
};

struct DatasetManifest {
  std::vector<std::string> tool_names;
  std::vector<VideoRecord> videos;

  std::size_t num_classes() const { return tool_names.size(); }
  const VideoRecord& video(const std::string& id) const;
};

/// Manifest JSON: {"tool_names": [...], "videos": [{"video_id", "frame_dir",
/// "annotations", "annotations2"?}]}. Annotation CSVs have the header
/// `frame,<tool_1>,...,<tool_c>` with 0/1 cells; a second annotator file of
/// identical shape turns disagreement cells into ignore-mask zeros.
/// Relative paths are resolved against the manifest's directory. Frame
/// images live at <frame_dir>/frame_<index 6 digits>.ppm.
DatasetManifest load_manifest(const std::string& json_path);

std::string frame_image_name(std::size_t frame_index);

struct SplitPlan {
  std::vector<std::string> train_video_ids;
  std::vector<std::string> val_video_ids;
  std::vector<std::string> excluded_tools;  // covered on at most one side
};

/// Video-level split maximizing the number of tools that appear in at
/// least one train and one val video. Small instances are solved exactly;
/// larger ones by seeded randomized restarts. Deterministic given seed.
SplitPlan plan_split(const DatasetManifest& manifest, std::size_t n_val_videos, std::uint64_t seed);

/// Keeps frames at list positions 0, stride, 2*stride, ...
std::vector<FrameEntry> subsample_frames(const VideoRecord& video, std::size_t stride);

/// Reduces frames with all-zero labels to round(ratio * count) by seeded
/// uniform sampling without replacement; frames with any tool are kept.
/// Relative order is preserved.
std::vector<FrameEntry> undersample_empty(const std::vector<FrameEntry>& frames, double ratio,
                                          std::uint64_t seed);

/// Elementwise mean of images, all of identical resolution.
Image compute_mean_image(const std::vector<Image>& images);
Image center(const Image& img, const Image& mean);

}  // namespace toolnet
