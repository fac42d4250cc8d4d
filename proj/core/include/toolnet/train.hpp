#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "toolnet/dataset.hpp"
#include "toolnet/loss.hpp"
#include "toolnet/metrics.hpp"
#include "toolnet/model.hpp"
#include "toolnet/optim.hpp"

namespace toolnet {

struct PipelineConfig {
  std::size_t frame_stride = 6;
  double undersample_ratio = 0.4;
  AugmentationParams aug;
  std::uint64_t seed = 0;
};

struct FrameRef {
  std::string video_id;
  std::size_t frame_index = 0;
  LabelVector labels;
};

/// Everything the training loop needs, assembled once per run: subsampled
/// and undersampled training frames with their source images in memory,
/// untouched validation frames, the training-set mean image and RGB PCA.
struct PreparedData {
  std::vector<std::string> class_names;
  SplitPlan split;
  PipelineConfig pipeline;

  std::vector<FrameRef> train_refs;
  std::vector<Image> train_images;  // original resolution, parallel to train_refs
  std::vector<FrameRef> val_refs;
  std::vector<Image> val_images;

  Image mean_image;                      // at crop resolution
  std::vector<double> class_frequencies; // positive frame counts in the training set
};

PreparedData prepare(const DatasetManifest& manifest, const SplitPlan& split, const PipelineConfig& pipeline);

/// Augmented (train) or deterministically cropped (val) frame, mean
/// centered and packed as a [3,H,W] slab into `dst` at batch slot `slot`.
void frame_to_tensor(const Image& processed, const Image& mean, Tensor& dst, std::size_t slot);

/// The per-frame augmentation stream: seeded from the pipeline seed, the
/// frame's provenance and the training iteration, so parallel workers and
/// reruns draw identical streams.
Rng frame_rng(std::uint64_t pipeline_seed, const std::string& video_id, std::size_t frame_index,
              std::size_t iteration);

struct TrainOptions {
  std::size_t eval_every = 500;  // 0 = never
  bool validate = true;          // false = "blind" training without a val set
  bool quiet = false;
};

struct TrainResult {
  std::vector<double> loss_curve;
  std::optional<double> final_val_auc;
};

/// Runs the inference path over the given frames; returns [N,c] scores.
Tensor predict_outputs(Network& net, const std::vector<Image>& images, const PreparedData& data,
                       std::size_t batch_size = 16);

AucReport evaluate_network(Network& net, const PreparedData& data);

/// SGD training loop with the static 1/(1+dn) schedule. Logs one line per
/// iteration to `log` (if given): iteration, lr, mean batch loss, and the
/// validation macro AUC at the eval cadence.
TrainResult train_network(Network& net, PreparedData& data, const TrainConfig& cfg, const TrainOptions& opts,
                          std::ostream* log);

/// Trains a throwaway network on a source dataset and returns its
/// backbone-only parameters for use as a pretrained initialization.
Checkpoint pretrain_source(const ModelSpec& spec, PreparedData& source_data, const TrainConfig& cfg,
                           std::ostream* log);

}  // namespace toolnet
