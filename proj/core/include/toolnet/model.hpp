#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toolnet/layers.hpp"

namespace toolnet {

enum class Family { FT, FFE };
enum class HeadType { AVG_FC, CONV_MAX };

std::string to_string(Family f);
std::string to_string(HeadType h);
Family family_from_string(const std::string& s);
HeadType head_from_string(const std::string& s);

/// Declarative description of a network instance.
///
/// The backbone is a mini residual network: one stem conv followed by
/// residual blocks in stages of doubling width, so conv layer count is
/// 1 + 2 * blocks. `k` counts conv layers: frozen leading layers for FT,
/// extractor depth for FFE. FFE `k` must come from `ffe_cut_points`,
/// the desk-scale analog of the reference cut depths.
struct ModelSpec {
  Family family = Family::FT;
  std::size_t k = 0;
  HeadType head = HeadType::AVG_FC;
  bool include_custom_part = true;  // FFE only
  std::size_t num_classes = 6;

  std::size_t stem_channels = 8;
  std::vector<std::size_t> stage_channels = {8, 16, 32, 64};
  std::size_t blocks_per_stage = 2;
  std::vector<std::size_t> ffe_cut_points = {7, 10, 14, 17};

  std::size_t custom_feature_maps = 32;  // F; reference value 384
  std::size_t custom_repeats = 3;        // R
  std::size_t conv_max_kernel = 1;

  std::size_t input_h = 64;
  std::size_t input_w = 64;

  std::size_t backbone_conv_layers() const { return 1 + 2 * stage_channels.size() * blocks_per_stage; }
  void validate() const;
};

/// Mini residual backbone: stem conv (stride 2) + max pool, then residual
/// stages. Can be truncated after the first k conv layers, including cuts
/// inside a block (the block's second conv and shortcut are then dropped).
class Backbone {
 public:
  Backbone(ParamRegistry& reg, const ModelSpec& spec, Rng& rng);

  Var forward(const Var& x, bool train) { return forward_truncated(x, total_conv_layers_, train); }
  Var forward_truncated(const Var& x, std::size_t k, bool train);
  std::size_t total_conv_layers() const { return total_conv_layers_; }
  std::size_t out_channels_at(std::size_t k) const;

  Conv2dLayer stem;
  BatchNormLayer stem_bn;
  std::vector<ResidualBlock> blocks;

 private:
  std::size_t total_conv_layers_;
};

struct AvgFcHead {
  LinearLayer fc;
  AvgFcHead(ParamRegistry& reg, std::size_t in_ch, std::size_t num_classes, Rng& rng)
      : fc(reg, "head/fc", in_ch, num_classes, rng) {}
  Var forward(const Var& features) const { return sigmoid(fc.forward(global_avg_pool(features))); }
};

struct ConvMaxHead {
  Conv2dLayer conv;
  ConvMaxHead(ParamRegistry& reg, std::size_t in_ch, std::size_t num_classes, std::size_t kernel, Rng& rng)
      : conv(reg, "head/conv", in_ch, num_classes, kernel, 1, kernel / 2, rng) {}
  Var forward(const Var& features) const { return sigmoid(global_max_pool(conv.forward(features))); }
};

/// A built network instance. Owns its parameters; frozen parameters are
/// flagged in the registry and excluded from optimization.
class Network {
 public:
  ModelSpec spec;
  ParamRegistry params;
  std::unique_ptr<Backbone> backbone;
  std::optional<CustomPart> custom;
  std::optional<AvgFcHead> avg_fc_head;
  std::optional<ConvMaxHead> conv_max_head;

  /// Input [N,3,H,W] -> per-class probabilities [N,c] in (0,1).
  Var forward(const Var& input, bool train);

  std::vector<Param*> trainable_params();
  Checkpoint snapshot() const;                    // all parameters
  Checkpoint backbone_snapshot() const;           // backbone parameters only
  void load(const Checkpoint& ckpt, bool backbone_only);
};

/// Marks the first k backbone conv layers (and their batch norms) frozen.
/// k must be less than the backbone's total conv layer count.
void freeze_leading_layers(Network& net, std::size_t k);

struct RandomInit {
  std::uint64_t seed = 0;
};
struct PretrainedInit {
  Checkpoint checkpoint;  // backbone parameters
  std::uint64_t seed = 0; // for the freshly initialized remainder
};

std::unique_ptr<Network> build(const ModelSpec& spec, const RandomInit& init);
std::unique_ptr<Network> build(const ModelSpec& spec, const PretrainedInit& init);

}  // namespace toolnet
