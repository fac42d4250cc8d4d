#pragma once

#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "toolnet/autograd.hpp"

namespace toolnet {

/// One named trainable tensor. Frozen parameters keep their values
/// bit-identical across training steps and receive no gradient entry.
struct Param {
  std::string path;
  Var node;
  bool frozen = false;
};

/// Ordered collection of a network's parameters; paths must be unique.
class ParamRegistry {
 public:
  Var add(const std::string& path, Tensor init);
  Param& at(const std::string& path);
  const Param& at(const std::string& path) const;
  bool contains(const std::string& path) const { return index_.count(path) != 0; }
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Rng = std::mt19937_64;

/// He-uniform weight draw: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

struct Conv2dLayer {
  Var weight;
  Var bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  Conv2dLayer(ParamRegistry& reg, const std::string& path, std::size_t in_ch, std::size_t out_ch,
              std::size_t kernel, std::size_t stride, std::size_t padding, Rng& rng);
  Var forward(const Var& x) const { return conv2d(x, weight, bias, stride, padding); }
  std::size_t out_channels() const { return weight->value.shape()[0]; }
};

struct BatchNormLayer {
  std::string path;
  Var gamma;
  Var beta;
  BatchNormState state;
  double momentum = 0.9;
  double epsilon = 1e-5;
  bool frozen = false;  // frozen layers always use running stats

  BatchNormLayer(ParamRegistry& reg, const std::string& path, std::size_t channels);
  Var forward(const Var& x, bool train) {
    return batch_norm(x, gamma, beta, state, train && !frozen, momentum, epsilon);
  }
};

struct LinearLayer {
  Var weight;
  Var bias;

  LinearLayer(ParamRegistry& reg, const std::string& path, std::size_t in_dim, std::size_t out_dim, Rng& rng);
  Var forward(const Var& x) const { return fully_connected(x, weight, bias); }
};

/// Basic two-conv residual block with optional strided 1x1 projection
/// shortcut. Output is relu(main(x) + shortcut(x)).
struct ResidualBlock {
  Conv2dLayer conv1;
  BatchNormLayer bn1;
  Conv2dLayer conv2;
  BatchNormLayer bn2;
  std::optional<Conv2dLayer> proj;
  std::optional<BatchNormLayer> proj_bn;

  ResidualBlock(ParamRegistry& reg, const std::string& path, std::size_t in_ch, std::size_t out_ch,
                std::size_t stride, Rng& rng);
  Var forward(const Var& x, bool train);
  /// First half only (conv1 + bn + relu); used when a feature extractor is
  /// cut inside a block.
  Var forward_first_conv(const Var& x, bool train);
};

/// Trainable part appended to a fixed feature extractor: R repetitions of
/// [max-pool 2x2/2, then 3x (conv 3x3 -> batch norm -> relu)] with F
/// feature maps per conv.
struct CustomPart {
  struct Rep {
    std::vector<Conv2dLayer> convs;
    std::vector<BatchNormLayer> bns;
  };
  std::vector<Rep> reps;
  std::size_t feature_maps;
  std::size_t pool_k = 2;
  std::size_t pool_stride = 2;

  CustomPart(ParamRegistry& reg, const std::string& path, std::size_t in_ch, std::size_t feature_maps,
             std::size_t repeats, Rng& rng);
  Var forward(const Var& x, bool train);
};

}  // namespace toolnet
