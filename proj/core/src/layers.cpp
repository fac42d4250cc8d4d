#include "toolnet/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace toolnet {

Var ParamRegistry::add(const std::string& path, Tensor init) {
  if (index_.count(path)) throw std::invalid_argument("duplicate parameter path: " + path);
  Var node = make_param(std::move(init));
  index_.emplace(path, params_.size());
  params_.push_back(Param{path, node, false});
  return node;
}

Param& ParamRegistry::at(const std::string& path) {
  auto it = index_.find(path);
  if (it == index_.end()) throw std::out_of_range("unknown parameter path: " + path);
  return params_[it->second];
}

const Param& ParamRegistry::at(const std::string& path) const {
  auto it = index_.find(path);
  if (it == index_.end()) throw std::out_of_range("unknown parameter path: " + path);
  return params_[it->second];
}

Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

Conv2dLayer::Conv2dLayer(ParamRegistry& reg, const std::string& path, std::size_t in_ch, std::size_t out_ch,
                         std::size_t kernel, std::size_t stride_, std::size_t padding_, Rng& rng)
    : weight(reg.add(path + "/weight", he_uniform({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng))),
      bias(reg.add(path + "/bias", Tensor::zeros({out_ch}))),
      stride(stride_),
      padding(padding_) {}

BatchNormLayer::BatchNormLayer(ParamRegistry& reg, const std::string& path_, std::size_t channels)
    : path(path_),
      gamma(reg.add(path_ + "/gamma", Tensor::full({channels}, 1.0))),
      beta(reg.add(path_ + "/beta", Tensor::zeros({channels}))),
      state(channels) {}

LinearLayer::LinearLayer(ParamRegistry& reg, const std::string& path, std::size_t in_dim, std::size_t out_dim,
                         Rng& rng)
    : weight(reg.add(path + "/weight", he_uniform({out_dim, in_dim}, in_dim, rng))),
      bias(reg.add(path + "/bias", Tensor::zeros({out_dim}))) {}

ResidualBlock::ResidualBlock(ParamRegistry& reg, const std::string& path, std::size_t in_ch, std::size_t out_ch,
                             std::size_t stride, Rng& rng)
    : conv1(reg, path + "/conv1", in_ch, out_ch, 3, stride, 1, rng),
      bn1(reg, path + "/bn1", out_ch),
      conv2(reg, path + "/conv2", out_ch, out_ch, 3, 1, 1, rng),
      bn2(reg, path + "/bn2", out_ch) {
  if (stride != 1 || in_ch != out_ch) {
    proj.emplace(reg, path + "/proj", in_ch, out_ch, 1, stride, 0, rng);
    proj_bn.emplace(reg, path + "/proj_bn", out_ch);
  }
}

Var ResidualBlock::forward(const Var& x, bool train) {
  Var main = relu(bn1.forward(conv1.forward(x), train));
  main = bn2.forward(conv2.forward(main), train);
  Var shortcut = x;
  if (proj) shortcut = proj_bn->forward(proj->forward(x), train);
  return relu(add(main, shortcut));
}

Var ResidualBlock::forward_first_conv(const Var& x, bool train) {
  return relu(bn1.forward(conv1.forward(x), train));
}

CustomPart::CustomPart(ParamRegistry& reg, const std::string& path, std::size_t in_ch,
                       std::size_t feature_maps_, std::size_t repeats, Rng& rng)
    : feature_maps(feature_maps_) {
  if (repeats < 1) throw std::invalid_argument("CustomPart: needs at least one repetition");
  if (feature_maps < 1) throw std::invalid_argument("CustomPart: needs at least one feature map");
  std::size_t ch = in_ch;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rep rep;
    for (std::size_t i = 0; i < 3; ++i) {
      std::string p = path + "/rep" + std::to_string(r) + "/conv" + std::to_string(i);
      rep.convs.emplace_back(reg, p, ch, feature_maps, 3, 1, 1, rng);
      rep.bns.emplace_back(reg, path + "/rep" + std::to_string(r) + "/bn" + std::to_string(i), feature_maps);
      ch = feature_maps;
    }
    reps.push_back(std::move(rep));
  }
}

Var CustomPart::forward(const Var& x, bool train) {
  std::size_t need = 1;
  for (std::size_t r = 0; r < reps.size(); ++r) need *= pool_stride;
  const auto& s = x->value.shape();
  if (s.size() != 4 || s[2] < need || s[3] < need) {
    throw std::invalid_argument("CustomPart: spatial extents " + shape_string(s) + " too small for " +
                                std::to_string(reps.size()) + " poolings");
  }
  Var h = x;
  for (auto& rep : reps) {
    h = max_pool(h, pool_k, pool_stride);
    for (std::size_t i = 0; i < rep.convs.size(); ++i) {
      h = relu(rep.bns[i].forward(rep.convs[i].forward(h), train));
    }
  }
  return h;
}

}  // namespace toolnet
