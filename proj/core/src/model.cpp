#include "toolnet/model.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace toolnet {

std::string to_string(Family f) { return f == Family::FT ? "FT" : "FFE"; }
std::string to_string(HeadType h) { return h == HeadType::AVG_FC ? "avg_fc" : "conv_max"; }

Family family_from_string(const std::string& s) {
  if (s == "FT" || s == "ft") return Family::FT;
  if (s == "FFE" || s == "ffe") return Family::FFE;
  throw std::invalid_argument("unknown network family: " + s);
}

HeadType head_from_string(const std::string& s) {
  if (s == "avg_fc" || s == "avg-fc") return HeadType::AVG_FC;
  if (s == "conv_max" || s == "conv-max") return HeadType::CONV_MAX;
  throw std::invalid_argument("unknown head type: " + s);
}

void ModelSpec::validate() const {
  if (num_classes < 1) throw std::invalid_argument("ModelSpec: need at least one class");
  if (stem_channels < 1 || stage_channels.empty() || blocks_per_stage < 1) {
    throw std::invalid_argument("ModelSpec: invalid backbone configuration");
  }
  std::size_t total = backbone_conv_layers();
  if (family == Family::FT) {
    if (k >= total) {
      throw std::invalid_argument("ModelSpec: FT k=" + std::to_string(k) + " leaves no trainable backbone (" +
                                  std::to_string(total) + " conv layers)");
    }
  } else {
    if (std::find(ffe_cut_points.begin(), ffe_cut_points.end(), k) == ffe_cut_points.end()) {
      throw std::invalid_argument("ModelSpec: FFE k=" + std::to_string(k) + " is not a configured cut point");
    }
    if (k < 1 || k > total) throw std::invalid_argument("ModelSpec: FFE cut point out of range");
    if (include_custom_part && custom_repeats < 1) {
      throw std::invalid_argument("ModelSpec: custom part needs at least one repetition");
    }
  }
  if (conv_max_kernel % 2 == 0) throw std::invalid_argument("ModelSpec: conv_max_kernel must be odd");
}

Backbone::Backbone(ParamRegistry& reg, const ModelSpec& spec, Rng& rng)
    : stem(reg, "backbone/stem", 3, spec.stem_channels, 3, 2, 1, rng),
      stem_bn(reg, "backbone/stem_bn", spec.stem_channels) {
  std::size_t in_ch = spec.stem_channels;
  for (std::size_t s = 0; s < spec.stage_channels.size(); ++s) {
    std::size_t out_ch = spec.stage_channels[s];
    for (std::size_t b = 0; b < spec.blocks_per_stage; ++b) {
      std::size_t stride = (b == 0 && s > 0) ? 2 : 1;
      std::string path = "backbone/block" + std::to_string(blocks.size());
      blocks.emplace_back(reg, path, in_ch, out_ch, stride, rng);
      in_ch = out_ch;
    }
  }
  total_conv_layers_ = 1 + 2 * blocks.size();
}

Var Backbone::forward_truncated(const Var& x, std::size_t k, bool train) {
  if (k < 1 || k > total_conv_layers_) {
    throw std::invalid_argument("Backbone: truncation depth " + std::to_string(k) + " out of range");
  }
  Var h = relu(stem_bn.forward(stem.forward(x), train));
  h = max_pool(h, 2, 2);
  std::size_t remaining = k - 1;
  for (auto& block : blocks) {
    if (remaining == 0) break;
    if (remaining == 1) {
      h = block.forward_first_conv(h, train);
      remaining = 0;
    } else {
      h = block.forward(h, train);
      remaining -= 2;
    }
  }
  return h;
}

std::size_t Backbone::out_channels_at(std::size_t k) const {
  if (k < 1 || k > total_conv_layers_) throw std::invalid_argument("Backbone: depth out of range");
  if (k == 1) return stem.out_channels();
  std::size_t block_idx = (k - 2) / 2;  // block containing conv layer k
  return blocks[block_idx].conv1.out_channels();
}

Var Network::forward(const Var& input, bool train) {
  if (input->value.ndim() != 4) {
    throw std::invalid_argument("Network: expected [N,3,H,W] input, got " + shape_string(input->value.shape()));
  }
  Var features;
  if (spec.family == Family::FT) {
    features = backbone->forward(input, train);
  } else {
    features = backbone->forward_truncated(input, spec.k, train);
    if (custom) features = custom->forward(features, train);
  }
  return avg_fc_head ? avg_fc_head->forward(features) : conv_max_head->forward(features);
}

std::vector<Param*> Network::trainable_params() {
  std::vector<Param*> out;
  for (auto& p : params.all()) {
    if (!p.frozen) out.push_back(&p);
  }
  return out;
}

namespace {

void for_each_bn(Network& net, const std::function<void(BatchNormLayer&)>& fn) {
  fn(net.backbone->stem_bn);
  for (auto& b : net.backbone->blocks) {
    fn(b.bn1);
    fn(b.bn2);
    if (b.proj_bn) fn(*b.proj_bn);
  }
  if (net.custom) {
    for (auto& rep : net.custom->reps) {
      for (auto& bn : rep.bns) fn(bn);
    }
  }
}

void freeze_param(Param& p) {
  p.frozen = true;
  p.node->requires_grad = false;
  p.node->grad = Tensor();  // no gradient entry for frozen parameters
}

}  // namespace

// Freezes the first k conv layers (stem first, then block convs in order)
// together with their batch norms. A block's projection shortcut freezes
// with the block's second conv.
void freeze_leading_layers(Network& net, std::size_t k) {
  std::size_t remaining = k;
  auto freeze_unit = [&](const std::string& conv_path, BatchNormLayer& bn) {
    freeze_param(net.params.at(conv_path + "/weight"));
    freeze_param(net.params.at(conv_path + "/bias"));
    freeze_param(net.params.at(bn.path + "/gamma"));
    freeze_param(net.params.at(bn.path + "/beta"));
    bn.frozen = true;
  };
  if (remaining == 0) return;
  freeze_unit("backbone/stem", net.backbone->stem_bn);
  --remaining;
  for (std::size_t i = 0; i < net.backbone->blocks.size() && remaining > 0; ++i) {
    auto& block = net.backbone->blocks[i];
    std::string base = "backbone/block" + std::to_string(i);
    freeze_unit(base + "/conv1", block.bn1);
    --remaining;
    if (remaining == 0) break;
    freeze_unit(base + "/conv2", block.bn2);
    --remaining;
    if (block.proj) {
      freeze_param(net.params.at(base + "/proj/weight"));
      freeze_param(net.params.at(base + "/proj/bias"));
      freeze_param(net.params.at(block.proj_bn->path + "/gamma"));
      freeze_param(net.params.at(block.proj_bn->path + "/beta"));
      block.proj_bn->frozen = true;
    }
  }
}

namespace {

std::unique_ptr<Network> build_skeleton(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto net = std::make_unique<Network>();
  net->spec = spec;
  Rng rng(seed);
  net->backbone = std::make_unique<Backbone>(net->params, spec, rng);
  std::size_t head_in;
  if (spec.family == Family::FT) {
    head_in = net->backbone->out_channels_at(net->backbone->total_conv_layers());
  } else {
    head_in = net->backbone->out_channels_at(spec.k);
    if (spec.include_custom_part) {
      net->custom.emplace(net->params, "custom", head_in, spec.custom_feature_maps, spec.custom_repeats, rng);
      head_in = spec.custom_feature_maps;
    }
  }
  if (spec.head == HeadType::AVG_FC) {
    net->avg_fc_head.emplace(net->params, head_in, spec.num_classes, rng);
  } else {
    net->conv_max_head.emplace(net->params, head_in, spec.num_classes, spec.conv_max_kernel, rng);
  }

  if (spec.family == Family::FT) {
    freeze_leading_layers(*net, spec.k);
  } else {
    freeze_leading_layers(*net, net->backbone->total_conv_layers());
  }
  return net;
}

}  // namespace

Checkpoint Network::snapshot() const {
  Checkpoint ckpt;
  for (const auto& p : params.all()) ckpt.emplace(p.path, p.node->value);
  auto& self = const_cast<Network&>(*this);
  for_each_bn(self, [&](BatchNormLayer& bn) {
    ckpt.emplace(bn.path + "/running_mean", bn.state.running_mean);
    ckpt.emplace(bn.path + "/running_var", bn.state.running_var);
  });
  return ckpt;
}

Checkpoint Network::backbone_snapshot() const {
  Checkpoint full = snapshot();
  Checkpoint out;
  for (auto& [name, t] : full) {
    if (name.rfind("backbone/", 0) == 0) out.emplace(name, std::move(t));
  }
  return out;
}

void Network::load(const Checkpoint& ckpt, bool backbone_only) {
  std::vector<std::string> missing;
  for (auto& p : params.all()) {
    if (backbone_only && p.path.rfind("backbone/", 0) != 0) continue;
    auto it = ckpt.find(p.path);
    if (it == ckpt.end()) {
      missing.push_back(p.path);
      continue;
    }
    if (!it->second.same_shape(p.node->value)) {
      throw std::runtime_error("checkpoint shape mismatch for " + p.path + ": " +
                               shape_string(it->second.shape()) + " vs " + shape_string(p.node->value.shape()));
    }
    p.node->value = it->second;
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "checkpoint is missing " << missing.size() << " parameter(s):";
    for (const auto& m : missing) os << ' ' << m;
    throw std::runtime_error(os.str());
  }
  for_each_bn(*this, [&](BatchNormLayer& bn) {
    if (backbone_only && bn.path.rfind("backbone/", 0) != 0) return;
    auto mi = ckpt.find(bn.path + "/running_mean");
    auto vi = ckpt.find(bn.path + "/running_var");
    if (mi != ckpt.end()) bn.state.running_mean = mi->second;
    if (vi != ckpt.end()) bn.state.running_var = vi->second;
  });
}

std::unique_ptr<Network> build(const ModelSpec& spec, const RandomInit& init) {
  return build_skeleton(spec, init.seed);
}

std::unique_ptr<Network> build(const ModelSpec& spec, const PretrainedInit& init) {
  auto net = build_skeleton(spec, init.seed);
  net->load(init.checkpoint, /*backbone_only=*/true);
  return net;
}

}  // namespace toolnet
