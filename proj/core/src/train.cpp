#include "toolnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

namespace toolnet {

namespace {

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Rng frame_rng(std::uint64_t pipeline_seed, const std::string& video_id, std::size_t frame_index,
              std::size_t iteration) {
  return Rng(mix64(mix64(mix64(pipeline_seed, hash_str(video_id)), frame_index), iteration));
}

PreparedData prepare(const DatasetManifest& manifest, const SplitPlan& split, const PipelineConfig& pipeline) {
  PreparedData data;
  data.class_names = manifest.tool_names;
  data.split = split;
  data.pipeline = pipeline;

  std::set<std::string> val_set(split.val_video_ids.begin(), split.val_video_ids.end());

  std::vector<FrameEntry> train_entries;
  std::vector<std::string> train_entry_videos;
  for (const auto& id : split.train_video_ids) {
    const VideoRecord& video = manifest.video(id);
    for (auto& fe : subsample_frames(video, pipeline.frame_stride)) {
      train_entries.push_back(fe);
      train_entry_videos.push_back(id);
    }
  }
  // Undersampling acts on the concatenated frame list, after the stride.
  {
    std::vector<FrameEntry> kept = undersample_empty(train_entries, pipeline.undersample_ratio, pipeline.seed);
    std::size_t src = 0;
    for (const auto& fe : kept) {
      while (train_entries[src].image_path != fe.image_path) ++src;
      data.train_refs.push_back(FrameRef{train_entry_videos[src], fe.frame_index, fe.labels});
      data.train_images.push_back(read_ppm(fe.image_path));
      ++src;
    }
  }

  for (const auto& id : split.val_video_ids) {
    const VideoRecord& video = manifest.video(id);
    for (const auto& fe : video.frames) {
      data.val_refs.push_back(FrameRef{id, fe.frame_index, fe.labels});
      data.val_images.push_back(read_ppm(fe.image_path));
    }
  }

  if (data.train_refs.empty()) throw std::runtime_error("prepare: empty training set");

  std::vector<Image> cropped;
  cropped.reserve(data.train_images.size());
  for (const auto& img : data.train_images) cropped.push_back(scale_center_crop(img, pipeline.aug));
  data.mean_image = compute_mean_image(cropped);
  data.pipeline.aug.color = compute_color_pca(cropped);

  data.class_frequencies.assign(manifest.num_classes(), 0.0);
  for (const auto& ref : data.train_refs) {
    for (std::size_t c = 0; c < ref.labels.size(); ++c) {
      if (ref.labels.present[c]) data.class_frequencies[c] += 1.0;
    }
  }
  return data;
}

void frame_to_tensor(const Image& processed, const Image& mean, Tensor& dst, std::size_t slot) {
  std::size_t chw = 3 * processed.height * processed.width;
  if (dst.shape()[2] != processed.height || dst.shape()[3] != processed.width) {
    throw std::invalid_argument("frame_to_tensor: image does not match tensor resolution");
  }
  double* out = dst.data() + slot * chw;
  for (std::size_t i = 0; i < chw; ++i) out[i] = processed.pix[i] - mean.pix[i];
}

Tensor predict_outputs(Network& net, const std::vector<Image>& images, const PreparedData& data,
                       std::size_t batch_size) {
  const auto& aug = data.pipeline.aug;
  std::size_t n = images.size();
  std::size_t c = net.spec.num_classes;
  Tensor out({std::max<std::size_t>(n, 1), c});
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::size_t bs = std::min(batch_size, n - start);
    Tensor batch({bs, 3, aug.crop_h, aug.crop_w});
    for (std::size_t i = 0; i < bs; ++i) {
      frame_to_tensor(scale_center_crop(images[start + i], aug), data.mean_image, batch, i);
    }
    Var probs = net.forward(make_const(std::move(batch)), /*train=*/false);
    for (std::size_t i = 0; i < bs; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[(start + i) * c + j] = probs->value[i * c + j];
    }
  }
  return out;
}

AucReport evaluate_network(Network& net, const PreparedData& data) {
  Tensor scores = predict_outputs(net, data.val_images, data);
  std::vector<LabelVector> labels;
  labels.reserve(data.val_refs.size());
  for (const auto& r : data.val_refs) labels.push_back(r.labels);
  return macro_auc(scores, labels, data.class_names);
}

TrainResult train_network(Network& net, PreparedData& data, const TrainConfig& cfg, const TrainOptions& opts,
                          std::ostream* log) {
  cfg.validate();
  std::optional<ClassWeights> weights;
  if (cfg.weighted) weights = class_weights(data.class_frequencies);

  auto trainable = net.trainable_params();
  std::unordered_map<std::string, Tensor> velocities;
  for (Param* p : trainable) velocities.emplace(p->path, Tensor::zeros(p->node->value.shape()));

  const auto& aug = data.pipeline.aug;
  std::size_t n_train = data.train_refs.size();
  TrainResult result;

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    double lr = lr_at(iter, cfg);

    Rng batch_rng(mix64(cfg.seed, iter));
    std::uniform_int_distribution<std::size_t> pick(0, n_train - 1);
    Tensor batch({cfg.batch_size, 3, aug.crop_h, aug.crop_w});
    std::vector<LabelVector> batch_labels;
    batch_labels.reserve(cfg.batch_size);
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      std::size_t idx = pick(batch_rng);
      const FrameRef& ref = data.train_refs[idx];
      Rng rng = frame_rng(data.pipeline.seed, ref.video_id, ref.frame_index, iter);
      Image processed = augment(data.train_images[idx], aug, rng);
      frame_to_tensor(processed, data.mean_image, batch, i);
      batch_labels.push_back(ref.labels);
    }

    for (Param* p : trainable) p->node->zero_grad();
    Var probs = net.forward(make_const(std::move(batch)), /*train=*/true);
    Var loss = multilabel_loss(probs, batch_labels, weights ? &*weights : nullptr);
    loss->value.check_finite("training loss");
    backward(loss);

    for (Param* p : trainable) {
      sgd_momentum_step(p->node->value, p->node->grad, velocities.at(p->path), lr, cfg.momentum, cfg.l2);
    }

    result.loss_curve.push_back(loss->value[0]);
    bool eval_now = opts.validate && opts.eval_every > 0 &&
                    ((iter + 1) % opts.eval_every == 0 || iter + 1 == cfg.iterations);
    std::optional<double> val_auc;
    if (eval_now) {
      val_auc = evaluate_network(net, data).macro_auc;
      result.final_val_auc = val_auc;
    }
    if (log && (!opts.quiet || eval_now)) {
      (*log) << "iter=" << (iter + 1) << " lr=" << std::setprecision(10) << lr << " loss="
             << loss->value[0];
      if (val_auc) (*log) << " val_auc=" << *val_auc;
      (*log) << '\n';
    }
  }
  if (opts.validate && cfg.iterations == 0) result.final_val_auc.reset();
  return result;
}

Checkpoint pretrain_source(const ModelSpec& spec, PreparedData& source_data, const TrainConfig& cfg,
                           std::ostream* log) {
  ModelSpec src_spec = spec;
  src_spec.family = Family::FT;
  src_spec.k = 0;
  src_spec.num_classes = source_data.class_names.size();
  auto net = build(src_spec, RandomInit{cfg.seed});
  TrainOptions opts;
  opts.validate = !source_data.val_refs.empty();
  train_network(*net, source_data, cfg, opts, log);
  return net->backbone_snapshot();
}

}  // namespace toolnet
