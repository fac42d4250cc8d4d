#include <benchmark/benchmark.h>

#include <random>

#include "toolnet/augment.hpp"
#include "toolnet/autograd.hpp"
#include "toolnet/loss.hpp"
#include "toolnet/metrics.hpp"
#include "toolnet/model.hpp"

using namespace toolnet;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  std::size_t ch = static_cast<std::size_t>(state.range(0));
  Var x = make_const(random_tensor({8, ch, 16, 16}, 1));
  Var k = make_const(random_tensor({ch, ch, 3, 3}, 2, 0.2));
  Var b = make_const(random_tensor({ch}, 3, 0.1));
  for (auto _ : state) {
    Var y = conv2d(x, k, b, 1, 1);
    benchmark::DoNotOptimize(y->value.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv2dBackward(benchmark::State& state) {
  std::size_t ch = static_cast<std::size_t>(state.range(0));
  Var x = make_param(random_tensor({8, ch, 16, 16}, 1));
  Var k = make_param(random_tensor({ch, ch, 3, 3}, 2, 0.2));
  Var b = make_param(random_tensor({ch}, 3, 0.1));
  for (auto _ : state) {
    x->zero_grad();
    k->zero_grad();
    b->zero_grad();
    Var y = conv2d(x, k, b, 1, 1);
    Var pooled = global_avg_pool(y);
    Var probs = sigmoid(pooled);
    std::vector<LabelVector> labels(8, LabelVector(ch));
    for (auto& lv : labels) lv.present[0] = 1;
    Var loss = multilabel_loss(probs, labels);
    backward(loss);
    benchmark::DoNotOptimize(k->grad.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(16);

void BM_NetworkForward(benchmark::State& state) {
  ModelSpec spec;
  spec.num_classes = 6;
  auto net = build(spec, RandomInit{1});
  Var x = make_const(random_tensor({8, 3, 64, 64}, 4, 0.5));
  for (auto _ : state) {
    Var y = net->forward(x, false);
    benchmark::DoNotOptimize(y->value.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_NetworkForward);

void BM_Auc(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n), mask(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = std::round(u(rng) * 100.0) / 100.0;
    labels[i] = static_cast<std::uint8_t>(bit(rng));
  }
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) {
    auto v = auc(scores, labels, mask);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(10000);

void BM_Augment(benchmark::State& state) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(80, 60);
  for (auto& p : img.pix) p = u(rng);
  AugmentationParams params;
  params.scale_w = 72;
  params.scale_h = 72;
  params.crop_w = 64;
  params.crop_h = 64;
  params.color.eigenvalues = {0.01, 0.003, 0.001};
  Rng aug_rng(11);
  for (auto _ : state) {
    Image out = augment(img, params, aug_rng);
    benchmark::DoNotOptimize(out.pix.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Augment);

}  // namespace

BENCHMARK_MAIN();
