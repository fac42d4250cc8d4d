#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "toolnet/loss.hpp"
#include "toolnet/optim.hpp"

using namespace toolnet;

TEST_CASE("bce analytic values") {
  CHECK(bce(1, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce(0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce(1, 0.9) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(bce(0, 0.1) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("bce clamps extreme probabilities instead of returning inf") {
  double v = bce(1, 0.0);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
  CHECK(std::isfinite(bce(0, 1.0)));
}

TEST_CASE("bce rejects labels and probabilities outside their domains") {
  CHECK_THROWS_AS(bce(2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(bce(1, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(bce(1, 1.01), std::invalid_argument);
}

TEST_CASE("class weights follow the square-root frequency ratio") {
  ClassWeights cw = class_weights({100.0, 25.0, 4.0});
  REQUIRE(cw.w.size() == 3);
  CHECK(cw.w[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cw.w[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cw.w[2] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("class weights reject non-positive frequencies by class index") {
  try {
    class_weights({10.0, 0.0, 5.0});
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
}

TEST_CASE("multilabel loss sums classes and averages the batch") {
  // two samples, two classes, all q = 0.5 => per-term ln 2
  Var probs = make_const(Tensor({2, 2}, {0.5, 0.5, 0.5, 0.5}));
  std::vector<LabelVector> labels(2, LabelVector(2));
  labels[0].present = {1, 0};
  labels[1].present = {0, 1};
  Var loss = multilabel_loss(probs, labels);
  CHECK(loss->value[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("class weights scale both loss and gradient") {
  Tensor pt({1, 2}, {0.5, 0.5});
  std::vector<LabelVector> labels(1, LabelVector(2));
  labels[0].present = {1, 1};
  ClassWeights cw;
  cw.w = {1.0, 3.0};

  Var p1 = make_param(pt);
  Var unweighted = multilabel_loss(p1, labels);
  backward(unweighted);
  Var p2 = make_param(pt);
  Var weighted = multilabel_loss(p2, labels, &cw);
  backward(weighted);

  CHECK(weighted->value[0] == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(p2->grad[0] == doctest::Approx(p1->grad[0]).epsilon(1e-12));
  CHECK(p2->grad[1] == doctest::Approx(3.0 * p1->grad[1]).epsilon(1e-12));
}

TEST_CASE("ignore mask removes a class from loss and gradient") {
  Tensor pt({1, 2}, {0.9, 0.2});
  std::vector<LabelVector> labels(1, LabelVector(2));
  labels[0].present = {1, 1};
  labels[0].evaluate = {1, 0};
  Var p = make_param(pt);
  Var loss = multilabel_loss(p, labels);
  CHECK(loss->value[0] == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  backward(loss);
  CHECK(p->grad[1] == 0.0);
  CHECK(p->grad[0] != 0.0);
}

TEST_CASE("loss gradient through sigmoid matches finite differences") {
  Rng rng(31);
  Var z = make_param(random_tensor({3, 4}, rng, 2.0));
  std::vector<LabelVector> labels(3, LabelVector(4));
  std::uniform_int_distribution<int> bit(0, 1);
  for (auto& lv : labels)
    for (auto& b : lv.present) b = static_cast<std::uint8_t>(bit(rng));
  labels[1].evaluate[2] = 0;
  ClassWeights cw = class_weights({40.0, 30.0, 20.0, 10.0});
  auto fn = [&]() { return multilabel_loss(sigmoid(z), labels, &cw); };
  CHECK(gradcheck(fn, {z}) < 1e-6);
}

TEST_CASE("loss is equivariant under permuting the batch") {
  Rng rng(37);
  Tensor pt = random_tensor({4, 3}, rng, 0.4);
  for (auto& v : pt.vec()) v = 0.5 + v;  // keep inside (0,1)
  std::vector<LabelVector> labels(4, LabelVector(3));
  std::uniform_int_distribution<int> bit(0, 1);
  for (auto& lv : labels)
    for (auto& b : lv.present) b = static_cast<std::uint8_t>(bit(rng));

  Var a = multilabel_loss(make_const(pt), labels);

  std::vector<std::size_t> perm = {2, 0, 3, 1};
  Tensor pt2({4, 3});
  std::vector<LabelVector> labels2(4);
  for (std::size_t s = 0; s < 4; ++s) {
    labels2[s] = labels[perm[s]];
    for (std::size_t c = 0; c < 3; ++c) pt2[s * 3 + c] = pt[perm[s] * 3 + c];
  }
  Var b = multilabel_loss(make_const(pt2), labels2);
  CHECK(a->value[0] == doctest::Approx(b->value[0]).epsilon(1e-12));
}

TEST_CASE("learning rate schedule values") {
  TrainConfig cfg;
  cfg.lr0 = 0.05;
  cfg.decay = 0.001;
  CHECK(lr_at(0, cfg) == 0.05);
  CHECK(lr_at(1000, cfg) == doctest::Approx(0.025).epsilon(1e-12));
  cfg.decay = 0.000125;
  CHECK(lr_at(60000, cfg) == doctest::Approx(0.05 / 8.5).epsilon(1e-12));
}

TEST_CASE("learning rate is non-increasing") {
  TrainConfig cfg;
  double prev = lr_at(0, cfg);
  for (std::size_t n = 1; n < 2000; n += 37) {
    double lr = lr_at(n, cfg);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("sgd with zero momentum and l2 is plain gradient descent") {
  Tensor p({2}, {1.0, -2.0});
  Tensor g({2}, {0.5, -1.0});
  Tensor v = Tensor::zeros({2});
  sgd_momentum_step(p, g, v, 0.1, 0.0, 0.0);
  CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-12));
}

TEST_CASE("two momentum steps accumulate velocity") {
  Tensor p({1}, {0.0});
  Tensor g({1}, {1.0});
  Tensor v = Tensor::zeros({1});
  sgd_momentum_step(p, g, v, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-12));
  sgd_momentum_step(p, g, v, 0.1, 0.9, 0.0);
  // v = 0.9*1 + 1 = 1.9; p = -0.1 - 0.19
  CHECK(p[0] == doctest::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("l2 term adds weight decay to the gradient") {
  Tensor p({1}, {2.0});
  Tensor g({1}, {0.0});
  Tensor v = Tensor::zeros({1});
  sgd_momentum_step(p, g, v, 0.1, 0.0, 0.5);
  // g' = 0 + 0.5*2 = 1 => p = 2 - 0.1
  CHECK(p[0] == doctest::Approx(1.9).epsilon(1e-12));
}

TEST_CASE("momentum sgd minimizes a quadratic bowl") {
  // f(x) = 0.5 * x^T diag(1, 10) x
  Tensor p({2}, {5.0, -3.0});
  Tensor v = Tensor::zeros({2});
  for (int it = 0; it < 300; ++it) {
    Tensor g({2}, {p[0], 10.0 * p[1]});
    sgd_momentum_step(p, g, v, 0.02, 0.9, 0.0);
  }
  CHECK(std::abs(p[0]) < 1e-3);
  CHECK(std::abs(p[1]) < 1e-3);
}

TEST_CASE("sgd rejects mismatched shapes") {
  Tensor p({2});
  Tensor g({3});
  Tensor v = Tensor::zeros({2});
  CHECK_THROWS_AS(sgd_momentum_step(p, g, v, 0.1, 0.9, 0.0), std::invalid_argument);
}
