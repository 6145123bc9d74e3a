// SPDX-License-Identifier: Apache-2.0
#include "desksr/train.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace desksr::train {
namespace {

using nn::ModelParams;
using nn::ModelSizes;

// Minimal parameter pack for exercising the generic helpers.
struct Pack {
  Eigen::VectorXd a;
  Eigen::MatrixXd b;

  template <class F>
  void for_each_tensor(F&& f) { f("a", a); f("b", b); }
  template <class F>
  void for_each_tensor(F&& f) const { f("a", a); f("b", b); }
};

Pack pack(std::initializer_list<double> a, double fill_b = 0.0) {
  Pack p;
  p.a = Eigen::VectorXd(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (double v : a) p.a(i++) = v;
  p.b = Eigen::MatrixXd::Constant(2, 2, fill_b);
  return p;
}

bool identical(const ModelParams& x, const ModelParams& y) {
  const auto a = nn::tensor_spans(x);
  const auto b = nn::tensor_spans(y);
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::equal(a[k].begin(), a[k].end(), b[k].begin(), b[k].end())) return false;
  }
  return true;
}

TrainingExample random_example(const std::string& id, Eigen::Index frames, Eigen::Index dim,
                               ctc::LabelSequence labels, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return {id, testing::random_matrix(frames, dim, scale, rng), std::move(labels)};
}

TEST(TrainConfigTest, ValidatesRanges) {
  TrainConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto bad = [&](auto mutate) {
    TrainConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), InvalidArgument);
  };
  bad([](TrainConfig& c) { c.epochs = 0; });
  bad([](TrainConfig& c) { c.momentum = 1.0; });
  bad([](TrainConfig& c) { c.clip_norm = 0.0; });
  bad([](TrainConfig& c) { c.dropout_p = 1.0; });
  bad([](TrainConfig& c) { c.weight_noise_std = -0.1; });
  bad([](TrainConfig& c) { c.learning_rate = -1.0; });
}

TEST(WeightNoiseTest, ZeroStdIsExactCopy) {
  const auto model = nn::init_params({1, 3, 2, 2}, 1);
  Rng rng(1);
  EXPECT_TRUE(identical(apply_weight_noise(model, 0.0, rng), model));
  EXPECT_THROW(apply_weight_noise(model, -1.0, rng), InvalidArgument);
}

TEST(WeightNoiseTest, SampleMomentsMatch) {
  const Pack clean = pack({0.3});
  Rng rng(2);
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = apply_weight_noise(clean, 0.1, rng).a(0);
    sum += w;
    sq += w * w;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.3, 4 * 0.1 / std::sqrt(n));
  EXPECT_NEAR(sd, 0.1, 0.005);
  EXPECT_EQ(clean.a(0), 0.3);
}

TEST(WeightNoiseTest, DifferentStreamsDiffer) {
  const auto model = nn::init_params({1, 3, 2, 2}, 1);
  Rng r1(1), r2(2);
  EXPECT_FALSE(identical(apply_weight_noise(model, 0.01, r1), apply_weight_noise(model, 0.01, r2)));
}

TEST(DropoutMaskTest, ZeroRateGivesOnes) {
  Rng rng(3);
  const auto masks = make_dropout_masks(ModelSizes{3, 4, 2, 2}, 0.0, rng);
  ASSERT_EQ(masks.size(), 3u);
  for (const auto& m : masks) {
    EXPECT_EQ(m.size(), 8);
    EXPECT_TRUE((m.array() == 1.0).all());
  }
}

TEST(DropoutMaskTest, KeepFractionAndValues) {
  Rng rng(4);
  const std::vector<Eigen::Index> sizes{100000};
  const auto masks = make_dropout_masks(sizes, 0.5, rng);
  const auto& m = masks.at(0);
  const auto kept = (m.array() != 0.0).count();
  EXPECT_GE(kept, 49000);
  EXPECT_LE(kept, 51000);
  EXPECT_TRUE((m.array() == 0.0 || m.array() == 2.0).all());
  // A mask is fixed per sequence: applying it twice is applying m * m once.
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(m.size(), -1.0, 1.0);
  const Eigen::VectorXd twice = m.cwiseProduct(m.cwiseProduct(x));
  EXPECT_TRUE(twice.isApprox(m.cwiseProduct(m).cwiseProduct(x), 0.0));
  EXPECT_THROW(make_dropout_masks(sizes, 1.0, rng), InvalidArgument);
}

TEST(DropoutStructureTest, RecurrentPathIgnoresMaskWhenInputHeld) {
  const ModelSizes sizes{2, 4, 3, 3};
  const auto model = nn::init_params(sizes, 5);
  Rng rng(5);
  const auto x = testing::random_matrix(7, 3, 1.0, rng);

  // Masks that differ only at the top boundary leave every layer's input,
  // and so every recurrent trajectory, untouched.
  nn::DropoutMasks a(2, Eigen::VectorXd::Ones(8));
  nn::DropoutMasks b = a;
  b[1] << 0, 2, 0, 2, 2, 0, 2, 0;
  const auto fa = nn::forward_full(model, x, a);
  const auto fb = nn::forward_full(model, x, b);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t t = 0; t < 7; ++t) {
      EXPECT_EQ(fa.cache.inputs[l][t], fb.cache.inputs[l][t]);
      EXPECT_EQ(fa.cache.layers[l].fwd.hs[t], fb.cache.layers[l].fwd.hs[t]);
      EXPECT_EQ(fa.cache.layers[l].bwd.hs[t], fb.cache.layers[l].bwd.hs[t]);
      EXPECT_EQ(fa.cache.layers[l].fwd.caches[t].c, fb.cache.layers[l].fwd.caches[t].c);
    }
  }
  EXPECT_NE(fa.logits, fb.logits);

  // A lower-boundary mask reaches the next layer only through its input.
  nn::DropoutMasks c = a;
  c[0] << 2, 0, 2, 0, 0, 2, 0, 2;
  const auto fc = nn::forward_full(model, x, c);
  for (std::size_t t = 0; t < 7; ++t) {
    Eigen::VectorXd concat(8);
    concat << fc.cache.layers[0].fwd.hs[t], fc.cache.layers[0].bwd.hs[t];
    EXPECT_EQ(fc.cache.inputs[1][t], c[0].cwiseProduct(concat));
    EXPECT_EQ(fc.cache.layers[0].fwd.hs[t], fa.cache.layers[0].fwd.hs[t]);
  }
  std::vector<Eigen::VectorXd> held(fc.cache.inputs[1].begin(), fc.cache.inputs[1].end());
  const auto rerun = nn::lstm_sequence_forward(model.layers[1].fwd, held, false);
  for (std::size_t t = 0; t < 7; ++t) EXPECT_EQ(rerun.hs[t], fc.cache.layers[1].fwd.hs[t]);
}

TEST(ClipGradientsTest, BelowThresholdUnchanged) {
  Pack g = pack({0.6, 0.8});
  EXPECT_DOUBLE_EQ(clip_gradients(g, 5.0), 1.0);
  EXPECT_EQ(g.a(0), 0.6);
  EXPECT_EQ(g.a(1), 0.8);
}

TEST(ClipGradientsTest, AboveThresholdHalves) {
  Pack g = pack({6.0, 8.0});
  EXPECT_DOUBLE_EQ(clip_gradients(g, 5.0), 10.0);
  EXPECT_DOUBLE_EQ(g.a(0), 3.0);
  EXPECT_DOUBLE_EQ(g.a(1), 4.0);
  EXPECT_NEAR(global_norm(g), 5.0, 1e-12);
}

TEST(ClipGradientsTest, ZeroUnchangedAndBadThreshold) {
  Pack g = pack({0.0, 0.0});
  EXPECT_EQ(clip_gradients(g, 5.0), 0.0);
  EXPECT_TRUE((g.a.array() == 0.0).all());
  EXPECT_THROW(clip_gradients(g, 0.0), InvalidArgument);
}

TEST(ClipGradientsTest, PreservesDirection) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Pack g;
    g.a = testing::random_matrix(50, 1, 10.0, rng);
    g.b = testing::random_matrix(4, 4, 10.0, rng);
    const Pack before = g;
    clip_gradients(g, 1.0);
    double dot = 0.0;
    const auto x = nn::tensor_spans(before);
    const auto y = nn::tensor_spans(g);
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (std::size_t j = 0; j < x[k].size(); ++j) dot += x[k][j] * y[k][j];
    }
    EXPECT_NEAR(dot / (global_norm(before) * global_norm(g)), 1.0, 1e-12);
    EXPECT_NEAR(global_norm(g), 1.0, 1e-12);
  }
}

TEST(SgdStepTest, ZeroRateAndPlainStep) {
  Pack w = pack({1.0, -2.0}, 0.5);
  const Pack g = pack({0.5, 0.25}, 1.0);
  Pack v = zeros_like(w);
  sgd_step(w, g, v, 0.0, 0.9);
  EXPECT_EQ(w.a(0), 1.0);
  EXPECT_EQ(w.b(0, 0), 0.5);
  sgd_step(w, g, v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(w.a(0), 0.95);
  EXPECT_DOUBLE_EQ(w.a(1), -2.025);
  EXPECT_DOUBLE_EQ(w.b(1, 1), 0.4);
}

TEST(SgdStepTest, MomentumConvergesOnQuadratic) {
  Pack w = pack({1.0});
  Pack v = zeros_like(w);
  // Independent recurrence for the same loss 0.5 w^2.
  double rw = 1.0, rv = 0.0;
  int steps = 0;
  for (; steps < 200 && std::abs(w.a(0)) >= 1e-3; ++steps) {
    Pack g = w;  // dL/dw = w
    sgd_step(w, g, v, 0.1, 0.9);
    rv = 0.9 * rv - 0.1 * rw;
    rw += rv;
    EXPECT_DOUBLE_EQ(w.a(0), rw);
  }
  EXPECT_LT(std::abs(w.a(0)), 1e-3);
  EXPECT_LT(steps, 200);
}

TEST(SgdStepTest, ShapeMismatchThrows) {
  Pack w = pack({1.0, 2.0});
  Pack g = pack({1.0});
  Pack v = zeros_like(w);
  EXPECT_THROW(sgd_step(w, g, v, 0.1, 0.9), InvalidArgument);
}

TEST(TrainAcousticTest, SingleUtteranceLossDecreases) {
  const ModelSizes sizes{2, 32, 6, 3};
  const std::vector<TrainingExample> data{random_example("u0", 20, 6, {1, 2, 3, 1}, 7)};
  TrainConfig config;
  config.epochs = 5;
  config.seed = 7;
  const auto result = train_acoustic(nn::init_params(sizes, 7), data, config);
  const auto& loss = result.report.epoch_loss;
  ASSERT_EQ(loss.size(), 5u);
  for (std::size_t e = 1; e < loss.size(); ++e) EXPECT_LT(loss[e], loss[e - 1]) << "epoch " << e + 1;
  for (double l : loss) EXPECT_TRUE(std::isfinite(l) && l >= 0.0);
  ASSERT_EQ(result.report.epoch_cer.size(), 5u);
  EXPECT_GE(result.report.wall_seconds, 0.0);
}

TEST(TrainAcousticTest, RunsAreBitIdentical) {
  const ModelSizes sizes{2, 6, 4, 3};
  std::vector<TrainingExample> data;
  for (int i = 0; i < 4; ++i) {
    data.push_back(random_example("u" + std::to_string(i), 9, 4, {1, 3}, 20 + static_cast<std::uint64_t>(i)));
  }
  TrainConfig config;
  config.epochs = 3;
  config.seed = 11;
  config.dropout_p = 0.3;
  config.weight_noise_std = 0.05;
  const auto a = train_acoustic(nn::init_params(sizes, 1), data, config);
  const auto b = train_acoustic(nn::init_params(sizes, 1), data, config);
  EXPECT_TRUE(identical(a.model, b.model));
  EXPECT_EQ(a.report.epoch_loss, b.report.epoch_loss);

  config.seed = 12;
  const auto c = train_acoustic(nn::init_params(sizes, 1), data, config);
  EXPECT_FALSE(identical(a.model, c.model));
}

TEST(TrainAcousticTest, NoiseMovesEvaluationPointOnly) {
  const ModelSizes sizes{1, 4, 3, 2};
  const auto init = nn::init_params(sizes, 3);
  const std::vector<TrainingExample> data{random_example("u0", 6, 3, {1, 2}, 3)};
  TrainConfig config;
  config.seed = 9;
  config.momentum = 0.0;
  config.learning_rate = 0.1;
  config.weight_noise_std = 0.05;
  const auto trained = train_acoustic(init, data, config).model;

  // Replay the single update by hand: gradient at the noisy point, step
  // from the clean weights.
  Rng rng = Rng::derive(9, 1, 0);
  const auto noisy = apply_weight_noise(init, 0.05, rng);
  const auto fwd = nn::forward_full(noisy, data[0].features);
  auto grads = nn::backward_full(noisy, fwd.cache, ctc::ctc_loss(fwd.log_probs, data[0].labels).d_logits);
  clip_gradients(grads.params, config.clip_norm);
  auto expected = init;
  auto velocity = zeros_like(init);
  sgd_step(expected, grads.params, velocity, 0.1, 0.0);
  EXPECT_TRUE(identical(trained, expected));

  config.weight_noise_std = 0.0;
  EXPECT_FALSE(identical(train_acoustic(init, data, config).model, trained));
}

TEST(TrainAcousticTest, RejectsBadInputs) {
  const auto model = nn::init_params({1, 3, 2, 3}, 1);
  TrainConfig config;
  const std::vector<TrainingExample> infeasible{random_example("short-one", 2, 2, {1, 1}, 1)};
  try {
    train_acoustic(model, infeasible, config);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short-one"), std::string::npos);
  }
  const std::vector<TrainingExample> wrong_dim{random_example("u", 5, 4, {1}, 1)};
  EXPECT_THROW(train_acoustic(model, wrong_dim, config), DataError);
  EXPECT_THROW(train_acoustic(model, {}, config), DataError);
  config.epochs = 0;
  const std::vector<TrainingExample> fine{random_example("u", 5, 2, {1}, 1)};
  EXPECT_THROW(train_acoustic(model, fine, config), InvalidArgument);
}

TEST(TrainAcousticTest, DivergenceIsReported) {
  auto model = nn::init_params({1, 3, 2, 3}, 1);
  model.b_y(0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<TrainingExample> data{random_example("u", 5, 2, {1}, 1)};
  EXPECT_THROW(train_acoustic(model, data, TrainConfig{}), NumericError);
}

TEST(GreedyCerTest, CountsLabelErrors) {
  ModelParams model = ModelParams::zeros({1, 2, 2, 2});
  // Zero recurrent weights; the output bias alone picks class 1 every frame.
  model.b_y << 0.0, 5.0, 0.0;
  const std::vector<TrainingExample> data{{"a", Eigen::MatrixXd::Zero(4, 2), {1}},
                                          {"b", Eigen::MatrixXd::Zero(4, 2), {2, 1, 2}}};
  // "a" decodes to [1]: 0 errors; "b" decodes to [1]: 2 errors.
  EXPECT_DOUBLE_EQ(greedy_cer(model, data), 2.0 / 4.0);
}

TEST(GradCheckTest, SmallModelAgrees) {
  // At the +-0.1 training init many gradients sit near 1e-8, where a
  // central difference of step 1e-5 is dominated by loss roundoff.
  const auto model = nn::init_params({2, 5, 4, 3}, 0, 1.0);
  const auto ex = random_example("g", 6, 4, {1, 2, 3}, 0, 2.0);
  const auto r = grad_check(model, ex, 1e-5);
  EXPECT_EQ(r.checked, model.parameter_count());
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst_tensor << "[" << r.worst_index << "]";
}

TEST(GradCheckTest, CoarseStepIsWorse) {
  const auto model = nn::init_params({1, 3, 3, 2}, 1);
  const auto ex = random_example("g", 5, 3, {1, 2}, 1);
  EXPECT_GT(grad_check(model, ex, 1e-1).max_relative_error, grad_check(model, ex, 1e-5).max_relative_error);
}

TEST(GradCheckTest, RejectsDegenerateModels) {
  const auto ex = random_example("g", 5, 3, {1}, 1);
  ModelParams empty;
  EXPECT_THROW(grad_check(empty, ex, 1e-5), InvalidArgument);
  EXPECT_THROW(grad_check(nn::init_params({1, 3, 3, 2}, 1), ex, 0.0), InvalidArgument);
  EXPECT_THROW(grad_check(nn::init_params({2, 60, 3, 2}, 1), ex, 1e-5), InvalidArgument);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-10), 1e-2);
}

}  // namespace
}  // namespace desksr::train
