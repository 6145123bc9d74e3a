// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desksr/ctc.hpp"
#include "desksr/error.hpp"
#include "desksr/nn.hpp"
#include "desksr/rng.hpp"

namespace desksr::train {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double clip_norm = 5.0;
  double dropout_p = 0.0;
  double weight_noise_std = 0.0;
  int epochs = 1;
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Per-epoch statistics. CER is measured with greedy decoding on clean
/// weights after the epoch's updates.
struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_cer;
  double wall_seconds = 0.0;
};

struct TrainingExample {
  std::string id;
  Eigen::MatrixXd features;  // T x F
  ctc::LabelSequence labels;
};

/// Copy of `params` with N(0, std^2) added to every weight.
template <class P>
P apply_weight_noise(const P& params, double std, Rng& rng) {
  if (std < 0.0) throw InvalidArgument("weight noise std must be >= 0");
  P noisy = params;
  if (std == 0.0) return noisy;
  for (auto tensor : nn::tensor_spans(noisy)) {
    for (double& w : tensor) w += std * rng.normal();
  }
  return noisy;
}

/// One mask per entry of `sizes`; entries are 0 or 1/(1-p), kept with
/// probability 1 - p.
nn::DropoutMasks make_dropout_masks(std::span<const Eigen::Index> sizes, double p, Rng& rng);

/// Masks for every layer boundary of a model (L masks of size 2H).
nn::DropoutMasks make_dropout_masks(const nn::ModelSizes& sizes, double p, Rng& rng);

template <class P>
double global_norm(const P& grads) {
  double sq = 0.0;
  for (auto tensor : nn::tensor_spans(grads)) {
    for (double g : tensor) sq += g * g;
  }
  return std::sqrt(sq);
}

/// Rescales all gradients by clip_norm / g when the global L2 norm g exceeds
/// clip_norm. Returns the norm before clipping.
template <class P>
double clip_gradients(P& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip_norm must be > 0");
  const double norm = global_norm(grads);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto tensor : nn::tensor_spans(grads)) {
      for (double& g : tensor) g *= scale;
    }
  }
  return norm;
}

/// v <- momentum * v - lr * g;  w <- w + v.
template <class P>
void sgd_step(P& params, const P& grads, P& velocity, double learning_rate, double momentum) {
  auto w = nn::tensor_spans(params);
  const auto g = nn::tensor_spans(grads);
  auto v = nn::tensor_spans(velocity);
  if (w.size() != g.size() || w.size() != v.size()) throw InvalidArgument("sgd_step: tensor count mismatch");
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k].size() != g[k].size() || w[k].size() != v[k].size()) {
      throw InvalidArgument("sgd_step: tensor " + std::to_string(k) + " shape mismatch");
    }
    for (std::size_t j = 0; j < w[k].size(); ++j) {
      v[k][j] = momentum * v[k][j] - learning_rate * g[k][j];
      w[k][j] += v[k][j];
    }
  }
}

/// Same structure as `params`, every entry zero.
template <class P>
P zeros_like(const P& params) {
  P z = params;
  for (auto tensor : nn::tensor_spans(z)) std::fill(tensor.begin(), tensor.end(), 0.0);
  return z;
}

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double cer = 0.0;
};

struct TrainResult {
  nn::ModelParams model;
  TrainReport report;
};

/// Per-utterance SGD with CTC loss: optional weight noise, fresh dropout
/// masks, forward, loss, backward, clip, update on the clean weights.
TrainResult train_acoustic(nn::ModelParams model, std::span<const TrainingExample> data,
                           const TrainConfig& config,
                           const std::function<void(const EpochStats&)>& on_epoch = {});

/// Corpus CER of greedy decoding (label-level edit distance).
double greedy_cer(const nn::ModelParams& model, std::span<const TrainingExample> data);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

/// Central finite differences of the CTC loss against backward_full for
/// every parameter. Rejects models with no or more than 5e4 parameters.
GradCheckResult grad_check(const nn::ModelParams& model, const TrainingExample& example, double step);

}  // namespace desksr::train
