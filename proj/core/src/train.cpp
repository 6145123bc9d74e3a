// SPDX-License-Identifier: Apache-2.0
#include "desksr/train.hpp"

#include <chrono>
#include <numeric>

#include "desksr/decode.hpp"

namespace desksr::train {
namespace {

// Stream tags keep shuffling and per-utterance draws independent.
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("train config: " + what); };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(clip_norm > 0.0)) fail("clip_norm must be > 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (!(weight_noise_std >= 0.0)) fail("weight_noise_std must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
}

nn::DropoutMasks make_dropout_masks(std::span<const Eigen::Index> sizes, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout p must be in [0, 1)");
  nn::DropoutMasks masks;
  masks.reserve(sizes.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (const Eigen::Index n : sizes) {
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
    if (p > 0.0) {
      for (Eigen::Index k = 0; k < n; ++k) mask(k) = rng.uniform() < p ? 0.0 : keep_scale;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

nn::DropoutMasks make_dropout_masks(const nn::ModelSizes& sizes, double p, Rng& rng) {
  const std::vector<Eigen::Index> widths(static_cast<std::size_t>(sizes.layers), 2 * sizes.hidden);
  return make_dropout_masks(widths, p, rng);
}

double greedy_cer(const nn::ModelParams& model, std::span<const TrainingExample> data) {
  std::size_t errors = 0;
  std::size_t total = 0;
  for (const auto& ex : data) {
    const auto fwd = nn::forward_full(model, ex.features);
    const auto hyp = decode::greedy_decode(fwd.log_probs);
    errors += decode::edit_distance<int>(ex.labels, hyp.transcript);
    total += ex.labels.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total);
}

TrainResult train_acoustic(nn::ModelParams model, std::span<const TrainingExample> data,
                           const TrainConfig& config,
                           const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  if (data.empty()) throw DataError("train_acoustic: empty dataset");
  const auto sizes = model.sizes();
  for (const auto& ex : data) {
    if (ex.features.cols() != sizes.input) {
      throw DataError("utterance '" + ex.id + "' has feature dimension " +
                      std::to_string(ex.features.cols()) + ", model expects " +
                      std::to_string(sizes.input));
    }
    if (static_cast<std::size_t>(ex.features.rows()) < ctc::min_frames(ex.labels)) {
      throw DataError("utterance '" + ex.id + "' is infeasible for CTC: " +
                      std::to_string(ex.features.rows()) + " frames for a target needing " +
                      std::to_string(ctc::min_frames(ex.labels)));
    }
  }

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  auto velocity = zeros_like(model);
  Rng shuffle_rng = Rng::derive(config.seed, kShuffleStream, 0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (const std::size_t index : order) {
      const auto& ex = data[index];
      Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(epoch) + 1, index);

      // Gradients are taken at the noisy point and applied to the clean weights.
      const auto noisy = apply_weight_noise(model, config.weight_noise_std, rng);
      const auto masks = make_dropout_masks(sizes, config.dropout_p, rng);
      const auto fwd = nn::forward_full(noisy, ex.features, masks);
      const auto ctc = ctc::ctc_loss(fwd.log_probs, ex.labels);
      if (!std::isfinite(ctc.loss)) {
        throw NumericError("training diverged: loss " + std::to_string(ctc.loss) + " on utterance '" +
                           ex.id + "' in epoch " + std::to_string(epoch + 1));
      }
      auto grads = nn::backward_full(noisy, fwd.cache, ctc.d_logits);
      const double norm = clip_gradients(grads.params, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("training diverged: non-finite gradient on utterance '" + ex.id +
                           "' in epoch " + std::to_string(epoch + 1));
      }
      sgd_step(model, grads.params, velocity, config.learning_rate, config.momentum);
      loss_sum += ctc.loss;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.mean_loss = loss_sum / static_cast<double>(data.size());
    stats.cer = greedy_cer(model, data);
    result.report.epoch_loss.push_back(stats.mean_loss);
    result.report.epoch_cer.push_back(stats.cer);
    if (on_epoch) on_epoch(stats);
  }

  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.model = std::move(model);
  return result;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const nn::ModelParams& model, const TrainingExample& example, double step) {
  const std::size_t count = model.parameter_count();
  if (count == 0) throw InvalidArgument("grad_check: model has no parameters");
  if (count > 50000) {
    throw InvalidArgument("grad_check: " + std::to_string(count) +
                          " parameters exceeds the 5e4 limit");
  }
  if (!(step > 0.0)) throw InvalidArgument("grad_check: step must be > 0");

  auto loss_at = [&](const nn::ModelParams& m) {
    return ctc::ctc_loss(nn::forward_full(m, example.features).log_probs, example.labels).loss;
  };

  const auto fwd = nn::forward_full(model, example.features);
  const auto ctc = ctc::ctc_loss(fwd.log_probs, example.labels);
  const auto grads = nn::backward_full(model, fwd.cache, ctc.d_logits);

  GradCheckResult result;
  nn::ModelParams probe = model;
  auto probe_tensors = nn::tensor_spans(probe);
  const auto analytic_tensors = nn::tensor_spans(grads.params);
  std::vector<std::string> names;
  model.for_each_tensor([&](const std::string& name, const auto&) { names.push_back(name); });

  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    for (std::size_t j = 0; j < probe_tensors[k].size(); ++j) {
      double& w = probe_tensors[k][j];
      const double saved = w;
      w = saved + step;
      const double plus = loss_at(probe);
      w = saved - step;
      const double minus = loss_at(probe);
      w = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = analytic_tensors[k][j];
      const double err = relative_error(analytic, numeric);
      ++result.checked;
      if (err > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = err;
        result.worst_tensor = names[k];
        result.worst_index = j;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace desksr::train
