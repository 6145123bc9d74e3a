// SPDX-License-Identifier: Apache-2.0
#include "desksr/lm.hpp"

#include <algorithm>
#include <numeric>

#include "desksr/error.hpp"
#include "desksr/rng.hpp"

namespace desksr::lm {
namespace {

constexpr std::uint64_t kLmShuffleStream = 0x4c4d53ULL;

void check_labels(const CharLm& lm, std::span<const int> labels) {
  for (int l : labels) {
    if (!lm.alphabet.contains(l)) {
      throw DataError("language model: label " + std::to_string(l) + " is out of vocabulary");
    }
  }
}

Eigen::VectorXd one_hot(Eigen::Index size, int index) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  v(index) = 1.0;
  return v;
}

// Inputs: start marker then every label. Targets: every label then end.
struct TeacherForced {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> targets;
};

TeacherForced teacher_forced(const CharLm& lm, std::span<const int> labels) {
  TeacherForced tf;
  const Eigen::Index width = lm.vocab() + 1;
  tf.inputs.push_back(one_hot(width, 0));
  for (int l : labels) {
    tf.inputs.push_back(one_hot(width, l));
    tf.targets.push_back(l);
  }
  tf.targets.push_back(0);
  return tf;
}

struct LmForward {
  nn::SequenceOutput seq;
  Eigen::MatrixXd log_probs;
};

LmForward run(const CharLm& lm, const TeacherForced& tf) {
  LmForward out;
  out.seq = nn::lstm_sequence_forward(lm.cell, tf.inputs, false);
  Eigen::MatrixXd logits(static_cast<Eigen::Index>(tf.inputs.size()), lm.vocab() + 1);
  for (std::size_t t = 0; t < tf.inputs.size(); ++t) {
    logits.row(static_cast<Eigen::Index>(t)) = (lm.w_out * out.seq.hs[t] + lm.b_out).transpose();
  }
  out.log_probs = nn::log_softmax(logits);
  return out;
}

}  // namespace

CharLm CharLm::zeros(const ctc::Alphabet& alphabet, int hidden) {
  if (alphabet.size() == 0 || hidden < 1) throw InvalidArgument("CharLm needs a non-empty alphabet and hidden >= 1");
  CharLm lm;
  lm.alphabet = alphabet;
  const auto width = static_cast<Eigen::Index>(alphabet.size()) + 1;
  lm.cell = nn::LstmParams::zeros(width, hidden);
  lm.w_out = Eigen::MatrixXd::Zero(width, hidden);
  lm.b_out = Eigen::VectorXd::Zero(width);
  return lm;
}

CharLm init_lm(const ctc::Alphabet& alphabet, int hidden, std::uint64_t seed) {
  CharLm lm = CharLm::zeros(alphabet, hidden);
  Rng rng(seed);
  lm.for_each_tensor([&](const std::string& name, auto& t) {
    if (name.find(".b_") != std::string::npos) return;
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-0.1, 0.1);
  });
  lm.cell.b_f.setOnes();
  return lm;
}

Eigen::MatrixXd lm_log_probs(const CharLm& lm, std::span<const int> labels) {
  check_labels(lm, labels);
  return run(lm, teacher_forced(lm, labels)).log_probs;
}

double lm_score(const CharLm& lm, std::span<const int> labels) {
  check_labels(lm, labels);
  const auto tf = teacher_forced(lm, labels);
  const auto fwd = run(lm, tf);
  double score = 0.0;
  for (std::size_t t = 0; t < tf.targets.size(); ++t) {
    score += fwd.log_probs(static_cast<Eigen::Index>(t), tf.targets[t]);
  }
  return std::min(score, 0.0);
}

LmTrainResult lm_train(std::span<const ctc::LabelSequence> corpus, const ctc::Alphabet& alphabet,
                       int hidden, const train::TrainConfig& config,
                       const std::function<void(int, double)>& on_epoch) {
  config.validate();
  if (corpus.empty()) throw DataError("lm_train: empty corpus");

  LmTrainResult result;
  result.lm = init_lm(alphabet, hidden, config.seed);
  for (const auto& seq : corpus) check_labels(result.lm, seq);

  auto& lm = result.lm;
  auto velocity = train::zeros_like(lm);
  Rng shuffle_rng = Rng::derive(config.seed, kLmShuffleStream, 0);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t symbols = 0;
    for (const std::size_t index : order) {
      const auto tf = teacher_forced(lm, corpus[index]);
      const auto fwd = run(lm, tf);

      CharLm grads = CharLm::zeros(alphabet, hidden);
      std::vector<Eigen::VectorXd> d_hs(tf.inputs.size());
      for (std::size_t t = 0; t < tf.targets.size(); ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        loss_sum -= fwd.log_probs(row, tf.targets[t]);
        Eigen::VectorXd d_logits = fwd.log_probs.row(row).transpose().array().exp();
        d_logits(tf.targets[t]) -= 1.0;
        grads.w_out.noalias() += d_logits * fwd.seq.hs[t].transpose();
        grads.b_out += d_logits;
        d_hs[t] = lm.w_out.transpose() * d_logits;
      }
      symbols += tf.targets.size();
      nn::lstm_sequence_backward(lm.cell, fwd.seq, d_hs, grads.cell);

      const double norm = train::clip_gradients(grads, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("lm_train diverged in epoch " + std::to_string(epoch + 1));
      }
      train::sgd_step(lm, grads, velocity, config.learning_rate, config.momentum);
    }
    const double mean = loss_sum / static_cast<double>(symbols);
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

std::vector<decode::Hypothesis> rescore(std::vector<decode::Hypothesis> hyps, const CharLm& lm,
                                        double weight) {
  if (!(weight >= 0.0)) throw InvalidArgument("rescore: LM weight must be >= 0");
  for (auto& h : hyps) {
    const double score = lm_score(lm, h.transcript);
    h.log_p_lm = score;
    h.combined = weight == 0.0 ? h.log_p_acoustic : h.log_p_acoustic + weight * score;
  }
  std::stable_sort(hyps.begin(), hyps.end(), [](const decode::Hypothesis& a, const decode::Hypothesis& b) {
    return a.combined > b.combined;
  });
  return hyps;
}

}  // namespace desksr::lm
