// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desksr/ctc.hpp"
#include "desksr/decode.hpp"
#include "desksr/nn.hpp"
#include "desksr/train.hpp"

namespace desksr::lm {

/// Character LSTM language model over an alphabet of K symbols.
///
/// Inputs are one-hot over K + 1 (index 0 is the start marker, label k is
/// index k); outputs are a softmax over K + 1 (index 0 is the end marker).
struct CharLm {
  ctc::Alphabet alphabet;
  nn::LstmParams cell;
  Eigen::MatrixXd w_out;  // (K+1) x H
  Eigen::VectorXd b_out;  // K+1

  static CharLm zeros(const ctc::Alphabet& alphabet, int hidden);

  Eigen::Index vocab() const { return static_cast<Eigen::Index>(alphabet.size()); }
  Eigen::Index hidden_size() const { return cell.hidden_size(); }

  template <class F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self& m, F& f) {
    m.cell.for_each_tensor([&](const std::string& name, auto& t) { f("cell." + name, t); });
    f("out.w_out", m.w_out);
    f("out.b_out", m.b_out);
  }
};

/// Same initialization scheme as the acoustic model.
CharLm init_lm(const ctc::Alphabet& alphabet, int hidden, std::uint64_t seed);

/// Per-step next-symbol log distributions for a teacher-forced pass:
/// (n + 1) x (K + 1), row i conditioned on the start marker and labels < i.
Eigen::MatrixXd lm_log_probs(const CharLm& lm, std::span<const int> labels);

/// sum_i log P(label_i | labels_<i) + log P(end | labels). Throws DataError
/// on a label outside the vocabulary.
double lm_score(const CharLm& lm, std::span<const int> labels);

struct LmTrainResult {
  CharLm lm;
  /// Mean per-symbol cross-entropy (nats) of each epoch, end marker included.
  std::vector<double> epoch_loss;
};

/// Teacher-forced cross-entropy training with the shared SGD/clip helpers.
/// Only learning_rate, momentum, clip_norm, epochs, seed and shuffle are used.
LmTrainResult lm_train(std::span<const ctc::LabelSequence> corpus, const ctc::Alphabet& alphabet,
                       int hidden, const train::TrainConfig& config,
                       const std::function<void(int, double)>& on_epoch = {});

/// combined = log_p_acoustic + weight * lm_score, then a stable descending
/// sort on combined.
std::vector<decode::Hypothesis> rescore(std::vector<decode::Hypothesis> hyps, const CharLm& lm,
                                        double weight);

}  // namespace desksr::lm
