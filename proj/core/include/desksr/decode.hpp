// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "desksr/ctc.hpp"

namespace desksr::decode {

struct Hypothesis {
  ctc::LabelSequence transcript;
  /// Natural log. Greedy reports the best single path; beam search the summed
  /// prefix probability. The two are not comparable.
  double log_p_acoustic = 0.0;
  std::optional<double> log_p_lm;
  double combined = 0.0;
};

/// Collapse of the per-frame argmax path.
Hypothesis greedy_decode(const Eigen::MatrixXd& log_probs);

/// CTC prefix beam search. Keeps the beam_width most probable collapsed
/// prefixes after every frame and returns up to n_best of them, best first.
std::vector<Hypothesis> beam_search(const Eigen::MatrixXd& log_probs, std::size_t beam_width,
                                    std::size_t n_best);

/// Descending by combined (or combined / max(1, length) when normalizing);
/// ties go to the lexicographically smaller transcript.
std::vector<Hypothesis> sort_nbest(std::vector<Hypothesis> hyps, bool length_normalize = false);

/// Levenshtein distance with unit costs.
template <class T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t edit_distance(std::string_view a, std::string_view b);

/// Whitespace-separated tokens.
std::vector<std::string> split_words(std::string_view text);

/// Edit distance over characters / reference length. Throws DataError on an
/// empty reference.
double cer(std::string_view reference, std::string_view hypothesis);
/// Edit distance over words / reference word count.
double wer(std::string_view reference, std::string_view hypothesis);

/// Running totals for corpus-level rates.
struct ErrorCounts {
  std::size_t char_errors = 0;
  std::size_t char_total = 0;
  std::size_t word_errors = 0;
  std::size_t word_total = 0;

  void add(std::string_view reference, std::string_view hypothesis);
  double cer() const;
  double wer() const;
};

}  // namespace desksr::decode
