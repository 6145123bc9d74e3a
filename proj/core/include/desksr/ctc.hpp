// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace desksr::ctc {

/// Output class 0 is the CTC blank; symbol i of the alphabet is class i + 1.
inline constexpr int kBlank = 0;

/// Target transcript as output-class indices in [1, K]. Never contains kBlank.
using LabelSequence = std::vector<int>;

/// Ordered label inventory. Space is an ordinary symbol; blank is implicit.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> symbols);

  /// One symbol per character of `chars`, e.g. "ABC ".
  static Alphabet from_chars(std::string_view chars);
  /// A-Z followed by space (K = 27).
  static Alphabet english();

  /// Reads one symbol per line. A first line starting with '#' is a comment;
  /// the line "<space>" stands for " ".
  static Alphabet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return symbols_.size(); }
  /// Number of network outputs: symbols plus blank.
  std::size_t output_dim() const { return symbols_.size() + 1; }
  const std::vector<std::string>& symbols() const { return symbols_; }

  /// Symbol text for a class index in [1, K].
  const std::string& symbol(int label) const;
  /// Class index of a symbol; throws DataError if unknown.
  int label_of(std::string_view symbol) const;
  bool contains(int label) const { return label >= 1 && label <= static_cast<int>(size()); }

  /// Greedy longest-match tokenization of text into labels.
  LabelSequence encode(std::string_view text) const;
  std::string decode(std::span<const int> labels) const;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  std::vector<std::string> symbols_;
  std::size_t longest_ = 0;
};

/// Merge maximal runs of identical symbols (blanks included).
std::vector<int> merge_repeats(std::span<const int> path);
/// Drop every blank.
std::vector<int> remove_blanks(std::span<const int> path);
/// merge_repeats then remove_blanks.
LabelSequence collapse(std::span<const int> path);

/// (_, y1, _, y2, ..., yL, _), length 2L + 1.
std::vector<int> expand_target(std::span<const int> labels);

/// Minimum frames a target needs: L plus one per adjacent repeat.
std::size_t min_frames(std::span<const int> labels);

struct CtcResult {
  double loss = 0.0;
  /// Gradient of the loss with respect to the pre-softmax logits, T x C.
  Eigen::MatrixXd d_logits;
};

/// Negative log-likelihood of `labels` under per-frame log-softmax outputs,
/// by log-space forward-backward. Throws DataError when the target needs more
/// frames than available.
CtcResult ctc_loss(const Eigen::MatrixXd& log_probs, std::span<const int> labels);

/// Same loss by summing over all C^T frame paths. Only for T <= 8, K <= 4.
double ctc_loss_bruteforce(const Eigen::MatrixXd& probs, std::span<const int> labels);

/// log(exp(a) + exp(b)) that is exact when either side is -inf.
double log_add(double a, double b);

}  // namespace desksr::ctc
