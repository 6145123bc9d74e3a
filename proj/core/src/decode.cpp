// SPDX-License-Identifier: Apache-2.0
#include "desksr/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "desksr/error.hpp"

namespace desksr::decode {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct PrefixScore {
  double blank = kNegInf;      // paths ending in blank
  double non_blank = kNegInf;  // paths ending in the prefix's last label

  double total() const { return ctc::log_add(blank, non_blank); }
};

using Beam = std::map<ctc::LabelSequence, PrefixScore>;

void check_rows(const Eigen::MatrixXd& log_probs) {
  if (log_probs.cols() < 1) throw InvalidArgument("decode: log_probs has no classes");
}

}  // namespace

Hypothesis greedy_decode(const Eigen::MatrixXd& log_probs) {
  check_rows(log_probs);
  std::vector<int> path(static_cast<std::size_t>(log_probs.rows()));
  double score = 0.0;
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    Eigen::Index best = 0;
    score += log_probs.row(t).maxCoeff(&best);
    path[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  Hypothesis h;
  h.transcript = ctc::collapse(path);
  h.log_p_acoustic = score;
  h.combined = score;
  return h;
}

std::vector<Hypothesis> beam_search(const Eigen::MatrixXd& log_probs, std::size_t beam_width,
                                    std::size_t n_best) {
  check_rows(log_probs);
  if (beam_width < 1 || n_best < 1) throw InvalidArgument("beam_search: beam_width and n_best must be >= 1");

  Beam beam;
  beam[{}].blank = 0.0;

  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    Beam next;
    for (const auto& [prefix, score] : beam) {
      const double total = score.total();
      // Blank keeps the prefix.
      {
        auto& entry = next[prefix];
        entry.blank = ctc::log_add(entry.blank, total + log_probs(t, ctc::kBlank));
      }
      for (Eigen::Index k = 1; k < log_probs.cols(); ++k) {
        const double p = log_probs(t, k);
        const int label = static_cast<int>(k);
        if (!prefix.empty() && prefix.back() == label) {
          // Repeat without an intervening blank stays on the same prefix;
          // after a blank it starts a new copy of the label.
          auto& same = next[prefix];
          same.non_blank = ctc::log_add(same.non_blank, score.non_blank + p);
          auto extended = prefix;
          extended.push_back(label);
          auto& grown = next[extended];
          grown.non_blank = ctc::log_add(grown.non_blank, score.blank + p);
        } else {
          auto extended = prefix;
          extended.push_back(label);
          auto& grown = next[extended];
          grown.non_blank = ctc::log_add(grown.non_blank, total + p);
        }
      }
    }

    std::vector<std::pair<ctc::LabelSequence, PrefixScore>> ranked;
    for (auto& entry : next) {
      // Zero-probability prefixes are unreachable, not candidates.
      if (entry.second.total() > -std::numeric_limits<double>::infinity()) ranked.push_back(std::move(entry));
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second.total() > b.second.total();
    });
    if (ranked.size() > beam_width) ranked.resize(beam_width);
    beam = Beam(ranked.begin(), ranked.end());
  }

  std::vector<Hypothesis> hyps;
  hyps.reserve(beam.size());
  for (const auto& [prefix, score] : beam) {
    Hypothesis h;
    h.transcript = prefix;
    h.log_p_acoustic = std::min(0.0, score.total());
    h.combined = h.log_p_acoustic;
    hyps.push_back(std::move(h));
  }
  hyps = sort_nbest(std::move(hyps), false);
  if (hyps.size() > n_best) hyps.resize(n_best);
  return hyps;
}

std::vector<Hypothesis> sort_nbest(std::vector<Hypothesis> hyps, bool length_normalize) {
  auto key = [length_normalize](const Hypothesis& h) {
    if (!length_normalize) return h.combined;
    return h.combined / static_cast<double>(std::max<std::size_t>(1, h.transcript.size()));
  };
  std::sort(hyps.begin(), hyps.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    const double ka = key(a);
    const double kb = key(b);
    if (ka != kb) return ka > kb;
    return a.transcript < b.transcript;
  });
  return hyps;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  return edit_distance<char>(std::span<const char>(a.data(), a.size()),
                             std::span<const char>(b.data(), b.size()));
}

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

double cer(std::string_view reference, std::string_view hypothesis) {
  if (reference.empty()) throw DataError("cer: empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

double wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = split_words(reference);
  if (ref.empty()) throw DataError("wer: reference has no words");
  const auto hyp = split_words(hypothesis);
  return static_cast<double>(edit_distance<std::string>(ref, hyp)) / static_cast<double>(ref.size());
}

void ErrorCounts::add(std::string_view reference, std::string_view hypothesis) {
  if (reference.empty()) throw DataError("empty reference transcript");
  char_errors += edit_distance(reference, hypothesis);
  char_total += reference.size();
  const auto ref = split_words(reference);
  const auto hyp = split_words(hypothesis);
  word_errors += edit_distance<std::string>(ref, hyp);
  word_total += ref.size();
}

double ErrorCounts::cer() const {
  if (char_total == 0) throw DataError("cer: no reference characters");
  return static_cast<double>(char_errors) / static_cast<double>(char_total);
}

double ErrorCounts::wer() const {
  if (word_total == 0) throw DataError("wer: no reference words");
  return static_cast<double>(word_errors) / static_cast<double>(word_total);
}

}  // namespace desksr::decode
