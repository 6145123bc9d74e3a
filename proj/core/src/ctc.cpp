// SPDX-License-Identifier: Apache-2.0
#include "desksr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "desksr/error.hpp"

namespace desksr::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw InvalidArgument("alphabet symbol " + std::to_string(i) + " is empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (symbols_[i] == symbols_[j]) {
        throw InvalidArgument("alphabet symbol '" + symbols_[i] + "' is listed twice");
      }
    }
    longest_ = std::max(longest_, symbols_[i].size());
  }
}

Alphabet Alphabet::from_chars(std::string_view chars) {
  std::vector<std::string> symbols;
  for (char c : chars) symbols.emplace_back(1, c);
  return Alphabet(std::move(symbols));
}

Alphabet Alphabet::english() { return from_chars("ABCDEFGHIJKLMNOPQRSTUVWXYZ "); }

Alphabet Alphabet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alphabet file " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && !line.empty() && line.front() == '#') {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    symbols.push_back(line == "<space>" ? std::string(" ") : line);
  }
  if (symbols.empty()) throw DataError("alphabet file " + path.string() + " lists no symbols");
  return Alphabet(std::move(symbols));
}

void Alphabet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write alphabet file " + path.string());
  out << "# one symbol per line; blank is implicit\n";
  for (const auto& s : symbols_) out << (s == " " ? "<space>" : s) << '\n';
}

const std::string& Alphabet::symbol(int label) const {
  if (!contains(label)) throw InvalidArgument("label " + std::to_string(label) + " outside alphabet");
  return symbols_[static_cast<std::size_t>(label - 1)];
}

int Alphabet::label_of(std::string_view symbol) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) return static_cast<int>(i) + 1;
  }
  throw DataError("symbol '" + std::string(symbol) + "' is not in the alphabet");
}

LabelSequence Alphabet::encode(std::string_view text) const {
  LabelSequence out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    int best = 0;
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      const auto& s = symbols_[i];
      if (s.size() > best_len && text.substr(pos, s.size()) == s) {
        best = static_cast<int>(i) + 1;
        best_len = s.size();
      }
    }
    if (best == 0) {
      throw DataError("text '" + std::string(text) + "' has out-of-vocabulary character at offset " +
                      std::to_string(pos));
    }
    out.push_back(best);
    pos += best_len;
  }
  return out;
}

std::string Alphabet::decode(std::span<const int> labels) const {
  std::string out;
  for (int l : labels) out += symbol(l);
  return out;
}

std::vector<int> merge_repeats(std::span<const int> path) {
  std::vector<int> out;
  for (int s : path) {
    if (out.empty() || out.back() != s) out.push_back(s);
  }
  return out;
}

std::vector<int> remove_blanks(std::span<const int> path) {
  std::vector<int> out;
  std::copy_if(path.begin(), path.end(), std::back_inserter(out),
               [](int s) { return s != kBlank; });
  return out;
}

LabelSequence collapse(std::span<const int> path) { return remove_blanks(merge_repeats(path)); }

std::vector<int> expand_target(std::span<const int> labels) {
  std::vector<int> out(2 * labels.size() + 1, kBlank);
  for (std::size_t i = 0; i < labels.size(); ++i) out[2 * i + 1] = labels[i];
  return out;
}

std::size_t min_frames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

CtcResult ctc_loss(const Eigen::MatrixXd& log_probs, std::span<const int> labels) {
  const Eigen::Index frames = log_probs.rows();
  const Eigen::Index classes = log_probs.cols();
  if (frames == 0) throw InvalidArgument("ctc_loss: no frames");
  for (int l : labels) {
    if (l <= kBlank || l >= classes) {
      throw InvalidArgument("ctc_loss: label " + std::to_string(l) + " outside [1, " +
                            std::to_string(classes - 1) + "]");
    }
  }
  if (static_cast<std::size_t>(frames) < min_frames(labels)) {
    throw DataError("ctc_loss: target of length " + std::to_string(labels.size()) + " needs " +
                    std::to_string(min_frames(labels)) + " frames, only " +
                    std::to_string(frames) + " available");
  }

  const auto ext = expand_target(labels);
  const auto states = static_cast<Eigen::Index>(ext.size());
  // A state may skip the preceding blank when it is a label that differs from
  // the label two positions back.
  auto can_skip = [&](Eigen::Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != kBlank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };
  auto lp = [&](Eigen::Index t, Eigen::Index s) {
    return log_probs(t, ext[static_cast<std::size_t>(s)]);
  };

  // alpha includes the emission at t; beta covers frames t+1 .. T-1 only, so
  // alpha_t(s) + beta_t(s) is the log mass of paths through s at t.
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(frames, states, kNegInf);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(frames, states, kNegInf);

  alpha(0, 0) = lp(0, 0);
  if (states > 1) alpha(0, 1) = lp(0, 1);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + lp(t, s);
    }
  }

  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (Eigen::Index t = frames - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + lp(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1) + lp(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) {
        acc = log_add(acc, beta(t + 1, s + 2) + lp(t + 1, s + 2));
      }
      beta(t, s) = acc;
    }
  }

  double log_likelihood = alpha(frames - 1, states - 1);
  if (states > 1) log_likelihood = log_add(log_likelihood, alpha(frames - 1, states - 2));
  if (!std::isfinite(log_likelihood)) {
    throw NumericError("ctc_loss: target has zero probability under the given outputs");
  }

  CtcResult result;
  result.loss = -log_likelihood;
  result.d_logits = log_probs.array().exp();
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      const double occupancy = alpha(t, s) + beta(t, s);
      if (occupancy == kNegInf) continue;
      result.d_logits(t, ext[static_cast<std::size_t>(s)]) -= std::exp(occupancy - log_likelihood);
    }
  }
  return result;
}

double ctc_loss_bruteforce(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  const auto frames = static_cast<std::size_t>(probs.rows());
  const auto classes = static_cast<std::size_t>(probs.cols());
  if (frames == 0 || frames > 8 || classes > 5) {
    throw InvalidArgument("ctc_loss_bruteforce: instance too large (T=" + std::to_string(frames) +
                          ", K=" + std::to_string(classes == 0 ? 0 : classes - 1) +
                          "); limits are T <= 8, K <= 4");
  }
  if (frames < min_frames(labels)) {
    throw DataError("ctc_loss_bruteforce: target is infeasible in " + std::to_string(frames) +
                    " frames");
  }

  const LabelSequence target(labels.begin(), labels.end());
  std::vector<int> path(frames, 0);
  double total = 0.0;
  while (true) {
    if (collapse(path) == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < frames; ++t) {
        p *= probs(static_cast<Eigen::Index>(t), path[t]);
      }
      total += p;
    }
    // Odometer increment over (K+1)^T paths.
    std::size_t t = 0;
    while (t < frames && ++path[t] == static_cast<int>(classes)) path[t++] = 0;
    if (t == frames) break;
  }
  if (!(total > 0.0)) throw DataError("ctc_loss_bruteforce: target has zero probability");
  return -std::log(total);
}

}  // namespace desksr::ctc
