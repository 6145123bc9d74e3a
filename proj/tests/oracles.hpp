// SPDX-License-Identifier: Apache-2.0
//
// Reference computations written independently of the library code paths
// they check. Kept deliberately naive.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "desksr/rng.hpp"

namespace desksr::testing {

/// Frame path -> transcript: drop a symbol equal to its predecessor, then
/// drop blanks (0).
inline std::vector<int> reference_collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != 0) out.push_back(s);
    prev = s;
  }
  return out;
}

/// Calls visit(path) for every path in classes^frames.
inline void for_each_path(int frames, int classes, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> path(static_cast<std::size_t>(frames), 0);
  while (true) {
    visit(path);
    int t = 0;
    while (t < frames && ++path[static_cast<std::size_t>(t)] == classes) path[static_cast<std::size_t>(t++)] = 0;
    if (t == frames) return;
  }
}

/// Exact probability of every transcript reachable in `probs`.
inline std::map<std::vector<int>, double> transcript_distribution(const Eigen::MatrixXd& probs) {
  std::map<std::vector<int>, double> dist;
  for_each_path(static_cast<int>(probs.rows()), static_cast<int>(probs.cols()), [&](const std::vector<int>& path) {
    double p = 1.0;
    for (std::size_t t = 0; t < path.size(); ++t) p *= probs(static_cast<Eigen::Index>(t), path[t]);
    dist[reference_collapse(path)] += p;
  });
  return dist;
}

/// Random row-stochastic T x C matrix with entries bounded away from zero.
inline Eigen::MatrixXd random_probs(Eigen::Index frames, Eigen::Index classes, Rng& rng) {
  Eigen::MatrixXd p(frames, classes);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index k = 0; k < classes; ++k) p(t, k) = 0.05 + rng.uniform();
    p.row(t) /= p.row(t).sum();
  }
  return p;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-scale, scale);
  return m;
}

inline double reference_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace desksr::testing
