// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace desksr::nn {

/// Weights of one peephole LSTM direction.
///
///   i = sigma(W_xi x + W_hi h' + w_ci . c' + b_i)
///   f = sigma(W_xf x + W_hf h' + w_cf . c' + b_f)
///   c = f . c' + i . tanh(W_xc x + W_hc h' + b_c)
///   o = sigma(W_xo x + W_ho h' + w_co . c + b_o)
///   h = o . tanh(c)
///
/// Primes are the previous step; "." is the elementwise product, so the
/// peepholes w_c* are diagonal.
struct LstmParams {
  Eigen::MatrixXd w_xi, w_xf, w_xc, w_xo;  // H x F
  Eigen::MatrixXd w_hi, w_hf, w_hc, w_ho;  // H x H
  Eigen::VectorXd w_ci, w_cf, w_co;        // H
  Eigen::VectorXd b_i, b_f, b_c, b_o;      // H

  static LstmParams zeros(Eigen::Index input_size, Eigen::Index hidden_size);

  Eigen::Index input_size() const { return w_xi.cols(); }
  Eigen::Index hidden_size() const { return w_xi.rows(); }

  /// Calls f(name, tensor) for every tensor in a fixed order.
  template <class F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    f("w_xi", p.w_xi); f("w_xf", p.w_xf); f("w_xc", p.w_xc); f("w_xo", p.w_xo);
    f("w_hi", p.w_hi); f("w_hf", p.w_hf); f("w_hc", p.w_hc); f("w_ho", p.w_ho);
    f("w_ci", p.w_ci); f("w_cf", p.w_cf); f("w_co", p.w_co);
    f("b_i", p.b_i); f("b_f", p.b_f); f("b_c", p.b_c); f("b_o", p.b_o);
  }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static LstmState zeros(Eigen::Index hidden_size) {
    return {Eigen::VectorXd::Zero(hidden_size), Eigen::VectorXd::Zero(hidden_size)};
  }
};

/// Activations of one step kept for the backward pass.
struct LstmStepCache {
  Eigen::VectorXd x, h_prev, c_prev;
  Eigen::VectorXd i, f, g, c, o, tanh_c;
};

struct CellOutput {
  LstmState next;
  LstmStepCache cache;
};

CellOutput lstm_cell_forward(const LstmParams& p, const Eigen::VectorXd& x, const LstmState& prev);

/// Outputs and caches of one direction over a sequence, stored in original
/// time order whichever way the recurrence ran.
struct SequenceOutput {
  std::vector<Eigen::VectorXd> hs;
  std::vector<LstmStepCache> caches;
  bool reverse = false;
};

SequenceOutput lstm_sequence_forward(const LstmParams& p, std::span<const Eigen::VectorXd> xs,
                                     bool reverse);

/// Backpropagates dL/dh_t (original time order) through the recurrence.
/// Parameter gradients are added into `grads`; returns dL/dx_t.
std::vector<Eigen::VectorXd> lstm_sequence_backward(const LstmParams& p, const SequenceOutput& fwd,
                                                    std::span<const Eigen::VectorXd> d_hs,
                                                    LstmParams& grads);

struct ModelSizes {
  int layers = 2;
  int hidden = 32;
  int input = 0;
  /// Alphabet size K; the network emits K + 1 classes including blank.
  int labels = 0;

  int output_dim() const { return labels + 1; }
  friend bool operator==(const ModelSizes&, const ModelSizes&) = default;
};

struct BiLayer {
  LstmParams fwd;
  LstmParams bwd;
};

/// Deep bidirectional LSTM with a softmax output. Layer l > 0 reads the
/// concatenation [h_fwd; h_bwd] of layer l - 1; the output layer sums the two
/// directional projections.
struct ModelParams {
  std::vector<BiLayer> layers;
  Eigen::MatrixXd w_yf, w_yb;  // (K+1) x H
  Eigen::VectorXd b_y;         // K+1

  static ModelParams zeros(const ModelSizes& sizes);
  ModelSizes sizes() const;

  template <class F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const;

 private:
  template <class Self, class F>
  static void visit(Self& m, F& f) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l);
      m.layers[l].fwd.for_each_tensor(
          [&](const std::string& name, auto& t) { f(prefix + ".fwd." + name, t); });
      m.layers[l].bwd.for_each_tensor(
          [&](const std::string& name, auto& t) { f(prefix + ".bwd." + name, t); });
    }
    f("out.w_yf", m.w_yf);
    f("out.w_yb", m.w_yb);
    f("out.b_y", m.b_y);
  }
};

/// Flat mutable views over every tensor of a parameter pack, in visit order.
template <class P>
std::vector<std::span<double>> tensor_spans(P& params) {
  std::vector<std::span<double>> out;
  params.for_each_tensor([&](const std::string&, auto& t) {
    out.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
  });
  return out;
}

template <class P>
std::vector<std::span<const double>> tensor_spans(const P& params) {
  std::vector<std::span<const double>> out;
  params.for_each_tensor([&](const std::string&, const auto& t) {
    out.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
  });
  return out;
}

inline constexpr double kDefaultInitRange = 0.1;

/// Weights uniform in [-r, r], forget bias 1, other biases 0.
ModelParams init_params(const ModelSizes& sizes, std::uint64_t seed, double weight_range = kDefaultInitRange);

/// Per-layer inverted-dropout masks (each of size 2H), applied to the
/// concatenated output of layer l before it feeds layer l + 1 (or the output
/// projection for the top layer). Never applied inside a recurrence.
using DropoutMasks = std::vector<Eigen::VectorXd>;

struct LayerCache {
  SequenceOutput fwd;
  SequenceOutput bwd;
};

struct ForwardCache {
  std::vector<std::vector<Eigen::VectorXd>> inputs;  // per layer, per frame
  std::vector<LayerCache> layers;
  std::vector<Eigen::VectorXd> top;                  // masked top-layer output
  DropoutMasks masks;
};

struct ForwardResult {
  Eigen::MatrixXd logits;     // T x (K+1)
  Eigen::MatrixXd log_probs;  // T x (K+1)
  ForwardCache cache;
};

/// Row-wise log-softmax.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits);

ForwardResult forward_full(const ModelParams& m, const Eigen::MatrixXd& features,
                           std::span<const Eigen::VectorXd> dropout_masks = {});

struct Gradients {
  ModelParams params;
  Eigen::MatrixXd d_features;  // T x F
};

/// Analytic gradients given dL/dlogits (T x (K+1)).
Gradients backward_full(const ModelParams& m, const ForwardCache& cache,
                        const Eigen::MatrixXd& d_logits);

}  // namespace desksr::nn
