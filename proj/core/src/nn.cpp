// SPDX-License-Identifier: Apache-2.0
#include "desksr/nn.hpp"

#include <cmath>

#include "desksr/error.hpp"
#include "desksr/rng.hpp"

namespace desksr::nn {
namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

template <class M>
void fill_uniform(M& m, double range, Rng& rng) {
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-range, range);
}

LstmParams init_lstm(Eigen::Index input, Eigen::Index hidden, double range, Rng& rng) {
  auto p = LstmParams::zeros(input, hidden);
  for (auto* w : {&p.w_xi, &p.w_xf, &p.w_xc, &p.w_xo, &p.w_hi, &p.w_hf, &p.w_hc, &p.w_ho}) {
    fill_uniform(*w, range, rng);
  }
  for (auto* v : {&p.w_ci, &p.w_cf, &p.w_co}) fill_uniform(*v, range, rng);
  p.b_f.setOnes();
  return p;
}

void check_sizes(const ModelSizes& s) {
  if (s.layers < 1 || s.hidden < 1 || s.input < 1 || s.labels < 1) {
    throw InvalidArgument("model sizes must all be >= 1 (L=" + std::to_string(s.layers) +
                          ", H=" + std::to_string(s.hidden) + ", F=" + std::to_string(s.input) +
                          ", K=" + std::to_string(s.labels) + ")");
  }
}

}  // namespace

LstmParams LstmParams::zeros(Eigen::Index input_size, Eigen::Index hidden_size) {
  LstmParams p;
  for (auto* w : {&p.w_xi, &p.w_xf, &p.w_xc, &p.w_xo}) *w = Eigen::MatrixXd::Zero(hidden_size, input_size);
  for (auto* w : {&p.w_hi, &p.w_hf, &p.w_hc, &p.w_ho}) *w = Eigen::MatrixXd::Zero(hidden_size, hidden_size);
  for (auto* v : {&p.w_ci, &p.w_cf, &p.w_co, &p.b_i, &p.b_f, &p.b_c, &p.b_o}) {
    *v = Eigen::VectorXd::Zero(hidden_size);
  }
  return p;
}

ModelParams ModelParams::zeros(const ModelSizes& sizes) {
  check_sizes(sizes);
  ModelParams m;
  for (int l = 0; l < sizes.layers; ++l) {
    const Eigen::Index in = l == 0 ? sizes.input : 2 * sizes.hidden;
    m.layers.push_back({LstmParams::zeros(in, sizes.hidden), LstmParams::zeros(in, sizes.hidden)});
  }
  m.w_yf = Eigen::MatrixXd::Zero(sizes.output_dim(), sizes.hidden);
  m.w_yb = Eigen::MatrixXd::Zero(sizes.output_dim(), sizes.hidden);
  m.b_y = Eigen::VectorXd::Zero(sizes.output_dim());
  return m;
}

ModelSizes ModelParams::sizes() const {
  ModelSizes s;
  s.layers = static_cast<int>(layers.size());
  s.hidden = layers.empty() ? 0 : static_cast<int>(layers.front().fwd.hidden_size());
  s.input = layers.empty() ? 0 : static_cast<int>(layers.front().fwd.input_size());
  s.labels = static_cast<int>(b_y.size()) - 1;
  return s;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

ModelParams init_params(const ModelSizes& sizes, std::uint64_t seed, double weight_range) {
  check_sizes(sizes);
  if (!(weight_range >= 0.0) || !std::isfinite(weight_range)) {
    throw InvalidArgument("init weight range must be finite and >= 0");
  }
  Rng rng(seed);
  ModelParams m = ModelParams::zeros(sizes);
  for (int l = 0; l < sizes.layers; ++l) {
    const Eigen::Index in = l == 0 ? sizes.input : 2 * sizes.hidden;
    auto& layer = m.layers[static_cast<std::size_t>(l)];
    layer.fwd = init_lstm(in, sizes.hidden, weight_range, rng);
    layer.bwd = init_lstm(in, sizes.hidden, weight_range, rng);
  }
  fill_uniform(m.w_yf, weight_range, rng);
  fill_uniform(m.w_yb, weight_range, rng);
  return m;
}

CellOutput lstm_cell_forward(const LstmParams& p, const Eigen::VectorXd& x, const LstmState& prev) {
  const Eigen::Index hidden = p.hidden_size();
  if (x.size() != p.input_size() || prev.h.size() != hidden || prev.c.size() != hidden) {
    throw InvalidArgument("lstm_cell_forward: expected input " + std::to_string(p.input_size()) +
                          " and state " + std::to_string(hidden) + ", got " +
                          std::to_string(x.size()) + " and " + std::to_string(prev.h.size()));
  }
  CellOutput out;
  auto& k = out.cache;
  k.x = x;
  k.h_prev = prev.h;
  k.c_prev = prev.c;
  k.i = sigmoid(p.w_xi * x + p.w_hi * prev.h + p.w_ci.cwiseProduct(prev.c) + p.b_i);
  k.f = sigmoid(p.w_xf * x + p.w_hf * prev.h + p.w_cf.cwiseProduct(prev.c) + p.b_f);
  k.g = (p.w_xc * x + p.w_hc * prev.h + p.b_c).array().tanh().matrix();
  k.c = k.f.cwiseProduct(prev.c) + k.i.cwiseProduct(k.g);
  k.o = sigmoid(p.w_xo * x + p.w_ho * prev.h + p.w_co.cwiseProduct(k.c) + p.b_o);
  k.tanh_c = k.c.array().tanh().matrix();
  out.next.c = k.c;
  out.next.h = k.o.cwiseProduct(k.tanh_c);
  return out;
}

SequenceOutput lstm_sequence_forward(const LstmParams& p, std::span<const Eigen::VectorXd> xs,
                                     bool reverse) {
  const std::size_t steps = xs.size();
  if (steps == 0) throw InvalidArgument("lstm_sequence_forward: empty sequence");
  SequenceOutput out;
  out.reverse = reverse;
  out.hs.resize(steps);
  out.caches.resize(steps);
  auto state = LstmState::zeros(p.hidden_size());
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t t = reverse ? steps - 1 - n : n;
    auto step = lstm_cell_forward(p, xs[t], state);
    out.hs[t] = step.next.h;
    out.caches[t] = std::move(step.cache);
    state = std::move(step.next);
  }
  return out;
}

std::vector<Eigen::VectorXd> lstm_sequence_backward(const LstmParams& p, const SequenceOutput& fwd,
                                                    std::span<const Eigen::VectorXd> d_hs,
                                                    LstmParams& grads) {
  const std::size_t steps = fwd.caches.size();
  if (d_hs.size() != steps) {
    throw InvalidArgument("lstm_sequence_backward: " + std::to_string(d_hs.size()) +
                          " output gradients for " + std::to_string(steps) + " steps");
  }
  const Eigen::Index hidden = p.hidden_size();
  std::vector<Eigen::VectorXd> d_xs(steps);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(hidden);

  // Walk against the direction the recurrence ran.
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t t = fwd.reverse ? n : steps - 1 - n;
    const auto& k = fwd.caches[t];

    const Eigen::VectorXd dh = d_hs[t] + dh_next;
    const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(hidden);

    const Eigen::VectorXd da_o =
        (dh.array() * k.tanh_c.array() * k.o.array() * (ones - k.o.array())).matrix();
    const Eigen::VectorXd dc =
        (dh.array() * k.o.array() * (ones - k.tanh_c.array().square())).matrix() + dc_next +
        da_o.cwiseProduct(p.w_co);
    const Eigen::VectorXd da_i =
        (dc.array() * k.g.array() * k.i.array() * (ones - k.i.array())).matrix();
    const Eigen::VectorXd da_f =
        (dc.array() * k.c_prev.array() * k.f.array() * (ones - k.f.array())).matrix();
    const Eigen::VectorXd da_c =
        (dc.array() * k.i.array() * (ones - k.g.array().square())).matrix();

    grads.w_xi.noalias() += da_i * k.x.transpose();
    grads.w_xf.noalias() += da_f * k.x.transpose();
    grads.w_xc.noalias() += da_c * k.x.transpose();
    grads.w_xo.noalias() += da_o * k.x.transpose();
    grads.w_hi.noalias() += da_i * k.h_prev.transpose();
    grads.w_hf.noalias() += da_f * k.h_prev.transpose();
    grads.w_hc.noalias() += da_c * k.h_prev.transpose();
    grads.w_ho.noalias() += da_o * k.h_prev.transpose();
    grads.w_ci += da_i.cwiseProduct(k.c_prev);
    grads.w_cf += da_f.cwiseProduct(k.c_prev);
    grads.w_co += da_o.cwiseProduct(k.c);
    grads.b_i += da_i;
    grads.b_f += da_f;
    grads.b_c += da_c;
    grads.b_o += da_o;

    d_xs[t] = p.w_xi.transpose() * da_i + p.w_xf.transpose() * da_f +
              p.w_xc.transpose() * da_c + p.w_xo.transpose() * da_o;
    dh_next = p.w_hi.transpose() * da_i + p.w_hf.transpose() * da_f +
              p.w_hc.transpose() * da_c + p.w_ho.transpose() * da_o;
    dc_next = dc.cwiseProduct(k.f) + da_i.cwiseProduct(p.w_ci) + da_f.cwiseProduct(p.w_cf);
  }
  return d_xs;
}

Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double hi = logits.row(t).maxCoeff();
    const double lse = hi + std::log((logits.row(t).array() - hi).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

ForwardResult forward_full(const ModelParams& m, const Eigen::MatrixXd& features,
                           std::span<const Eigen::VectorXd> dropout_masks) {
  const auto sizes = m.sizes();
  const Eigen::Index hidden = sizes.hidden;
  if (features.cols() != sizes.input) {
    throw InvalidArgument("forward_full: feature dimension " + std::to_string(features.cols()) +
                          " does not match model input " + std::to_string(sizes.input));
  }
  if (features.rows() == 0) throw InvalidArgument("forward_full: no frames");
  if (!dropout_masks.empty()) {
    if (dropout_masks.size() != m.layers.size()) {
      throw InvalidArgument("forward_full: need one dropout mask per layer");
    }
    for (const auto& mask : dropout_masks) {
      if (mask.size() != 2 * hidden) throw InvalidArgument("forward_full: dropout mask must have size 2H");
    }
  }

  const auto steps = static_cast<std::size_t>(features.rows());
  ForwardResult result;
  auto& cache = result.cache;
  cache.masks.assign(dropout_masks.begin(), dropout_masks.end());

  std::vector<Eigen::VectorXd> input(steps);
  for (std::size_t t = 0; t < steps; ++t) input[t] = features.row(static_cast<Eigen::Index>(t)).transpose();

  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    LayerCache layer;
    layer.fwd = lstm_sequence_forward(m.layers[l].fwd, input, false);
    layer.bwd = lstm_sequence_forward(m.layers[l].bwd, input, true);
    std::vector<Eigen::VectorXd> output(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      output[t].resize(2 * hidden);
      output[t] << layer.fwd.hs[t], layer.bwd.hs[t];
      if (!cache.masks.empty()) output[t].array() *= cache.masks[l].array();
    }
    cache.inputs.push_back(std::move(input));
    cache.layers.push_back(std::move(layer));
    input = std::move(output);
  }
  cache.top = std::move(input);

  result.logits.resize(static_cast<Eigen::Index>(steps), sizes.output_dim());
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& z = cache.top[t];
    result.logits.row(static_cast<Eigen::Index>(t)) =
        (m.w_yf * z.head(hidden) + m.w_yb * z.tail(hidden) + m.b_y).transpose();
  }
  result.log_probs = log_softmax(result.logits);
  return result;
}

Gradients backward_full(const ModelParams& m, const ForwardCache& cache,
                        const Eigen::MatrixXd& d_logits) {
  const auto sizes = m.sizes();
  const Eigen::Index hidden = sizes.hidden;
  const std::size_t steps = cache.top.size();
  if (cache.layers.size() != m.layers.size() || static_cast<std::size_t>(d_logits.rows()) != steps ||
      d_logits.cols() != sizes.output_dim()) {
    throw InvalidArgument("backward_full: cache or gradient shape does not match the model");
  }

  Gradients g;
  g.params = ModelParams::zeros(sizes);

  std::vector<Eigen::VectorXd> d_out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::VectorXd d = d_logits.row(static_cast<Eigen::Index>(t)).transpose();
    const auto& z = cache.top[t];
    g.params.w_yf.noalias() += d * z.head(hidden).transpose();
    g.params.w_yb.noalias() += d * z.tail(hidden).transpose();
    g.params.b_y += d;
    d_out[t].resize(2 * hidden);
    d_out[t] << m.w_yf.transpose() * d, m.w_yb.transpose() * d;
  }

  for (std::size_t l = m.layers.size(); l-- > 0;) {
    std::vector<Eigen::VectorXd> d_fwd(steps), d_bwd(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      if (!cache.masks.empty()) d_out[t].array() *= cache.masks[l].array();
      d_fwd[t] = d_out[t].head(hidden);
      d_bwd[t] = d_out[t].tail(hidden);
    }
    auto dx_f = lstm_sequence_backward(m.layers[l].fwd, cache.layers[l].fwd, d_fwd, g.params.layers[l].fwd);
    auto dx_b = lstm_sequence_backward(m.layers[l].bwd, cache.layers[l].bwd, d_bwd, g.params.layers[l].bwd);
    for (std::size_t t = 0; t < steps; ++t) d_out[t] = dx_f[t] + dx_b[t];
  }

  g.d_features.resize(static_cast<Eigen::Index>(steps), sizes.input);
  for (std::size_t t = 0; t < steps; ++t) g.d_features.row(static_cast<Eigen::Index>(t)) = d_out[t].transpose();
  return g;
}

}  // namespace desksr::nn
