// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "desksr/ctc.hpp"
#include "desksr/decode.hpp"
#include "desksr/dsp.hpp"
#include "desksr/nn.hpp"
#include "desksr/rng.hpp"

namespace {

using namespace desksr;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Rows are log-softmax of random logits.
Eigen::MatrixXd random_log_probs(int frames, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd logits(frames, classes);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-2.0, 2.0);
  return nn::log_softmax(logits);
}

void BM_Fft(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::fft_complex(x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Fft)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oNLogN);

void BM_DftNaive(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::dft_naive(x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DftNaive)->RangeMultiplier(4)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_ExtractFeatures(benchmark::State& state) {
  const auto s = dsp::make_signal(noise(8000, 2), 8000);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::extract_features(s));
}
BENCHMARK(BM_ExtractFeatures);

void BM_CtcLoss(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const auto lp = random_log_probs(frames, 28, 3);
  std::vector<int> labels;
  for (int i = 0; i < frames / 4; ++i) labels.push_back(1 + i % 27);
  for (auto _ : state) benchmark::DoNotOptimize(ctc::ctc_loss(lp, labels));
}
BENCHMARK(BM_CtcLoss)->Arg(50)->Arg(200)->Arg(800);

void BM_BeamSearch(benchmark::State& state) {
  const auto lp = random_log_probs(100, 28, 4);
  const auto width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(decode::beam_search(lp, width, 1));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(8)->Arg(32);

void BM_ForwardBackward(benchmark::State& state) {
  const nn::ModelSizes sizes{2, static_cast<int>(state.range(0)), 129, 27};
  const auto model = nn::init_params(sizes, 5);
  Rng rng(6);
  Eigen::MatrixXd features(100, 129);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = rng.uniform(-1.0, 1.0);
  const std::vector<int> labels{8, 5, 12, 12, 15};
  for (auto _ : state) {
    const auto fwd = nn::forward_full(model, features);
    const auto loss = ctc::ctc_loss(fwd.log_probs, labels);
    benchmark::DoNotOptimize(nn::backward_full(model, fwd.cache, loss.d_logits));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
