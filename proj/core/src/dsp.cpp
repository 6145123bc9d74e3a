// SPDX-License-Identifier: Apache-2.0
#include "desksr/dsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "desksr/error.hpp"

namespace desksr::dsp {

Signal make_signal(std::vector<double> samples, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw InvalidArgument("sample rate must be positive, got " + std::to_string(sample_rate_hz));
  }
  for (double s : samples) {
    if (!std::isfinite(s)) throw InvalidArgument("signal contains a non-finite sample");
  }
  return Signal{std::move(samples), sample_rate_hz};
}

NyquistVerdict check_nyquist(double max_signal_hz, double sample_rate_hz) {
  return sample_rate_hz >= 2.0 * max_signal_hz ? NyquistVerdict::kOk
                                                : NyquistVerdict::kViolation;
}

Signal synthesize_tones(std::span<const double> freqs, std::span<const double> amps,
                        double duration_s, double sample_rate_hz) {
  if (freqs.size() != amps.size()) {
    throw InvalidArgument("synthesize_tones: " + std::to_string(freqs.size()) +
                          " frequencies but " + std::to_string(amps.size()) + " amplitudes");
  }
  if (!(duration_s > 0.0)) throw InvalidArgument("synthesize_tones: duration must be positive");
  if (!(sample_rate_hz > 0.0)) throw InvalidArgument("synthesize_tones: sample rate must be positive");
  const double max_hz = freqs.empty() ? 0.0 : *std::max_element(freqs.begin(), freqs.end());
  // Strictly above 2x: a tone exactly at Nyquist samples to all zeros.
  if (check_nyquist(max_hz, sample_rate_hz) == NyquistVerdict::kViolation ||
      (!freqs.empty() && sample_rate_hz <= 2.0 * max_hz)) {
    throw InvalidArgument("synthesize_tones: sample rate " + std::to_string(sample_rate_hz) +
                          " Hz does not exceed twice the highest tone " + std::to_string(max_hz) +
                          " Hz");
  }

  const auto n = static_cast<std::size_t>(std::floor(duration_s * sample_rate_hz));
  std::vector<double> samples(n, 0.0);
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    const double omega = 2.0 * std::numbers::pi * freqs[j] / sample_rate_hz;
    for (std::size_t i = 0; i < n; ++i) {
      samples[i] += amps[j] * std::sin(omega * static_cast<double>(i));
    }
  }
  return make_signal(std::move(samples), sample_rate_hz);
}

bool is_power_of_two(std::size_t n) { return std::has_single_bit(n); }

std::size_t next_power_of_two(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

std::vector<std::complex<double>> dft_complex(std::span<const double> samples) {
  const std::size_t n = samples.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n first so the angle stays small and accurate.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                           static_cast<double>(n);
      acc += samples[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<std::complex<double>> fft_complex(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0 || !is_power_of_two(n)) {
    throw InvalidArgument("fft: length " + std::to_string(n) + " is not a power of two");
  }
  std::vector<std::complex<double>> a(samples.begin(), samples.end());

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by repeated multiplication so the
    // error does not accumulate across the butterfly span.
    std::vector<std::complex<double>> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) /
                           static_cast<double>(len);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = a[start + k];
        const auto v = a[start + k + half] * twiddle[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
  return a;
}

namespace {

Spectrum one_sided(const std::vector<std::complex<double>>& full, double sample_rate_hz) {
  Spectrum s;
  const std::size_t n = full.size();
  s.magnitudes.resize(n / 2 + 1);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) s.magnitudes[k] = std::abs(full[k]);
  s.bin_hz = sample_rate_hz / static_cast<double>(n);
  return s;
}

}  // namespace

Spectrum dft_naive(std::span<const double> samples, double sample_rate_hz) {
  if (samples.empty()) throw InvalidArgument("dft_naive: empty input");
  return one_sided(dft_complex(samples), sample_rate_hz);
}

Spectrum fft(std::span<const double> samples, double sample_rate_hz) {
  return one_sided(fft_complex(samples), sample_rate_hz);
}

std::size_t ms_to_samples(double ms, double sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(ms * sample_rate_hz / 1000.0));
}

std::vector<std::vector<double>> frame_signal(const Signal& signal, double window_ms,
                                              double hop_ms) {
  if (!(window_ms > 0.0) || !(hop_ms > 0.0)) {
    throw InvalidArgument("frame_signal: window and hop must be positive");
  }
  const std::size_t window = ms_to_samples(window_ms, signal.sample_rate_hz);
  const std::size_t hop = ms_to_samples(hop_ms, signal.sample_rate_hz);
  if (window == 0 || hop == 0) {
    throw InvalidArgument("frame_signal: window or hop rounds to zero samples");
  }
  const std::size_t len = signal.samples.size();
  if (len < window) {
    throw DataError("frame_signal: signal of " + std::to_string(len) +
                    " samples is shorter than one window of " + std::to_string(window));
  }
  const std::size_t count = (len - window) / hop + 1;
  std::vector<std::vector<double>> frames;
  frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    const auto begin = signal.samples.begin() + static_cast<std::ptrdiff_t>(f * hop);
    frames.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(window));
  }
  return frames;
}

std::size_t retained_bins(double sample_rate_hz, std::size_t fft_size, double cutoff_hz) {
  const std::size_t one_sided_len = fft_size / 2 + 1;
  std::size_t count = 0;
  // Exact comparison k * sr <= cutoff * fft_size avoids rounding at the edge.
  while (count < one_sided_len &&
         static_cast<double>(count) * sample_rate_hz <= cutoff_hz * static_cast<double>(fft_size)) {
    ++count;
  }
  return count;
}

std::vector<double> window_taper(std::size_t n, WindowKind kind) {
  std::vector<double> taper(n, 1.0);
  if (kind == WindowKind::kHann && n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      taper[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(n - 1));
    }
  }
  return taper;
}

Spectrum signal_spectrum(const Signal& signal, std::size_t fft_size, WindowKind window) {
  const std::size_t n = signal.samples.size();
  if (n == 0) throw InvalidArgument("signal_spectrum: empty signal");
  if (fft_size == 0) fft_size = next_power_of_two(n);
  if (!is_power_of_two(fft_size) || fft_size < n) {
    throw InvalidArgument("fft_size " + std::to_string(fft_size) +
                          " must be a power of two no smaller than the signal (" + std::to_string(n) +
                          " samples)");
  }
  const auto taper = window_taper(n, window);
  std::vector<double> padded(fft_size, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = signal.samples[i] * taper[i];
  return fft(padded, signal.sample_rate_hz);
}

std::size_t resolve_fft_size(const FeatureConfig& config, double sample_rate_hz) {
  const std::size_t window = ms_to_samples(config.frame_ms, sample_rate_hz);
  if (config.fft_size == 0) return next_power_of_two(window);
  if (!is_power_of_two(config.fft_size) || config.fft_size < window) {
    throw InvalidArgument("fft_size " + std::to_string(config.fft_size) +
                          " must be a power of two no smaller than the frame (" +
                          std::to_string(window) + " samples)");
  }
  return config.fft_size;
}

FeatureSequence extract_features(const Signal& signal, const FeatureConfig& config) {
  const auto frames = frame_signal(signal, config.frame_ms, config.hop_ms);
  const std::size_t fft_size = resolve_fft_size(config, signal.sample_rate_hz);
  const std::size_t dim = retained_bins(signal.sample_rate_hz, fft_size, config.cutoff_hz);
  if (dim == 0) throw InvalidArgument("extract_features: cutoff retains no bins");

  const std::size_t window = frames.front().size();
  const auto taper = window_taper(window, config.window);

  FeatureSequence out;
  out.frame_ms = config.frame_ms;
  out.sample_rate_hz = signal.sample_rate_hz;
  out.cutoff_hz = config.cutoff_hz;
  out.frames.resize(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(dim));

  std::vector<double> padded(fft_size);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::fill(padded.begin(), padded.end(), 0.0);
    for (std::size_t i = 0; i < window; ++i) padded[i] = frames[t][i] * taper[i];
    const auto spectrum = fft(padded, signal.sample_rate_hz);
    for (std::size_t k = 0; k < dim; ++k) {
      out.frames(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) =
          std::log(spectrum.magnitudes[k] + config.log_floor);
    }
  }

  const Eigen::RowVectorXd mean = out.frames.colwise().mean();
  out.frames.rowwise() -= mean;
  Eigen::RowVectorXd var = out.frames.array().square().colwise().mean();
  var = var.cwiseMax(config.variance_floor);
  out.frames.array().rowwise() /= var.array().sqrt();
  return out;
}

Signal decode_pcm16(std::span<const std::uint8_t> bytes, double sample_rate_hz) {
  if (bytes.size() % 2 != 0) {
    throw DataError("PCM data has an odd byte count (" + std::to_string(bytes.size()) + ")");
  }
  std::vector<double> samples(bytes.size() / 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto lo = static_cast<std::uint16_t>(bytes[2 * i]);
    const auto hi = static_cast<std::uint16_t>(bytes[2 * i + 1]);
    const auto value = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
    samples[i] = static_cast<double>(value) / 32768.0;
  }
  return make_signal(std::move(samples), sample_rate_hz);
}

std::vector<std::uint8_t> encode_pcm16(const Signal& signal) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(signal.samples.size() * 2);
  for (double s : signal.samples) {
    const long scaled = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    const auto word = static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled));
    bytes.push_back(static_cast<std::uint8_t>(word & 0xff));
    bytes.push_back(static_cast<std::uint8_t>(word >> 8));
  }
  return bytes;
}

Signal read_pcm16(const std::filesystem::path& path, double sample_rate_hz) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_pcm16(bytes, sample_rate_hz);
}

void write_pcm16(const std::filesystem::path& path, const Signal& signal) {
  const auto bytes = encode_pcm16(signal);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write audio file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace desksr::dsp
