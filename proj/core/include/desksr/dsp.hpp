// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace desksr::dsp {

/// Discrete audio with a sample rate. Construct through make_signal() to get
/// the finiteness and rate checks.
struct Signal {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

Signal make_signal(std::vector<double> samples, double sample_rate_hz);

/// One-sided magnitude spectrum: fft_size / 2 + 1 bins.
struct Spectrum {
  std::vector<double> magnitudes;
  double bin_hz = 0.0;

  std::size_t fft_size() const { return 2 * (magnitudes.size() - 1); }
  double frequency(std::size_t bin) const { return bin_hz * static_cast<double>(bin); }
};

enum class WindowKind { kRectangular, kHann };

struct FeatureConfig {
  double frame_ms = 20.0;
  double hop_ms = 20.0;
  /// 0 means "next power of two at or above the frame length".
  std::size_t fft_size = 0;
  double cutoff_hz = 4000.0;
  WindowKind window = WindowKind::kRectangular;
  double log_floor = 1e-10;
  double variance_floor = 1e-8;
};

/// T x F matrix of normalized log magnitudes, one row per frame.
struct FeatureSequence {
  Eigen::MatrixXd frames;
  double frame_ms = 20.0;
  double sample_rate_hz = 0.0;
  double cutoff_hz = 4000.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

enum class NyquistVerdict { kOk, kViolation };

/// ok iff sample_rate_hz >= 2 * max_signal_hz.
NyquistVerdict check_nyquist(double max_signal_hz, double sample_rate_hz);

/// samples[n] = sum_j amps[j] * sin(2 pi freqs[j] n / sample_rate_hz).
/// Throws InvalidArgument on a Nyquist violation or mismatched lists.
Signal synthesize_tones(std::span<const double> freqs, std::span<const double> amps,
                        double duration_s, double sample_rate_hz);

// Complex transforms. dft_complex is the O(n^2) reference; fft_complex is the
// iterative radix-2 Cooley-Tukey and needs a power-of-two length.
std::vector<std::complex<double>> dft_complex(std::span<const double> samples);
std::vector<std::complex<double>> fft_complex(std::span<const double> samples);

Spectrum dft_naive(std::span<const double> samples, double sample_rate_hz = 1.0);
Spectrum fft(std::span<const double> samples, double sample_rate_hz = 1.0);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// Samples per frame for a duration, rounded to the nearest sample.
std::size_t ms_to_samples(double ms, double sample_rate_hz);

/// Contiguous windows; frame count floor((len - window) / hop) + 1. The
/// trailing partial window is dropped.
std::vector<std::vector<double>> frame_signal(const Signal& signal, double window_ms,
                                              double hop_ms);

/// Number of bins k (from 0) with k * sr / fft_size <= cutoff_hz, capped at
/// the one-sided spectrum length.
std::size_t retained_bins(double sample_rate_hz, std::size_t fft_size, double cutoff_hz);

/// Multiplicative taper of length n (all ones for rectangular).
std::vector<double> window_taper(std::size_t n, WindowKind kind);

/// Whole-signal spectrum: taper, zero-pad to fft_size (0 = next power of
/// two at or above the length), FFT.
Spectrum signal_spectrum(const Signal& signal, std::size_t fft_size = 0,
                         WindowKind window = WindowKind::kRectangular);

/// Resolved FFT size for a config at a given rate.
std::size_t resolve_fft_size(const FeatureConfig& config, double sample_rate_hz);

/// Frame, window, zero-pad, FFT, keep bins up to the cutoff, log-compress and
/// normalize each dimension to zero mean / unit variance over the utterance.
FeatureSequence extract_features(const Signal& signal, const FeatureConfig& config = {});

// Headerless 16-bit signed little-endian mono PCM; amplitude = value / 32768.
Signal read_pcm16(const std::filesystem::path& path, double sample_rate_hz);
Signal decode_pcm16(std::span<const std::uint8_t> bytes, double sample_rate_hz);
std::vector<std::uint8_t> encode_pcm16(const Signal& signal);
void write_pcm16(const std::filesystem::path& path, const Signal& signal);

}  // namespace desksr::dsp
