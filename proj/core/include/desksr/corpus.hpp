// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "desksr/ctc.hpp"
#include "desksr/dsp.hpp"
#include "desksr/train.hpp"

namespace desksr::corpus {

/// Chord tones for the alphabet symbol at 0-based position `index`:
/// f1 = 300 + 100 * index Hz and f2 = f1 + 57 Hz.
struct ChordTones {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

inline constexpr double kChordBaseHz = 300.0;
inline constexpr double kChordSpacingHz = 100.0;
inline constexpr double kChordPartnerHz = 57.0;
inline constexpr double kChordAmplitude = 0.4;
inline constexpr double kSpeechBandHz = 4000.0;

/// Throws InvalidArgument when f2 would reach the 4 kHz speech band edge.
ChordTones chord_tones(std::size_t index);

/// Two-tone chord for `symbol`, amplitude 0.4 each, char_ms long.
dsp::Signal char_chord(const ctc::Alphabet& alphabet, std::string_view symbol,
                       double sample_rate_hz, double char_ms);

struct Utterance {
  std::string id;
  dsp::Signal audio;
  std::string transcript;
};

/// Concatenated chords, one per symbol; a space is char_ms of silence.
Utterance synth_utterance(std::string_view text, const ctc::Alphabet& alphabet,
                          double sample_rate_hz, double char_ms, std::string id = "utt");

struct ManifestEntry {
  std::string id;
  std::string audio;  // relative paths resolve against the manifest directory
  std::string transcript;
  double sample_rate_hz = 0.0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

/// One JSON object per line: id, audio, transcript, sample_rate_hz.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
/// Rejects malformed lines, duplicate ids, empty transcripts and audio paths
/// that do not exist; every error names the offending line or id.
Manifest load_manifest(const std::filesystem::path& path);

dsp::Signal load_audio(const Manifest& manifest, const ManifestEntry& entry);

struct CorpusOptions {
  std::size_t count = 20;
  std::size_t min_len = 3;
  std::size_t max_len = 5;
  double sample_rate_hz = 8000.0;
  double char_ms = 100.0;
  std::uint64_t seed = 0;
};

/// Random transcripts with no leading, trailing or doubled spaces.
std::vector<std::string> random_transcripts(const ctc::Alphabet& alphabet, const CorpusOptions& options);

/// Writes utt_NNNN.pcm files and manifest.jsonl into out_dir.
Manifest synth_corpus(const ctc::Alphabet& alphabet, const CorpusOptions& options,
                      const std::filesystem::path& out_dir);

/// Features and label sequences for every manifest entry.
std::vector<train::TrainingExample> load_training_set(const Manifest& manifest,
                                                      const ctc::Alphabet& alphabet,
                                                      const dsp::FeatureConfig& features);

}  // namespace desksr::corpus
