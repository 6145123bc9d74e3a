// SPDX-License-Identifier: Apache-2.0
#include "desksr/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "desksr/error.hpp"
#include "desksr/rng.hpp"

namespace desksr::corpus {

ChordTones chord_tones(std::size_t index) {
  ChordTones tones;
  tones.low_hz = kChordBaseHz + kChordSpacingHz * static_cast<double>(index);
  tones.high_hz = tones.low_hz + kChordPartnerHz;
  if (tones.high_hz >= kSpeechBandHz) {
    throw InvalidArgument("alphabet too large: symbol " + std::to_string(index) + " needs a " +
                          std::to_string(tones.high_hz) + " Hz tone, beyond the 4 kHz budget");
  }
  return tones;
}

dsp::Signal char_chord(const ctc::Alphabet& alphabet, std::string_view symbol,
                       double sample_rate_hz, double char_ms) {
  const auto index = static_cast<std::size_t>(alphabet.label_of(symbol) - 1);
  const auto tones = chord_tones(index);
  const double freqs[] = {tones.low_hz, tones.high_hz};
  const double amps[] = {kChordAmplitude, kChordAmplitude};
  return dsp::synthesize_tones(freqs, amps, char_ms / 1000.0, sample_rate_hz);
}

Utterance synth_utterance(std::string_view text, const ctc::Alphabet& alphabet,
                          double sample_rate_hz, double char_ms, std::string id) {
  if (text.empty()) throw InvalidArgument("synth_utterance: transcript must be non-empty");
  const auto labels = alphabet.encode(text);
  const std::size_t per_char = dsp::ms_to_samples(char_ms, sample_rate_hz);
  std::vector<double> samples;
  samples.reserve(labels.size() * per_char);
  for (int label : labels) {
    const auto& symbol = alphabet.symbol(label);
    if (symbol == " ") {
      samples.insert(samples.end(), per_char, 0.0);
      continue;
    }
    const auto chord = char_chord(alphabet, symbol, sample_rate_hz, char_ms);
    samples.insert(samples.end(), chord.samples.begin(), chord.samples.end());
  }
  return Utterance{std::move(id), dsp::make_signal(std::move(samples), sample_rate_hz),
                   std::string(text)};
}

std::filesystem::path Manifest::resolve(const ManifestEntry& entry) const {
  const std::filesystem::path p(entry.audio);
  return p.is_absolute() ? p : base_dir / p;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) {
    const nlohmann::json line = {{"id", e.id},
                                 {"audio", e.audio},
                                 {"transcript", e.transcript},
                                 {"sample_rate_hz", e.sample_rate_hz}};
    out << line.dump() << '\n';
  }
  if (!out) throw DataError("short write to " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest manifest;
  manifest.base_dir = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.id = j.at("id").get<std::string>();
      e.audio = j.at("audio").get<std::string>();
      e.transcript = j.at("transcript").get<std::string>();
      e.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    } catch (const nlohmann::json::exception& err) {
      throw DataError("malformed manifest line " + where + ": " + err.what());
    }
    if (e.id.empty()) throw DataError("manifest line " + where + " has an empty id");
    if (!ids.insert(e.id).second) throw DataError("duplicate manifest id '" + e.id + "'");
    if (e.transcript.empty()) throw DataError("utterance '" + e.id + "' has an empty transcript");
    if (!(e.sample_rate_hz > 0.0)) throw DataError("utterance '" + e.id + "' has a non-positive sample rate");
    if (!std::filesystem::exists(manifest.resolve(e))) {
      throw DataError("utterance '" + e.id + "': audio file " + manifest.resolve(e).string() +
                      " does not exist");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

dsp::Signal load_audio(const Manifest& manifest, const ManifestEntry& entry) {
  const auto path = manifest.resolve(entry);
  if (!std::filesystem::exists(path)) {
    throw DataError("utterance '" + entry.id + "': audio file " + path.string() + " does not exist");
  }
  try {
    return dsp::read_pcm16(path, entry.sample_rate_hz);
  } catch (const DataError& e) {
    throw DataError("utterance '" + entry.id + "': " + e.what());
  }
}

std::vector<std::string> random_transcripts(const ctc::Alphabet& alphabet, const CorpusOptions& options) {
  if (options.count < 1) throw InvalidArgument("corpus size must be >= 1");
  if (options.min_len < 1 || options.min_len > options.max_len) {
    throw InvalidArgument("corpus length range must satisfy 1 <= min <= max");
  }
  std::vector<std::string> letters;
  bool has_space = false;
  for (const auto& s : alphabet.symbols()) {
    if (s == " ") has_space = true;
    else letters.push_back(s);
  }
  if (letters.empty()) throw InvalidArgument("alphabet needs at least one non-space symbol");

  Rng rng(options.seed);
  std::vector<std::string> out;
  out.reserve(options.count);
  const auto span = options.max_len - options.min_len + 1;
  for (std::size_t n = 0; n < options.count; ++n) {
    const std::size_t len = options.min_len + static_cast<std::size_t>(rng.below(span));
    std::string text;
    bool prev_space = true;
    for (std::size_t i = 0; i < len; ++i) {
      const bool space_allowed = has_space && !prev_space && i + 1 < len;
      const std::size_t choices = letters.size() + (space_allowed ? 1 : 0);
      const auto pick = static_cast<std::size_t>(rng.below(choices));
      if (pick == letters.size()) {
        text += ' ';
        prev_space = true;
      } else {
        text += letters[pick];
        prev_space = false;
      }
    }
    out.push_back(std::move(text));
  }
  return out;
}

Manifest synth_corpus(const ctc::Alphabet& alphabet, const CorpusOptions& options,
                      const std::filesystem::path& out_dir) {
  const auto transcripts = random_transcripts(alphabet, options);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw DataError("cannot create output directory " + out_dir.string());
  }
  Manifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t n = 0; n < transcripts.size(); ++n) {
    char id[32];
    std::snprintf(id, sizeof id, "utt_%04zu", n);
    const auto utt = synth_utterance(transcripts[n], alphabet, options.sample_rate_hz,
                                     options.char_ms, id);
    const std::string file = std::string(id) + ".pcm";
    dsp::write_pcm16(out_dir / file, utt.audio);
    manifest.entries.push_back({utt.id, file, utt.transcript, options.sample_rate_hz});
  }
  save_manifest(manifest, out_dir / kManifestFileName);
  return manifest;
}

std::vector<train::TrainingExample> load_training_set(const Manifest& manifest,
                                                      const ctc::Alphabet& alphabet,
                                                      const dsp::FeatureConfig& features) {
  std::vector<train::TrainingExample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    train::TrainingExample ex;
    ex.id = e.id;
    try {
      ex.labels = alphabet.encode(e.transcript);
      ex.features = dsp::extract_features(load_audio(manifest, e), features).frames;
    } catch (const DataError& err) {
      throw DataError("utterance '" + e.id + "': " + err.what());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace desksr::corpus
