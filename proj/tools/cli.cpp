// SPDX-License-Identifier: Apache-2.0
#include "desksr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "desksr/checkpoint.hpp"
#include "desksr/corpus.hpp"
#include "desksr/ctc.hpp"
#include "desksr/decode.hpp"
#include "desksr/dsp.hpp"
#include "desksr/error.hpp"
#include "desksr/lm.hpp"
#include "desksr/nn.hpp"
#include "desksr/train.hpp"

namespace desksr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}

// Alphabet flags shared by the commands that need one.
struct AlphabetFlags {
  std::string file;
  std::string chars;

  void add(CLI::App* app) {
    auto* f = app->add_option("--alphabet", file, "Alphabet file, one symbol per line");
    app->add_option("--chars", chars, "Alphabet given inline, one symbol per character")->excludes(f);
  }

  ctc::Alphabet resolve() const {
    if (!file.empty()) return ctc::Alphabet::load(file);
    if (!chars.empty()) return ctc::Alphabet::from_chars(chars);
    return ctc::Alphabet::english();
  }
};

struct FeatureFlags {
  dsp::FeatureConfig config;
  std::string window = "rectangular";

  void add(CLI::App* app) {
    app->add_option("--frame-ms", config.frame_ms, "Analysis window length")->capture_default_str();
    app->add_option("--hop-ms", config.hop_ms, "Hop between windows")->capture_default_str();
    app->add_option("--fft-size", config.fft_size, "FFT length, 0 for the next power of two")
        ->capture_default_str();
    app->add_option("--window", window, "Taper")
        ->check(CLI::IsMember({"rectangular", "hann"}))
        ->capture_default_str();
  }

  dsp::FeatureConfig resolve() const {
    auto c = config;
    c.window = window == "hann" ? dsp::WindowKind::kHann : dsp::WindowKind::kRectangular;
    return c;
  }
};

// Training knobs: defaults come from TrainConfig, then --config, then flags.
struct TrainFlags {
  std::string config_path;
  train::TrainConfig config;
  std::uint64_t seed = 0;
  int layers = 2;
  int hidden = 32;
  std::vector<std::pair<CLI::Option*, std::function<void()>>> overrides;

  template <class T>
  void flag(CLI::App* app, const std::string& name, T& target, T& staged, const std::string& help) {
    auto* opt = app->add_option(name, staged, help);
    overrides.emplace_back(opt, [&target, &staged] { target = staged; });
  }

  struct Staged {
    double learning_rate = 0, momentum = 0, clip_norm = 0, dropout_p = 0, weight_noise_std = 0;
    int epochs = 0, layers = 0, hidden = 0;
    bool shuffle = true;
  } staged;

  void add(CLI::App* app, bool model_shape, bool regularizers) {
    app->add_option("--config", config_path, "JSON file with training settings; flags take precedence");
    app->add_option("--seed", seed, "Seed for initialization, shuffling, noise and dropout")->required();
    flag(app, "--epochs", config.epochs, staged.epochs, "Passes over the data");
    flag(app, "--lr", config.learning_rate, staged.learning_rate, "SGD learning rate");
    flag(app, "--momentum", config.momentum, staged.momentum, "SGD momentum");
    flag(app, "--clip", config.clip_norm, staged.clip_norm, "Global gradient-norm clip");
    if (regularizers) {
      flag(app, "--dropout", config.dropout_p, staged.dropout_p, "Inter-layer dropout rate");
      flag(app, "--weight-noise", config.weight_noise_std, staged.weight_noise_std, "Weight noise std");
    }
    auto* shuffle = app->add_flag("--shuffle,!--no-shuffle", staged.shuffle, "Shuffle every epoch");
    overrides.emplace_back(shuffle, [this] { config.shuffle = staged.shuffle; });
    if (model_shape) flag(app, "--layers", layers, staged.layers, "Bidirectional LSTM layers");
    flag(app, "--hidden", hidden, staged.hidden, "LSTM cells per direction");
  }

  void resolve() {
    if (!config_path.empty()) apply_file();
    for (auto& [opt, set] : overrides) {
      if (opt->count() > 0) set();
    }
    config.seed = seed;
    config.validate();
    if (layers < 1 || hidden < 1) throw InvalidArgument("layers and hidden must be >= 1");
  }

  void apply_file() {
    std::ifstream in(config_path);
    if (!in) throw DataError("cannot open config " + config_path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("malformed config " + config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw DataError("config " + config_path + " must be a JSON object");
    try {
      for (const auto& [key, value] : doc.items()) {
        if (key == "learning_rate") config.learning_rate = value.get<double>();
        else if (key == "momentum") config.momentum = value.get<double>();
        else if (key == "clip_norm") config.clip_norm = value.get<double>();
        else if (key == "dropout_p") config.dropout_p = value.get<double>();
        else if (key == "weight_noise_std") config.weight_noise_std = value.get<double>();
        else if (key == "epochs") config.epochs = value.get<int>();
        else if (key == "shuffle") config.shuffle = value.get<bool>();
        else if (key == "seed") config.seed = value.get<std::uint64_t>();
        else if (key == "layers") layers = value.get<int>();
        else if (key == "hidden") hidden = value.get<int>();
        else throw DataError("config " + config_path + ": unknown key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw DataError("config " + config_path + ": " + e.what());
    }
  }
};

struct DecodeFlags {
  std::size_t beam = 0;
  bool normalize = false;

  void add(CLI::App* app, std::size_t default_beam) {
    beam = default_beam;
    app->add_option("--beam", beam, "Beam width, 0 for greedy decoding")->capture_default_str();
    app->add_flag("--normalize", normalize, "Rank by log probability per symbol");
  }
};

Eigen::MatrixXd acoustic_log_probs(const train::AcousticModel& model, const dsp::Signal& signal,
                                   const std::string& what) {
  const auto feats = dsp::extract_features(signal, model.features);
  const auto expected = model.params.sizes().input;
  if (feats.frames.cols() != expected) {
    throw DataError(what + ": " + std::to_string(feats.frames.cols()) + " features per frame at " +
                    num(signal.sample_rate_hz) + " Hz, model expects " + std::to_string(expected));
  }
  return nn::forward_full(model.params, feats.frames).log_probs;
}

std::vector<decode::Hypothesis> decode_nbest(const Eigen::MatrixXd& log_probs, std::size_t beam,
                                             std::size_t n, bool normalize) {
  if (beam == 0) return {decode::greedy_decode(log_probs)};
  auto hyps = decode::beam_search(log_probs, std::max(beam, n), n);
  return normalize ? decode::sort_nbest(std::move(hyps), true) : hyps;
}

void print_nbest(std::ostream& out, const std::vector<decode::Hypothesis>& hyps, const ctc::Alphabet& alphabet,
                 bool with_lm) {
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto& h = hyps[i];
    out << i + 1 << '\t' << num(h.combined) << '\t' << num(h.log_p_acoustic) << '\t';
    if (with_lm) out << (h.log_p_lm ? num(*h.log_p_lm) : "") << '\t';
    out << alphabet.decode(h.transcript) << '\n';
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

// ---------------------------------------------------------------------------

struct SynthData {
  std::string out_dir;
  corpus::CorpusOptions options;
  AlphabetFlags alphabet;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synth-data", "Write a synthetic chord corpus, its manifest and alphabet");
    c->add_option("--out", out_dir, "Output directory")->required();
    c->add_option("--count", options.count, "Utterances")->capture_default_str();
    c->add_option("--min-len", options.min_len, "Shortest transcript")->capture_default_str();
    c->add_option("--max-len", options.max_len, "Longest transcript")->capture_default_str();
    c->add_option("--sr", options.sample_rate_hz, "Sample rate in Hz")->capture_default_str();
    c->add_option("--char-ms", options.char_ms, "Duration of one symbol")->capture_default_str();
    c->add_option("--seed", options.seed, "Transcript seed")->required();
    alphabet.add(c);
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto a = alphabet.resolve();
    const auto manifest = corpus::synth_corpus(a, options, out_dir);
    a.save(fs::path(out_dir) / "alphabet.txt");
    err << "wrote " << manifest.entries.size() << " utterances to " << out_dir << '\n';
    out << (fs::path(out_dir) / corpus::kManifestFileName).string() << '\n';
    return kOk;
  }
};

struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> amps;
  std::string audio;
  double sr = 0.0;
  double dur = 1.0;
  std::size_t fft_size = 0;
  std::string window = "rectangular";
  std::optional<double> max_hz;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("spectrum", "Magnitude spectrum as CSV rows frequency_hz,magnitude");
    auto* f = c->add_option("--freqs", freqs, "Comma-separated tone frequencies in Hz")->delimiter(',');
    c->add_option("--amps", amps, "Comma-separated amplitudes (default 1 each)")->delimiter(',')->needs(f);
    auto* a = c->add_option("--audio", audio, "16-bit PCM file instead of synthesized tones")->excludes(f);
    c->add_option("--sr", sr, "Sample rate in Hz")->required();
    c->add_option("--dur", dur, "Tone duration in seconds")->excludes(a)->capture_default_str();
    c->add_option("--fft-size", fft_size, "FFT length, 0 for the next power of two")->capture_default_str();
    c->add_option("--window", window, "Taper")->check(CLI::IsMember({"rectangular", "hann"}))->capture_default_str();
    c->add_option("--max-hz", max_hz, "Omit bins above this frequency");
  }

  int run(std::ostream& out, std::ostream&) {
    dsp::Signal signal;
    if (!audio.empty()) {
      signal = dsp::read_pcm16(audio, sr);
    } else {
      if (freqs.empty()) throw InvalidArgument("spectrum needs --freqs or --audio");
      if (amps.empty()) amps.assign(freqs.size(), 1.0);
      signal = dsp::synthesize_tones(freqs, amps, dur, sr);
    }
    const auto kind = window == "hann" ? dsp::WindowKind::kHann : dsp::WindowKind::kRectangular;
    const auto spec = dsp::signal_spectrum(signal, fft_size, kind);
    out << "frequency_hz,magnitude\n";
    for (std::size_t k = 0; k < spec.magnitudes.size(); ++k) {
      const double hz = static_cast<double>(k) * spec.bin_hz;
      if (max_hz && hz > *max_hz) break;
      out << num(hz) << ',' << num(spec.magnitudes[k]) << '\n';
    }
    return kOk;
  }
};

struct Train {
  std::string manifest;
  std::string model_out;
  TrainFlags train;
  FeatureFlags features;
  AlphabetFlags alphabet;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "Train an acoustic model; prints epoch, mean loss and CER");
    c->add_option("--manifest", manifest, "Training manifest (JSONL)")->required();
    c->add_option("--out", model_out, "Checkpoint to write")->required();
    train.add(c, true, true);
    features.add(c);
    alphabet.add(c);
  }

  int run(std::ostream& out, std::ostream& err) {
    train.resolve();
    train::AcousticModel model;
    model.alphabet = alphabet.resolve();
    model.features = features.resolve();
    const auto m = corpus::load_manifest(manifest);
    const auto data = corpus::load_training_set(m, model.alphabet, model.features);
    if (data.empty()) throw DataError("manifest " + manifest + " has no utterances");
    const nn::ModelSizes sizes{train.layers, train.hidden, static_cast<int>(data.front().features.cols()),
                               static_cast<int>(model.alphabet.size())};
    err << "training L=" << sizes.layers << " H=" << sizes.hidden << " F=" << sizes.input
        << " K=" << sizes.labels << " on " << data.size() << " utterances\n";
    auto result = train::train_acoustic(nn::init_params(sizes, train.config.seed), data, train.config,
                                        [&](const train::EpochStats& s) {
                                          out << s.epoch << '\t' << num(s.mean_loss) << '\t' << num(s.cer)
                                              << '\n';
                                        });
    model.params = std::move(result.model);
    train::save_checkpoint(model, model_out);
    err << "saved " << model_out << " after " << num(result.report.wall_seconds) << " s\n";
    return kOk;
  }
};

struct AudioInput {
  std::string audio;
  std::string manifest;
  double sr = 8000.0;

  void add(CLI::App* c) {
    auto* a = c->add_option("--audio", audio, "16-bit PCM file");
    auto* m = c->add_option("--manifest", manifest, "Manifest; one output block per utterance");
    a->excludes(m);
    c->add_option("--sr", sr, "Sample rate of --audio in Hz")->excludes(m)->capture_default_str();
  }

  // (id, signal) pairs in input order.
  std::vector<std::pair<std::string, dsp::Signal>> load() const {
    std::vector<std::pair<std::string, dsp::Signal>> items;
    if (!audio.empty()) {
      items.emplace_back(audio, dsp::read_pcm16(audio, sr));
    } else if (!manifest.empty()) {
      const auto m = corpus::load_manifest(manifest);
      for (const auto& e : m.entries) items.emplace_back(e.id, corpus::load_audio(m, e));
    } else {
      throw InvalidArgument("one of --audio or --manifest is required");
    }
    return items;
  }
};

struct Transcribe {
  std::string model_path;
  AudioInput input;
  DecodeFlags decode;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("transcribe", "Print the best transcript (id<TAB>text with --manifest)");
    c->add_option("--model", model_path, "Acoustic checkpoint")->required();
    input.add(c);
    decode.add(c, 0);
  }

  int run(std::ostream& out, std::ostream&) {
    const auto model = train::load_checkpoint(model_path);
    for (const auto& [id, signal] : input.load()) {
      const auto best = decode_nbest(acoustic_log_probs(model, signal, id), decode.beam, 1, decode.normalize);
      if (!input.manifest.empty()) out << id << '\t';
      out << model.alphabet.decode(best.front().transcript) << '\n';
    }
    return kOk;
  }
};

struct Nbest {
  std::string model_path;
  AudioInput input;
  DecodeFlags decode;
  std::size_t n = 5;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("nbest", "Beam-search n-best list: rank, combined, log_p_acoustic, transcript");
    c->add_option("--model", model_path, "Acoustic checkpoint")->required();
    input.add(c);
    decode.add(c, 16);
    c->add_option("-n,--n", n, "Hypotheses to print")->check(CLI::PositiveNumber)->capture_default_str();
  }

  int run(std::ostream& out, std::ostream&) {
    if (decode.beam == 0) throw InvalidArgument("nbest needs --beam >= 1");
    const auto model = train::load_checkpoint(model_path);
    for (const auto& [id, signal] : input.load()) {
      if (!input.manifest.empty()) out << "# " << id << '\n';
      print_nbest(out, decode_nbest(acoustic_log_probs(model, signal, id), decode.beam, n, decode.normalize),
                  model.alphabet, false);
    }
    return kOk;
  }
};

struct Rescore {
  std::string nbest_path;
  std::string lm_path;
  double lambda = 1.0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand(
        "rescore", "Re-rank an nbest list with a language model: rank, combined, log_p_acoustic, log_p_lm, transcript");
    c->add_option("--nbest", nbest_path, "Output of the nbest command")->required();
    c->add_option("--lm", lm_path, "Language-model checkpoint")->required();
    c->add_option("--lambda", lambda, "LM weight")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream&) {
    const auto lm = train::load_lm_checkpoint(lm_path);
    std::vector<decode::Hypothesis> hyps;
    const auto lines = read_lines(nbest_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto& line = lines[i];
      if (line.empty() || line.front() == '#') continue;
      std::vector<std::string> fields;
      std::stringstream s(line);
      for (std::string f; std::getline(s, f, '\t');) fields.push_back(f);
      if (line.back() == '\t') fields.emplace_back();
      if (fields.size() < 4) {
        throw DataError(nbest_path + ":" + std::to_string(i + 1) + ": expected rank, combined, log_p_acoustic, transcript");
      }
      decode::Hypothesis h;
      try {
        h.log_p_acoustic = std::stod(fields[2]);
      } catch (const std::exception&) {
        throw DataError(nbest_path + ":" + std::to_string(i + 1) + ": bad log_p_acoustic '" + fields[2] + "'");
      }
      h.combined = h.log_p_acoustic;
      h.transcript = lm.alphabet.encode(fields.back());
      hyps.push_back(std::move(h));
    }
    print_nbest(out, lm::rescore(std::move(hyps), lm, lambda), lm.alphabet, true);
    return kOk;
  }
};

struct Evaluate {
  std::string manifest;
  std::string model_path;
  DecodeFlags decode;
  std::size_t nbest = 0;
  std::string lm_path;
  double lambda = 1.0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("evaluate",
                                 "Per-utterance id, CER, WER, reference, hypothesis; last row TOTAL, CER, WER");
    c->add_option("--manifest", manifest, "Evaluation manifest")->required();
    c->add_option("--model", model_path, "Acoustic checkpoint")->required();
    decode.add(c, 0);
    auto* n = c->add_option("--nbest", nbest, "Decode an n-best list and take its top entry");
    auto* l = c->add_option("--lm", lm_path, "Rescore the n-best list with this language model")->needs(n);
    c->add_option("--lambda", lambda, "LM weight")->needs(l)->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto model = train::load_checkpoint(model_path);
    std::optional<lm::CharLm> lm;
    if (!lm_path.empty()) lm = train::load_lm_checkpoint(lm_path);
    const auto m = corpus::load_manifest(manifest);
    decode::ErrorCounts totals;
    for (const auto& e : m.entries) {
      const auto log_probs = acoustic_log_probs(model, corpus::load_audio(m, e), e.id);
      std::vector<decode::Hypothesis> hyps;
      if (nbest > 0) {
        hyps = decode_nbest(log_probs, std::max<std::size_t>(decode.beam, 1), nbest, decode.normalize);
        if (lm) hyps = lm::rescore(std::move(hyps), *lm, lambda);
      } else {
        hyps = decode_nbest(log_probs, decode.beam, 1, decode.normalize);
      }
      const auto text = model.alphabet.decode(hyps.front().transcript);
      totals.add(e.transcript, text);
      out << e.id << '\t' << num(decode::cer(e.transcript, text)) << '\t' << num(decode::wer(e.transcript, text))
          << '\t' << e.transcript << '\t' << text << '\n';
    }
    out << "TOTAL\t" << num(totals.cer()) << '\t' << num(totals.wer()) << '\n';
    err << m.entries.size() << " utterances\n";
    return kOk;
  }
};

struct GradCheck {
  std::uint64_t seed = 0;
  nn::ModelSizes sizes{2, 5, 4, 3};
  int frames = 6;
  std::size_t target_len = 3;
  double step = 1e-5;
  double tol = 1e-3;
  double init_range = 1.0;
  double input_scale = 2.0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("gradcheck", "Finite-difference check of the LSTM + CTC gradients");
    c->add_option("--seed", seed, "Instance seed")->capture_default_str();
    c->add_option("--layers", sizes.layers)->capture_default_str();
    c->add_option("--hidden", sizes.hidden)->capture_default_str();
    c->add_option("--features", sizes.input)->capture_default_str();
    c->add_option("--labels", sizes.labels, "Alphabet size K")->capture_default_str();
    c->add_option("--frames", frames)->capture_default_str();
    c->add_option("--target-len", target_len)->capture_default_str();
    c->add_option("--step", step, "Central-difference step")->capture_default_str();
    c->add_option("--tol", tol, "Largest acceptable relative error")->capture_default_str();
    c->add_option("--init-range", init_range, "Weights uniform in [-r, r]")->capture_default_str();
    c->add_option("--input-scale", input_scale, "Features uniform in [-s, s]")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) {
    if (frames < 1) throw InvalidArgument("--frames must be >= 1");
    const auto model = nn::init_params(sizes, seed, init_range);
    Rng feature_rng = Rng::derive(seed, 1, 0);
    Rng label_rng = Rng::derive(seed, 2, 0);
    train::TrainingExample ex;
    ex.id = "gradcheck";
    ex.features.resize(frames, sizes.input);
    for (Eigen::Index k = 0; k < ex.features.size(); ++k) {
      ex.features.data()[k] = feature_rng.uniform(-input_scale, input_scale);
    }
    for (std::size_t i = 0; i < target_len; ++i) {
      ex.labels.push_back(1 + static_cast<int>(label_rng.below(static_cast<std::uint64_t>(sizes.labels))));
    }
    if (ctc::min_frames(ex.labels) > static_cast<std::size_t>(frames)) {
      throw InvalidArgument("target of length " + std::to_string(target_len) + " needs " +
                            std::to_string(ctc::min_frames(ex.labels)) + " frames, have " +
                            std::to_string(frames));
    }
    const auto r = train::grad_check(model, ex, step);
    out << "parameters\t" << r.checked << '\n'
        << "max_relative_error\t" << num(r.max_relative_error) << '\n'
        << "worst_parameter\t" << r.worst_tensor << '[' << r.worst_index << "]\n"
        << "analytic\t" << num(r.analytic) << '\n'
        << "numeric\t" << num(r.numeric) << '\n';
    if (!(r.max_relative_error < tol)) {
      err << "gradient check failed: " << num(r.max_relative_error) << " >= tolerance " << num(tol) << '\n';
      return kNumericFailure;
    }
    return kOk;
  }
};

struct TrainLm {
  std::string text;
  std::string manifest;
  std::string out_path;
  TrainFlags train;
  AlphabetFlags alphabet;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train-lm", "Train a character language model; prints epoch and loss");
    auto* t = c->add_option("--text", text, "Text corpus, one transcript per line");
    auto* m = c->add_option("--manifest", manifest, "Use a manifest's transcripts as the corpus");
    t->excludes(m);
    c->add_option("--out", out_path, "Checkpoint to write")->required();
    train.add(c, false, false);
    alphabet.add(c);
  }

  int run(std::ostream& out, std::ostream& err) {
    train.resolve();
    const auto a = alphabet.resolve();
    std::vector<std::string> lines;
    if (!text.empty()) {
      lines = read_lines(text);
    } else if (!manifest.empty()) {
      for (const auto& e : corpus::load_manifest(manifest).entries) lines.push_back(e.transcript);
    } else {
      throw InvalidArgument("one of --text or --manifest is required");
    }
    std::vector<ctc::LabelSequence> corpus_labels;
    for (const auto& line : lines) {
      if (!line.empty()) corpus_labels.push_back(a.encode(line));
    }
    const auto result = lm::lm_train(corpus_labels, a, train.hidden, train.config,
                                     [&](int epoch, double loss) { out << epoch << '\t' << num(loss) << '\n'; });
    train::save_lm_checkpoint(result.lm, out_path);
    err << "saved " << out_path << '\n';
    return kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Desk-scale speech recognition: features, CTC acoustic models, decoding and LM rescoring",
               "desksr"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SynthData synth;
  Spectrum spectrum;
  Train train_cmd;
  Transcribe transcribe;
  Nbest nbest;
  Rescore rescore;
  Evaluate evaluate;
  GradCheck gradcheck;
  TrainLm train_lm;
  synth.add(app);
  spectrum.add(app);
  train_cmd.add(app);
  transcribe.add(app);
  nbest.add(app);
  rescore.add(app);
  evaluate.add(app);
  gradcheck.add(app);
  train_lm.add(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const CLI::App* failing = &app;
    for (const auto* sub : app.get_subcommands()) failing = sub;
    err << "error: " << e.what() << "\n\n" << failing->help();
    return kUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth-data") return synth.run(out, err);
    if (name == "spectrum") return spectrum.run(out, err);
    if (name == "train") return train_cmd.run(out, err);
    if (name == "transcribe") return transcribe.run(out, err);
    if (name == "nbest") return nbest.run(out, err);
    if (name == "rescore") return rescore.run(out, err);
    if (name == "evaluate") return evaluate.run(out, err);
    if (name == "gradcheck") return gradcheck.run(out, err);
    if (name == "train-lm") return train_lm.run(out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  err << "error: unknown subcommand " << name << '\n';
  return kUsage;
}

}  // namespace desksr::cli
