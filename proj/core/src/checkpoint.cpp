// SPDX-License-Identifier: Apache-2.0
#include "desksr/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "desksr/error.hpp"

namespace desksr::train {
namespace {

using nlohmann::json;

template <class P>
json tensors_to_json(const P& params) {
  json out = json::object();
  params.for_each_tensor([&](const std::string& name, const auto& t) {
    json data = json::array();
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    }
    out[name] = {{"shape", {t.rows(), t.cols()}}, {"data", std::move(data)}};
  });
  return out;
}

template <class P>
void tensors_from_json(const json& doc, P& params) {
  const json& tensors = doc.at("tensors");
  std::size_t seen = 0;
  params.for_each_tensor([&](const std::string& name, auto& t) {
    if (!tensors.contains(name)) throw FormatError("checkpoint is missing tensor '" + name + "'");
    const json& entry = tensors.at(name);
    const auto rows = entry.at("shape").at(0).template get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).template get<Eigen::Index>();
    if (rows != t.rows() || cols != t.cols()) {
      throw FormatError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(t.rows()) + "x" +
                        std::to_string(t.cols()));
    }
    const json& data = entry.at("data");
    if (data.size() != static_cast<std::size_t>(rows * cols)) {
      throw FormatError("tensor '" + name + "' has " + std::to_string(data.size()) +
                        " values for shape " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = data[k++].template get<double>();
    }
    ++seen;
  });
  if (seen != tensors.size()) {
    throw FormatError("checkpoint has " + std::to_string(tensors.size()) + " tensors, expected " +
                      std::to_string(seen));
  }
}

json parse_document(const std::string& text, const std::string& expected_kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw FormatError("malformed checkpoint: no format_version");
  }
  const json& version = doc.at("format_version");
  if (!version.is_number_integer() || version.get<int>() != kCheckpointFormatVersion) {
    throw VersionError("unsupported checkpoint format_version " + version.dump() + " (expected " +
                       std::to_string(kCheckpointFormatVersion) + ")");
  }
  const std::string kind = doc.value("model_kind", std::string("acoustic"));
  if (kind != expected_kind) {
    throw FormatError("checkpoint holds a '" + kind + "' model, expected '" + expected_kind + "'");
  }
  return doc;
}

json sizes_to_json(const nn::ModelSizes& s) {
  return {{"layers", s.layers}, {"hidden", s.hidden}, {"input", s.input}, {"labels", s.labels}};
}

const char* window_name(dsp::WindowKind w) {
  return w == dsp::WindowKind::kHann ? "hann" : "rectangular";
}

dsp::WindowKind window_from_name(const std::string& name) {
  if (name == "rectangular") return dsp::WindowKind::kRectangular;
  if (name == "hann") return dsp::WindowKind::kHann;
  throw FormatError("unknown window '" + name + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << text;
  if (!out) throw DataError("short write to " + path.string());
}

template <class F>
auto with_format_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace

std::string serialize_checkpoint(const AcousticModel& model) {
  const auto& f = model.features;
  json doc = {
      {"format_version", kCheckpointFormatVersion},
      {"model_kind", "acoustic"},
      {"alphabet", model.alphabet.symbols()},
      {"sizes", sizes_to_json(model.params.sizes())},
      {"features",
       {{"frame_ms", f.frame_ms},
        {"hop_ms", f.hop_ms},
        {"fft_size", f.fft_size},
        {"cutoff_hz", f.cutoff_hz},
        {"window", window_name(f.window)},
        {"log_floor", f.log_floor},
        {"variance_floor", f.variance_floor}}},
      {"tensors", tensors_to_json(model.params)},
  };
  return doc.dump() + "\n";
}

AcousticModel parse_checkpoint(const std::string& text) {
  const json doc = parse_document(text, "acoustic");
  return with_format_errors([&] {
    AcousticModel model;
    model.alphabet = ctc::Alphabet(doc.at("alphabet").get<std::vector<std::string>>());
    const json& s = doc.at("sizes");
    nn::ModelSizes sizes;
    sizes.layers = s.at("layers").get<int>();
    sizes.hidden = s.at("hidden").get<int>();
    sizes.input = s.at("input").get<int>();
    sizes.labels = s.at("labels").get<int>();
    if (static_cast<std::size_t>(sizes.labels) != model.alphabet.size()) {
      throw FormatError("checkpoint sizes.labels disagrees with its alphabet");
    }
    try {
      model.params = nn::ModelParams::zeros(sizes);
    } catch (const InvalidArgument& e) {
      throw FormatError(std::string("checkpoint sizes invalid: ") + e.what());
    }
    const json& f = doc.at("features");
    model.features.frame_ms = f.at("frame_ms").get<double>();
    model.features.hop_ms = f.at("hop_ms").get<double>();
    model.features.fft_size = f.at("fft_size").get<std::size_t>();
    model.features.cutoff_hz = f.at("cutoff_hz").get<double>();
    model.features.window = window_from_name(f.at("window").get<std::string>());
    model.features.log_floor = f.at("log_floor").get<double>();
    model.features.variance_floor = f.at("variance_floor").get<double>();
    tensors_from_json(doc, model.params);
    return model;
  });
}

std::string serialize_lm_checkpoint(const lm::CharLm& lm) {
  json doc = {
      {"format_version", kCheckpointFormatVersion},
      {"model_kind", "lm"},
      {"alphabet", lm.alphabet.symbols()},
      {"sizes", {{"layers", 1}, {"hidden", lm.hidden_size()}, {"labels", lm.vocab()}}},
      {"tensors", tensors_to_json(lm)},
  };
  return doc.dump() + "\n";
}

lm::CharLm parse_lm_checkpoint(const std::string& text) {
  const json doc = parse_document(text, "lm");
  return with_format_errors([&] {
    const ctc::Alphabet alphabet(doc.at("alphabet").get<std::vector<std::string>>());
    const int hidden = doc.at("sizes").at("hidden").get<int>();
    if (hidden < 1) throw FormatError("checkpoint sizes.hidden must be >= 1");
    auto lm = lm::CharLm::zeros(alphabet, hidden);
    tensors_from_json(doc, lm);
    return lm;
  });
}

void save_checkpoint(const AcousticModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(model));
}

AcousticModel load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

void save_lm_checkpoint(const lm::CharLm& lm, const std::filesystem::path& path) {
  write_file(path, serialize_lm_checkpoint(lm));
}

lm::CharLm load_lm_checkpoint(const std::filesystem::path& path) {
  return parse_lm_checkpoint(read_file(path));
}

}  // namespace desksr::train
