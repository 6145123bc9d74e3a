// SPDX-License-Identifier: Apache-2.0
#include "desksr/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "desksr/decode.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace desksr::train {
namespace {

using nlohmann::json;

AcousticModel small_model() {
  AcousticModel m;
  m.alphabet = ctc::Alphabet::from_chars("AB ");
  m.features.fft_size = 256;
  m.features.window = dsp::WindowKind::kHann;
  m.params = nn::init_params({2, 4, 5, 3}, 17);
  // Values that do not survive a naive decimal print.
  m.params.b_y << 1.0 / 3.0, -2.0e-300, 0.1 + 0.2, std::nextafter(1.0, 2.0);
  return m;
}

template <class P>
bool bit_identical(const P& a, const P& b) {
  const auto x = nn::tensor_spans(a);
  const auto y = nn::tensor_spans(b);
  if (x.size() != y.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].size() != y[k].size()) return false;
    if (std::memcmp(x[k].data(), y[k].data(), x[k].size() * sizeof(double)) != 0) return false;
  }
  return true;
}

TEST(CheckpointTest, RoundTripIsBitIdentical) {
  testing::TempDir dir;
  const auto model = small_model();
  save_checkpoint(model, dir / "m.json");
  const auto loaded = load_checkpoint(dir / "m.json");
  EXPECT_TRUE(bit_identical(model.params, loaded.params));
  EXPECT_EQ(loaded.alphabet, model.alphabet);
  EXPECT_EQ(loaded.params.sizes(), model.params.sizes());
  EXPECT_EQ(loaded.features.fft_size, 256u);
  EXPECT_EQ(loaded.features.window, dsp::WindowKind::kHann);
  EXPECT_EQ(loaded.features.frame_ms, model.features.frame_ms);
  EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(model));
}

TEST(CheckpointTest, TranscriptionUnchangedByRoundTrip) {
  const auto model = small_model();
  const auto loaded = parse_checkpoint(serialize_checkpoint(model));
  Rng rng(3);
  const auto x = testing::random_matrix(12, 5, 1.0, rng);
  const auto before = nn::forward_full(model.params, x);
  const auto after = nn::forward_full(loaded.params, x);
  EXPECT_EQ(before.log_probs, after.log_probs);
  EXPECT_EQ(model.alphabet.decode(decode::greedy_decode(before.log_probs).transcript),
            loaded.alphabet.decode(decode::greedy_decode(after.log_probs).transcript));
}

TEST(CheckpointTest, DocumentLayout) {
  const auto doc = json::parse(serialize_checkpoint(small_model()));
  EXPECT_EQ(doc.at("format_version"), 1);
  EXPECT_EQ(doc.at("model_kind"), "acoustic");
  EXPECT_EQ(doc.at("alphabet"), (std::vector<std::string>{"A", "B", " "}));
  const auto& w = doc.at("tensors").at("out.w_yf");
  EXPECT_EQ(w.at("shape"), (std::vector<int>{4, 4}));
  EXPECT_EQ(w.at("data").size(), 16u);
  EXPECT_EQ(doc.at("tensors").at("layer1.bwd.w_xi").at("shape"), (std::vector<int>{4, 8}));
}

TEST(CheckpointTest, WrongVersionIsVersionError) {
  auto doc = json::parse(serialize_checkpoint(small_model()));
  doc["format_version"] = 999;
  EXPECT_THROW(parse_checkpoint(doc.dump()), VersionError);
  doc["format_version"] = "1";
  EXPECT_THROW(parse_checkpoint(doc.dump()), VersionError);
}

TEST(CheckpointTest, TruncatedFileIsFormatError) {
  testing::TempDir dir;
  const std::string text = serialize_checkpoint(small_model());
  {
    std::ofstream out(dir / "cut.json");
    out << text.substr(0, text.size() / 2);
  }
  EXPECT_THROW(load_checkpoint(dir / "cut.json"), FormatError);
  EXPECT_THROW(parse_checkpoint(""), FormatError);
  EXPECT_THROW(parse_checkpoint("[1, 2]"), FormatError);
}

TEST(CheckpointTest, InconsistentShapesAreFormatErrors) {
  const auto base = json::parse(serialize_checkpoint(small_model()));

  auto shape = base;
  shape["tensors"]["out.b_y"]["shape"] = {5, 1};
  EXPECT_THROW(parse_checkpoint(shape.dump()), FormatError);

  auto count = base;
  count["tensors"]["out.b_y"]["data"].erase(0);
  EXPECT_THROW(parse_checkpoint(count.dump()), FormatError);

  auto missing = base;
  missing["tensors"].erase("layer0.fwd.w_co");
  EXPECT_THROW(parse_checkpoint(missing.dump()), FormatError);

  auto extra = base;
  extra["tensors"]["stray"] = {{"shape", {1, 1}}, {"data", {0.0}}};
  EXPECT_THROW(parse_checkpoint(extra.dump()), FormatError);

  auto labels = base;
  labels["sizes"]["labels"] = 4;
  EXPECT_THROW(parse_checkpoint(labels.dump()), FormatError);

  auto type = base;
  type["tensors"]["out.b_y"]["data"][0] = "x";
  EXPECT_THROW(parse_checkpoint(type.dump()), FormatError);
}

TEST(CheckpointTest, KindAndMissingFile) {
  EXPECT_THROW(parse_lm_checkpoint(serialize_checkpoint(small_model())), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/desksr/model.json"), DataError);
}

TEST(LmCheckpointTest, RoundTripIsBitIdentical) {
  testing::TempDir dir;
  const auto lm = lm::init_lm(ctc::Alphabet::from_chars("XYZ"), 6, 4);
  save_lm_checkpoint(lm, dir / "lm.json");
  const auto loaded = load_lm_checkpoint(dir / "lm.json");
  EXPECT_TRUE(bit_identical(lm, loaded));
  EXPECT_EQ(loaded.alphabet, lm.alphabet);
  const std::vector<int> seq{1, 3, 2};
  EXPECT_EQ(lm::lm_score(lm, seq), lm::lm_score(loaded, seq));
  EXPECT_EQ(json::parse(serialize_lm_checkpoint(lm)).at("model_kind"), "lm");
  EXPECT_THROW(parse_checkpoint(serialize_lm_checkpoint(lm)), FormatError);
}

}  // namespace
}  // namespace desksr::train
