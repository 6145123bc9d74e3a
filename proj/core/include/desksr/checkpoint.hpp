// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "desksr/ctc.hpp"
#include "desksr/dsp.hpp"
#include "desksr/lm.hpp"
#include "desksr/nn.hpp"

namespace desksr::train {

/// Current on-disk version. Loading any other version fails.
inline constexpr int kCheckpointFormatVersion = 1;

/// Version field present but not one we can read.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Everything needed to transcribe audio: network, alphabet and the feature
/// settings it was trained with.
struct AcousticModel {
  ctc::Alphabet alphabet;
  dsp::FeatureConfig features;
  nn::ModelParams params;
};

// JSON document: format_version, model_kind ("acoustic" | "lm"), alphabet,
// sizes, and every tensor as {"shape": [rows, cols], "data": [row-major]}.
void save_checkpoint(const AcousticModel& model, const std::filesystem::path& path);
AcousticModel load_checkpoint(const std::filesystem::path& path);

void save_lm_checkpoint(const lm::CharLm& lm, const std::filesystem::path& path);
lm::CharLm load_lm_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const AcousticModel& model);
AcousticModel parse_checkpoint(const std::string& text);
std::string serialize_lm_checkpoint(const lm::CharLm& lm);
lm::CharLm parse_lm_checkpoint(const std::string& text);

}  // namespace desksr::train
