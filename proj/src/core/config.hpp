#pragma once

#include <array>
#include <string>
#include <vector>

#include "core/features.hpp"
#include "core/losses.hpp"
#include "core/nets.hpp"
#include "core/training.hpp"

namespace svc {

struct RunConfig {
  int sample_rate = 16000;
  long hop = 256;
  uint64_t seed = 0;
  std::string corpus_dir;
  std::string output_dir = "out";

  std::string feature_provider = "builtin";  // builtin | svcf
  std::string features_dir;
  long feature_frame_size = 1024;
  F0Params f0;

  ModelConfig model;
  TrainConfig train;
  LossWeights loss_weights;
  SpectralScaleSet scales = SpectralScaleSet::defaults();

  long stream_chunk = 16000;

  FeatureParams feature_params() const {
    return FeatureParams{hop, feature_frame_size, f0};
  }
  void validate() const;
};

RunConfig default_config();

// Strict parse: unknown keys anywhere in the tree are rejected.
RunConfig config_from_json_text(const std::string& text, const std::string& origin);
RunConfig load_config_file(const std::string& path);

// Canonical dump (sorted keys); reloadable through config_from_json_text.
std::string config_to_json_text(const RunConfig& cfg);

// Dotted-path override with a JSON literal or bare string value.
void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

std::array<uint8_t, 32> config_hash(const RunConfig& cfg);

}  // namespace svc
