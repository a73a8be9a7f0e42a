#pragma once

#include <string>
#include <vector>

#include "core/dsp.hpp"

namespace svc {

enum class SvcfKind : uint32_t { Features = 0, F0 = 1 };

struct SvcfContent {
  SvcfKind kind = SvcfKind::Features;
  uint32_t n_frames = 0;
  uint32_t dim = 0;
  uint32_t hop_samples = 0;
  uint32_t sample_rate = 0;
  std::vector<float> data;  // row-major [n_frames][dim]
};

// Layout: magic "SVCF", u32 version=1, u32 kind, u32 n_frames, u32 dim,
// u32 hop_samples, u32 sample_rate, then n_frames*dim float32, all LE.
std::vector<uint8_t> encode_svcf(const SvcfContent& c);
SvcfContent decode_svcf(const std::vector<uint8_t>& bytes, const std::string& origin);

void write_svcf(const std::string& path, const SvcfContent& c);
SvcfContent read_svcf(const std::string& path);

SvcfContent features_to_svcf(const FrameFeatures& f);
SvcfContent f0_to_svcf(const F0Track& t);
FrameFeatures svcf_to_features(const SvcfContent& c, const std::string& provider_id);
F0Track svcf_to_f0(const SvcfContent& c);

}  // namespace svc
