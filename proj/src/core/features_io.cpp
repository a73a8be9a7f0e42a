#include "core/features_io.hpp"

#include <cstring>
#include <fstream>

namespace svc {

namespace {

constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v & 0xff));
  out.push_back(uint8_t((v >> 8) & 0xff));
  out.push_back(uint8_t((v >> 16) & 0xff));
  out.push_back(uint8_t((v >> 24) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

std::vector<uint8_t> encode_svcf(const SvcfContent& c) {
  SVC_CHECK(c.data.size() == size_t(c.n_frames) * c.dim, ErrorCode::InvalidArgument,
            "svcf payload size mismatch");
  std::vector<uint8_t> out;
  out.reserve(28 + c.data.size() * 4);
  out.insert(out.end(), {'S', 'V', 'C', 'F'});
  put_u32(out, kVersion);
  put_u32(out, uint32_t(c.kind));
  put_u32(out, c.n_frames);
  put_u32(out, c.dim);
  put_u32(out, c.hop_samples);
  put_u32(out, c.sample_rate);
  for (float v : c.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  return out;
}

SvcfContent decode_svcf(const std::vector<uint8_t>& bytes, const std::string& origin) {
  SVC_CHECK(bytes.size() >= 28, ErrorCode::Format, "truncated payload: " << origin);
  SVC_CHECK(std::memcmp(bytes.data(), "SVCF", 4) == 0, ErrorCode::Format, "bad magic: " << origin);
  const uint32_t version = get_u32(bytes.data() + 4);
  SVC_CHECK(version == kVersion, ErrorCode::Format,
            "version mismatch (got " << version << ", want " << kVersion << "): " << origin);
  SvcfContent c;
  const uint32_t kind = get_u32(bytes.data() + 8);
  SVC_CHECK(kind <= 1, ErrorCode::Format, "unknown feature kind " << kind << ": " << origin);
  c.kind = SvcfKind(kind);
  c.n_frames = get_u32(bytes.data() + 12);
  c.dim = get_u32(bytes.data() + 16);
  c.hop_samples = get_u32(bytes.data() + 20);
  c.sample_rate = get_u32(bytes.data() + 24);
  if (c.kind == SvcfKind::F0)
    SVC_CHECK(c.dim == 2, ErrorCode::Format, "f0 track must have dim 2: " << origin);

  const size_t want = size_t(c.n_frames) * c.dim;
  SVC_CHECK(bytes.size() >= 28 + want * 4, ErrorCode::Format, "truncated payload: " << origin);
  c.data.resize(want);
  for (size_t i = 0; i < want; ++i) {
    const uint32_t bits = get_u32(bytes.data() + 28 + i * 4);
    float v;
    std::memcpy(&v, &bits, 4);
    c.data[i] = v;
  }
  return c;
}

void write_svcf(const std::string& path, const SvcfContent& c) {
  const auto bytes = encode_svcf(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  SVC_CHECK(f.good(), ErrorCode::Io, "cannot write feature file: " << path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  SVC_CHECK(f.good(), ErrorCode::Io, "write failed: " << path);
}

SvcfContent read_svcf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  SVC_CHECK(in.good(), ErrorCode::Io, "cannot open feature file: " << path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_svcf(bytes, path);
}

SvcfContent features_to_svcf(const FrameFeatures& f) {
  SvcfContent c;
  c.kind = SvcfKind::Features;
  c.n_frames = uint32_t(f.n_frames());
  c.dim = uint32_t(f.dim);
  c.hop_samples = uint32_t(f.grid.hop);
  c.sample_rate = uint32_t(f.grid.sample_rate);
  c.data.assign(f.values.begin(), f.values.end());
  return c;
}

SvcfContent f0_to_svcf(const F0Track& t) {
  SvcfContent c;
  c.kind = SvcfKind::F0;
  c.n_frames = uint32_t(t.n_frames());
  c.dim = 2;
  c.hop_samples = uint32_t(t.grid.hop);
  c.sample_rate = uint32_t(t.grid.sample_rate);
  c.data.resize(size_t(c.n_frames) * 2);
  for (uint32_t i = 0; i < c.n_frames; ++i) {
    c.data[i * 2] = float(t.f0_hz[i]);
    c.data[i * 2 + 1] = float(t.confidence[i]);
  }
  return c;
}

FrameFeatures svcf_to_features(const SvcfContent& c, const std::string& provider_id) {
  SVC_CHECK(c.kind == SvcfKind::Features, ErrorCode::InvalidArgument, "not a feature-kind file");
  FrameFeatures f;
  f.dim = long(c.dim);
  f.grid.frame_size = long(c.hop_samples);
  f.grid.hop = long(c.hop_samples);
  f.grid.n_frames = long(c.n_frames);
  f.grid.sample_rate = int(c.sample_rate);
  f.provider_id = provider_id;
  f.values.assign(c.data.begin(), c.data.end());
  return f;
}

F0Track svcf_to_f0(const SvcfContent& c) {
  SVC_CHECK(c.kind == SvcfKind::F0, ErrorCode::InvalidArgument, "not an f0-kind file");
  F0Track t;
  t.grid.frame_size = long(c.hop_samples);
  t.grid.hop = long(c.hop_samples);
  t.grid.n_frames = long(c.n_frames);
  t.grid.sample_rate = int(c.sample_rate);
  t.f0_hz.resize(c.n_frames);
  t.confidence.resize(c.n_frames);
  t.voiced.resize(c.n_frames);
  for (uint32_t i = 0; i < c.n_frames; ++i) {
    t.f0_hz[i] = double(c.data[i * 2]);
    t.confidence[i] = double(c.data[i * 2 + 1]);
    t.voiced[i] = t.f0_hz[i] > 0.0 ? 1 : 0;
  }
  return t;
}

}  // namespace svc
