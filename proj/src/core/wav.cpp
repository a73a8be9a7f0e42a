#include "core/wav.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace svc {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v & 0xff));
  out.push_back(uint8_t((v >> 8) & 0xff));
  out.push_back(uint8_t((v >> 16) & 0xff));
  out.push_back(uint8_t((v >> 24) & 0xff));
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v & 0xff));
  out.push_back(uint8_t((v >> 8) & 0xff));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

}  // namespace

Waveform read_wav(const std::string& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  SVC_CHECK(in.good(), ErrorCode::Io, "cannot open wav file: " << path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  SVC_CHECK(raw.size() >= 44, ErrorCode::Format, "not a RIFF/WAVE file (too short): " << path);
  SVC_CHECK(std::memcmp(raw.data(), "RIFF", 4) == 0 && std::memcmp(raw.data() + 8, "WAVE", 4) == 0,
            ErrorCode::Format, "not a RIFF/WAVE file: " << path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* tag = reinterpret_cast<const char*>(raw.data() + pos);
    uint32_t chunk_len = read_u32(raw.data() + pos + 4);
    size_t body = pos + 8;
    if (body + chunk_len > raw.size()) chunk_len = uint32_t(raw.size() - body);
    if (std::memcmp(tag, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = read_u16(raw.data() + body);
      channels = read_u16(raw.data() + body + 2);
      rate = read_u32(raw.data() + body + 4);
      bits = read_u16(raw.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = raw.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);
  }

  SVC_CHECK(have_fmt && data != nullptr, ErrorCode::Format, "missing fmt/data chunk: " << path);
  SVC_CHECK(channels == 1, ErrorCode::Format,
            "channel count != 1 (got " << channels << "): " << path);
  SVC_CHECK((format == kFormatPcm && bits == 16) || (format == kFormatFloat && bits == 32),
            ErrorCode::Format,
            "unsupported encoding (want PCM16 or float32, got format=" << format << " bits=" << bits
                                                                       << "): " << path);
  if (expected_rate > 0) {
    SVC_CHECK(int(rate) == expected_rate, ErrorCode::Format,
              "sample rate mismatch (file " << rate << " Hz, configured " << expected_rate
                                            << " Hz, no resampling): " << path);
  }

  Waveform w;
  w.sample_rate = int(rate);
  if (format == kFormatPcm) {
    const size_t n = data_len / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v = int16_t(uint16_t(data[2 * i]) | uint16_t(data[2 * i + 1]) << 8);
      w.samples[i] = Real(v / 32768.0);
    }
  } else {
    const size_t n = data_len / 4;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, data + 4 * i, 4);
      SVC_CHECK(std::isfinite(v), ErrorCode::Format, "non-finite sample in " << path);
      w.samples[i] = Real(std::clamp(v, -1.0f, 1.0f));
    }
  }
  SVC_CHECK(!w.samples.empty(), ErrorCode::Format, "empty wav data: " << path);
  return w;
}

WavWriteStats write_wav(const std::string& path, const Waveform& w) {
  SVC_CHECK(!w.samples.empty(), ErrorCode::InvalidArgument, "waveform length >= 1 violated");
  SVC_CHECK(w.sample_rate > 0, ErrorCode::InvalidArgument, "sample_rate must be positive");

  WavWriteStats stats;
  const uint32_t n = uint32_t(w.samples.size());
  std::vector<uint8_t> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, uint32_t(w.sample_rate));
  put_u32(out, uint32_t(w.sample_rate) * 2);  // byte rate
  put_u16(out, 2);                            // block align
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);

  for (uint32_t i = 0; i < n; ++i) {
    double v = double(w.samples[i]);
    if (v > 1.0 || v < -1.0) {
      ++stats.clipped;
      v = std::clamp(v, -1.0, 1.0);
    }
    // round-to-nearest; +1.0 maps to 32767
    long q = std::lround(v * 32768.0);
    q = std::clamp(q, -32768l, 32767l);
    put_u16(out, uint16_t(int16_t(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  SVC_CHECK(f.good(), ErrorCode::Io, "cannot write wav file: " << path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  SVC_CHECK(f.good(), ErrorCode::Io, "write failed: " << path);
  return stats;
}

std::vector<Segment> segment(const Waveform& w, long seg_len, long hop, bool strict) {
  SVC_CHECK(seg_len >= 1 && hop >= 1, ErrorCode::InvalidArgument, "seg_len and hop must be >= 1");
  const long T = w.length();
  SVC_CHECK(T >= 1, ErrorCode::InvalidArgument, "waveform length >= 1 violated");
  if (strict) {
    SVC_CHECK(seg_len <= T, ErrorCode::InvalidArgument,
              "segment length " << seg_len << " exceeds waveform length " << T);
  }

  const long n = (std::max(T - seg_len, 0l) + hop - 1) / hop + 1;
  std::vector<Segment> out;
  out.reserve(size_t(n));
  for (long i = 0; i < n; ++i) {
    Segment s;
    s.offset = i * hop;
    s.audio.sample_rate = w.sample_rate;
    s.audio.samples.assign(size_t(seg_len), Real(0));
    const long avail = std::max(0l, std::min(seg_len, T - s.offset));
    for (long t = 0; t < avail; ++t) s.audio.samples[size_t(t)] = w.samples[size_t(s.offset + t)];
    s.padding = seg_len - avail;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace svc
