#pragma once

#include <string>
#include <vector>

#include "core/common.hpp"

namespace svc {

struct Waveform {
  std::vector<Real> samples;
  int sample_rate = 0;

  long length() const { return static_cast<long>(samples.size()); }
  double seconds() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

struct WavWriteStats {
  long clipped = 0;  // samples clamped into [-1, 1] on write
};

// Mono RIFF/WAVE, PCM16 LE or IEEE float32. Any other layout is an error;
// there is no resampler, so the container rate must match expected_rate
// (pass 0 to accept whatever the file declares).
Waveform read_wav(const std::string& path, int expected_rate = 0);

WavWriteStats write_wav(const std::string& path, const Waveform& w);

struct Segment {
  Waveform audio;
  long offset = 0;   // start sample in the source waveform
  long padding = 0;  // zero samples appended to reach seg_len
};

// Windows [i*hop, i*hop + seg_len); the final partial window is zero padded.
// strict rejects inputs shorter than one segment.
std::vector<Segment> segment(const Waveform& w, long seg_len, long hop, bool strict = false);

}  // namespace svc
