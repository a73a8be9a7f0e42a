#pragma once

#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/framing.hpp"
#include "core/wav.hpp"

namespace svc {

struct Spectrogram {
  long n_frames = 0;
  long n_bins = 0;
  std::vector<double> mag;  // frame-major [n_frames][n_bins]

  double& at(long frame, long bin) { return mag[size_t(frame * n_bins + bin)]; }
  double at(long frame, long bin) const { return mag[size_t(frame * n_bins + bin)]; }
};

struct LoudnessTrack {
  std::vector<double> loud_db;
  FrameGrid grid;
};

struct F0Track {
  std::vector<double> f0_hz;  // 0 on unvoiced frames
  std::vector<uint8_t> voiced;
  std::vector<double> confidence;
  FrameGrid grid;

  long n_frames() const { return long(f0_hz.size()); }
};

struct FrameFeatures {
  long dim = 0;
  std::vector<Real> values;  // frame-major [n_frames][dim]
  FrameGrid grid;
  std::string provider_id;

  long n_frames() const { return dim > 0 ? long(values.size()) / dim : 0; }
};

struct SpectralScaleSet {
  std::vector<long> fft_sizes;

  static SpectralScaleSet defaults() { return SpectralScaleSet{{2048, 1024, 512, 256, 128, 64}}; }
  long hop_for(long fft_size) const { return fft_size / 4; }
  void validate() const;
};

// Periodic Hann of length n.
std::vector<double> hann_window(long n);

// Hann-windowed, reflect-centered magnitudes; frames = floor(T/hop)+1.
Spectrogram stft_magnitude(const Waveform& w, long fft_size, long hop);

// IEC 61672 A-curve, normalized to 0 dB at 1 kHz.
double a_weighting_db(double freq_hz);

struct F0Params {
  double fmin = 80.0;
  double fmax = 600.0;
  double threshold = 0.15;  // cumulative-mean-normalized difference cutoff
};

// Per-frame analyzers; the offline track extractors below and the streaming
// path run the same frame code, so their outputs are bit-identical.
class LoudnessAnalyzer {
 public:
  LoudnessAnalyzer(long fft_size, int sample_rate);
  double frame_db(const Waveform& w, long center) const;

 private:
  long fft_size_;
  std::vector<double> window_;
  std::vector<double> power_gain_;
};

class MelAnalyzer {
 public:
  MelAnalyzer(long fft_size, int sample_rate, long bands);
  long bands() const { return bands_; }
  void frame(const Waveform& w, long center, Real* out) const;

 private:
  long fft_size_;
  long bands_;
  std::vector<double> window_;
  std::vector<std::vector<double>> filters_;
};

class YinAnalyzer {
 public:
  YinAnalyzer(long frame_size, int sample_rate, const F0Params& params);

  struct FrameOut {
    double f0 = 0.0;
    bool voiced = false;
    double confidence = 0.0;
  };
  FrameOut frame(const Waveform& w, long center) const;

 private:
  long frame_size_;
  int sample_rate_;
  F0Params params_;
  long lag_min_, lag_max_, corr_len_;
};

LoudnessTrack a_weighted_loudness(const Waveform& w, const FrameGrid& grid);
F0Track estimate_f0(const Waveform& w, const FrameGrid& grid, const F0Params& params);

// Deterministic phonetic stand-in: 40-band log-mel stack ("melstack-v1").
constexpr long kMelBands = 40;
constexpr const char* kMelProviderId = "melstack-v1";
FrameFeatures phonetic_features(const Waveform& w, const FrameGrid& grid);

// Sine driven by the interpolated F0 contour with unit amplitude on voiced
// spans, zero on unvoiced, 10 ms linear ramps at span boundaries. Frames are
// pushed in order; samples become available once their lookahead (interp +
// ramp) is covered, so the streaming path can share the exact phase state.
class ExcitationSynth {
 public:
  ExcitationSynth(int sample_rate, long hop);

  void push_frame(double f0_hz, bool voiced);
  void finish();

  // Emits every sample that is ready into `out`; returns count emitted.
  long drain(std::vector<Real>& out);

  long emitted() const { return next_sample_; }

 private:
  double sample_f0(long t) const;
  bool sample_voiced(long t) const;
  double amplitude(long t) const;

  int sample_rate_;
  long hop_;
  long ramp_len_;
  std::vector<double> f0_;
  std::vector<uint8_t> voiced_;
  bool finished_ = false;
  long next_sample_ = 0;
  double phase_ = 0.0;
};

Waveform synthesize_excitation(const F0Track& f0, int sample_rate, long length);

// Triangular mel filterbank; rows are bands over fft_size/2+1 linear bins.
std::vector<std::vector<double>> mel_filterbank(long n_bands, long fft_size, int sample_rate);
double mel_band_center_hz(long band, long n_bands, int sample_rate);

LoudnessTrack loudness_from_features(const FrameFeatures& f);
FrameFeatures loudness_to_features(const LoudnessTrack& t);

}  // namespace svc
