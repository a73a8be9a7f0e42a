#include "core/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "core/fft.hpp"

namespace svc {

namespace {

// Hann-windowed magnitude spectrum of the frame centered at `center`.
std::vector<double> frame_magnitudes(const Waveform& w, long center, long fft_size,
                                     const std::vector<double>& win) {
  const long T = w.length();
  SVC_CHECK(T >= fft_size / 2, ErrorCode::InvalidArgument,
            "signal too short for fft_size " << fft_size << " (length " << T << ")");
  std::vector<std::complex<double>> buf(size_t(fft_size));
  const long start = center - fft_size / 2;
  for (long j = 0; j < fft_size; ++j) {
    const double x = double(w.samples[size_t(reflect_index(start + j, T))]);
    buf[size_t(j)] = std::complex<double>(x * win[size_t(j)], 0.0);
  }
  fft_inplace(buf);
  std::vector<double> mags(size_t(fft_size / 2 + 1));
  for (long b = 0; b <= fft_size / 2; ++b) mags[size_t(b)] = std::abs(buf[size_t(b)]);
  return mags;
}

}  // namespace

void SpectralScaleSet::validate() const {
  SVC_CHECK(!fft_sizes.empty(), ErrorCode::InvalidArgument, "spectral scale set is empty");
  for (long m : fft_sizes)
    SVC_CHECK(is_power_of_two(m), ErrorCode::InvalidArgument,
              "fft size " << m << " not a power of two");
}

std::vector<double> hann_window(long n) {
  std::vector<double> w(size_t(n));
  for (long i = 0; i < n; ++i)
    w[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(n));
  return w;
}

Spectrogram stft_magnitude(const Waveform& w, long fft_size, long hop) {
  SVC_CHECK(is_power_of_two(fft_size), ErrorCode::InvalidArgument,
            "fft_size must be a power of two, got " << fft_size);
  SVC_CHECK(hop >= 1, ErrorCode::InvalidArgument, "hop must be >= 1");
  const long T = w.length();
  SVC_CHECK(T >= 1, ErrorCode::InvalidArgument, "empty waveform");
  SVC_CHECK(T >= fft_size / 2, ErrorCode::InvalidArgument,
            "signal too short for fft_size " << fft_size << " (length " << T << ")");

  const std::vector<double> win = hann_window(fft_size);
  Spectrogram s;
  s.n_frames = T / hop + 1;
  s.n_bins = fft_size / 2 + 1;
  s.mag.resize(size_t(s.n_frames * s.n_bins));
  for (long f = 0; f < s.n_frames; ++f) {
    const auto mags = frame_magnitudes(w, f * hop, fft_size, win);
    std::copy(mags.begin(), mags.end(), s.mag.begin() + f * s.n_bins);
  }
  return s;
}

double a_weighting_db(double f) {
  auto ra = [](double fr) {
    const double f2 = fr * fr;
    const double c1 = 20.6 * 20.6, c2 = 107.7 * 107.7, c3 = 737.9 * 737.9, c4 = 12194.0 * 12194.0;
    return (c4 * f2 * f2) / ((f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4));
  };
  if (f <= 0.0) return -1e3;  // DC carries no weight
  return 20.0 * std::log10(ra(f)) - 20.0 * std::log10(ra(1000.0));
}

LoudnessAnalyzer::LoudnessAnalyzer(long fft_size, int sample_rate)
    : fft_size_(fft_size), window_(hann_window(fft_size)) {
  power_gain_.resize(size_t(fft_size / 2 + 1));
  for (long b = 0; b <= fft_size / 2; ++b) {
    const double f = double(b) * sample_rate / double(fft_size);
    power_gain_[size_t(b)] = std::pow(10.0, a_weighting_db(f) / 10.0);
  }
}

double LoudnessAnalyzer::frame_db(const Waveform& w, long center) const {
  const auto mags = frame_magnitudes(w, center, fft_size_, window_);
  double acc = 0.0;
  for (size_t b = 0; b < mags.size(); ++b) acc += power_gain_[b] * mags[b] * mags[b];
  return 10.0 * std::log10(acc + kLogFloor);
}

MelAnalyzer::MelAnalyzer(long fft_size, int sample_rate, long bands)
    : fft_size_(fft_size),
      bands_(bands),
      window_(hann_window(fft_size)),
      filters_(mel_filterbank(bands, fft_size, sample_rate)) {}

void MelAnalyzer::frame(const Waveform& w, long center, Real* out) const {
  const auto mags = frame_magnitudes(w, center, fft_size_, window_);
  for (long b = 0; b < bands_; ++b) {
    const auto& filt = filters_[size_t(b)];
    double acc = 0.0;
    for (size_t k = 0; k < mags.size(); ++k) acc += filt[k] * mags[k] * mags[k];
    out[b] = Real(std::log(acc + kLogFloor));
  }
}

YinAnalyzer::YinAnalyzer(long frame_size, int sample_rate, const F0Params& p)
    : frame_size_(frame_size), sample_rate_(sample_rate), params_(p) {
  SVC_CHECK(p.fmin > 0 && p.fmin < p.fmax && p.fmax < sample_rate / 2.0, ErrorCode::InvalidArgument,
            "need 0 < fmin < fmax < sample_rate/2, got fmin=" << p.fmin << " fmax=" << p.fmax);
  SVC_CHECK(double(frame_size) >= 2.0 * sample_rate / p.fmin, ErrorCode::InvalidArgument,
            "frame_size " << frame_size << " too small for fmin " << p.fmin);
  lag_min_ = std::max(1l, long(sample_rate / p.fmax));
  lag_max_ = long(std::ceil(sample_rate / p.fmin));
  corr_len_ = frame_size - lag_max_;  // constant integration window across lags
}

YinAnalyzer::FrameOut YinAnalyzer::frame(const Waveform& w, long center) const {
  const long T = w.length();
  std::vector<double> fr(size_t(frame_size_));
  const long start = center - frame_size_ / 2;
  for (long j = 0; j < frame_size_; ++j)
    fr[size_t(j)] = double(w.samples[size_t(reflect_index(start + j, T))]);

  // YIN difference function with cumulative mean normalization
  std::vector<double> cmnd(size_t(lag_max_ + 1), 1.0);
  double running = 0.0;
  for (long tau = 1; tau <= lag_max_; ++tau) {
    double acc = 0.0;
    for (long t = 0; t < corr_len_; ++t) {
      const double d = fr[size_t(t)] - fr[size_t(t + tau)];
      acc += d * d;
    }
    running += acc;
    cmnd[size_t(tau)] = running > 0.0 ? acc * double(tau) / running : 1.0;
  }

  // first dip below threshold, refined to its local minimum; else global min
  long best = -1;
  for (long tau = lag_min_; tau <= lag_max_; ++tau) {
    if (cmnd[size_t(tau)] < params_.threshold) {
      best = tau;
      while (best + 1 <= lag_max_ && cmnd[size_t(best + 1)] < cmnd[size_t(best)]) ++best;
      break;
    }
  }
  if (best < 0) {
    best = lag_min_;
    for (long tau = lag_min_ + 1; tau <= lag_max_; ++tau)
      if (cmnd[size_t(tau)] < cmnd[size_t(best)]) best = tau;
  }

  FrameOut out;
  const double dip = cmnd[size_t(best)];
  out.confidence = std::clamp(1.0 - dip, 0.0, 1.0);
  if (dip >= params_.threshold) return out;  // unvoiced

  double tau_ref = double(best);
  if (best > 1 && best < lag_max_) {
    const double a = cmnd[size_t(best - 1)], b = cmnd[size_t(best)], c = cmnd[size_t(best + 1)];
    const double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) tau_ref += std::clamp(0.5 * (a - c) / denom, -1.0, 1.0);
  }
  out.f0 = std::clamp(double(sample_rate_) / tau_ref, params_.fmin, params_.fmax);
  out.voiced = true;
  return out;
}

LoudnessTrack a_weighted_loudness(const Waveform& w, const FrameGrid& grid) {
  const LoudnessAnalyzer an(grid.frame_size, grid.sample_rate);
  LoudnessTrack t;
  t.grid = grid;
  t.loud_db.resize(size_t(grid.n_frames));
  for (long f = 0; f < grid.n_frames; ++f) t.loud_db[size_t(f)] = an.frame_db(w, grid.center(f));
  return t;
}

F0Track estimate_f0(const Waveform& w, const FrameGrid& grid, const F0Params& p) {
  const YinAnalyzer an(grid.frame_size, grid.sample_rate, p);
  F0Track track;
  track.grid = grid;
  track.f0_hz.assign(size_t(grid.n_frames), 0.0);
  track.voiced.assign(size_t(grid.n_frames), 0);
  track.confidence.assign(size_t(grid.n_frames), 0.0);
  for (long f = 0; f < grid.n_frames; ++f) {
    const auto out = an.frame(w, grid.center(f));
    track.f0_hz[size_t(f)] = out.f0;
    track.voiced[size_t(f)] = out.voiced ? 1 : 0;
    track.confidence[size_t(f)] = out.confidence;
  }
  return track;
}

FrameFeatures phonetic_features(const Waveform& w, const FrameGrid& grid) {
  const MelAnalyzer an(grid.frame_size, grid.sample_rate, kMelBands);
  FrameFeatures out;
  out.dim = kMelBands;
  out.grid = grid;
  out.provider_id = kMelProviderId;
  out.values.resize(size_t(grid.n_frames * kMelBands));
  for (long f = 0; f < grid.n_frames; ++f)
    an.frame(w, grid.center(f), out.values.data() + f * kMelBands);
  return out;
}

ExcitationSynth::ExcitationSynth(int sample_rate, long hop)
    : sample_rate_(sample_rate), hop_(hop), ramp_len_(std::max(1l, sample_rate / 100)) {}

void ExcitationSynth::push_frame(double f0_hz, bool voiced) {
  SVC_CHECK(!finished_, ErrorCode::State, "push_frame after finish");
  f0_.push_back(f0_hz);
  voiced_.push_back(voiced ? 1 : 0);
}

void ExcitationSynth::finish() { finished_ = true; }

double ExcitationSynth::sample_f0(long t) const {
  const long n = long(f0_.size());
  const long i = std::min(t / hop_, n - 1);
  const long j = std::min(i + 1, n - 1);
  const double frac = double(t - i * hop_) / double(hop_);
  return f0_[size_t(i)] * (1.0 - frac) + f0_[size_t(j)] * frac;
}

bool ExcitationSynth::sample_voiced(long t) const {
  const long n = long(voiced_.size());
  const long i = std::clamp((t + hop_ / 2) / hop_, 0l, n - 1);
  return voiced_[size_t(i)] != 0;
}

double ExcitationSynth::amplitude(long t) const {
  if (!sample_voiced(t)) return 0.0;
  // bounded scans to the span boundaries; before the signal counts as
  // unvoiced, past the last frame the span is taken to continue
  double a = 1.0;
  long back = 0;
  while (back < ramp_len_ && t - back - 1 >= 0 && sample_voiced(t - back - 1)) ++back;
  if (back < ramp_len_) a = std::min(a, double(back + 1) / double(ramp_len_));
  long fwd = 0;
  while (fwd < ramp_len_ && sample_voiced(t + fwd + 1)) ++fwd;
  if (fwd < ramp_len_) a = std::min(a, double(fwd + 1) / double(ramp_len_));
  return a;
}

long ExcitationSynth::drain(std::vector<Real>& out) {
  const long n_frames = long(f0_.size());
  if (n_frames == 0) return 0;
  // sample t interpolates frames t/hop and t/hop+1 and scans voicing up to
  // t + ramp_len + hop/2; hold back until those frames are in
  long limit;
  if (finished_) {
    limit = n_frames * hop_;
  } else {
    const long by_interp = (n_frames - 1) * hop_ - 1;
    const long by_ramp = (n_frames - 1) * hop_ - hop_ / 2 - ramp_len_ - 1;
    limit = std::min(by_interp, by_ramp) + 1;
  }
  long count = 0;
  for (; next_sample_ < limit; ++next_sample_) {
    const double f = sample_f0(next_sample_);
    phase_ += 2.0 * M_PI * f / double(sample_rate_);
    if (phase_ > 2.0 * M_PI) phase_ -= 2.0 * M_PI;
    out.push_back(Real(amplitude(next_sample_) * std::sin(phase_)));
    ++count;
  }
  return count;
}

Waveform synthesize_excitation(const F0Track& f0, int sample_rate, long length) {
  SVC_CHECK(f0.n_frames() >= 1, ErrorCode::InvalidArgument, "empty f0 track");
  const long max_len = f0.n_frames() * f0.grid.hop;
  SVC_CHECK(length >= 1 && length <= max_len, ErrorCode::InvalidArgument,
            "target length " << length << " inconsistent with grid (max " << max_len << ")");
  ExcitationSynth synth(sample_rate, f0.grid.hop);
  for (long i = 0; i < f0.n_frames(); ++i)
    synth.push_frame(f0.f0_hz[size_t(i)], f0.voiced[size_t(i)] != 0);
  synth.finish();
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.reserve(size_t(max_len));
  synth.drain(w.samples);
  w.samples.resize(size_t(length));
  return w;
}

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

double mel_band_center_hz(long band, long n_bands, int sample_rate) {
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  return mel_to_hz(mel_max * double(band + 1) / double(n_bands + 1));
}

std::vector<std::vector<double>> mel_filterbank(long n_bands, long fft_size, int sample_rate) {
  const long n_bins = fft_size / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(size_t(n_bands + 2));
  for (long i = 0; i < n_bands + 2; ++i)
    edges[size_t(i)] = mel_to_hz(mel_max * double(i) / double(n_bands + 1));

  std::vector<std::vector<double>> filters(size_t(n_bands),
                                           std::vector<double>(size_t(n_bins), 0.0));
  for (long b = 0; b < n_bands; ++b) {
    const double lo = edges[size_t(b)], mid = edges[size_t(b + 1)], hi = edges[size_t(b + 2)];
    for (long k = 0; k < n_bins; ++k) {
      const double f = double(k) * sample_rate / double(fft_size);
      double v = 0.0;
      if (f > lo && f < mid)
        v = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        v = (hi - f) / (hi - mid);
      filters[size_t(b)][size_t(k)] = v;
    }
  }
  return filters;
}

LoudnessTrack loudness_from_features(const FrameFeatures& f) {
  SVC_CHECK(f.dim == 1, ErrorCode::InvalidArgument, "loudness features must have dim 1");
  LoudnessTrack t;
  t.grid = f.grid;
  t.loud_db.assign(f.values.begin(), f.values.end());
  return t;
}

FrameFeatures loudness_to_features(const LoudnessTrack& t) {
  FrameFeatures f;
  f.dim = 1;
  f.grid = t.grid;
  f.provider_id = "loudness-aw";
  f.values.assign(t.loud_db.begin(), t.loud_db.end());
  return f;
}

}  // namespace svc
