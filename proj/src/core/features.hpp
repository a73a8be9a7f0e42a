#pragma once

#include "core/dsp.hpp"
#include "core/nets.hpp"

namespace svc {

struct FeatureParams {
  long hop = 256;
  long frame_size = 1024;
  F0Params f0;
};

struct FeatureBundle {
  LoudnessTrack loudness;
  FrameFeatures phonetic;
  F0Track f0;
  Waveform excitation;  // n_frames * hop samples

  long n_frames() const { return loudness.grid.n_frames; }
};

FeatureBundle extract_bundle(const Waveform& w, const FeatureParams& p);

// Fixed input standardization so dB-scaled tracks enter the stacks near unit
// range: loudness (db+50)/50, log-mel (v+11.5)/11.5.
constexpr double kLoudnessShift = 50.0, kLoudnessScale = 50.0;
constexpr double kMelShift = 11.5, kMelScale = 11.5;

// The excitation block packs hop consecutive samples per frame as channels.
FeatureTensors bundle_to_tensors(const FeatureBundle& b);
FeatureTensors tracks_to_tensors(const LoudnessTrack& loud, const FrameFeatures& phon,
                                 const std::vector<Real>& excitation, long hop);

}  // namespace svc
