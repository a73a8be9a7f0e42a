#include "core/features.hpp"

namespace svc {

FeatureBundle extract_bundle(const Waveform& w, const FeatureParams& p) {
  const FrameGrid grid = FrameGrid::for_signal(w.length(), p.frame_size, p.hop, w.sample_rate);
  FeatureBundle b;
  b.loudness = a_weighted_loudness(w, grid);
  b.phonetic = phonetic_features(w, grid);
  b.f0 = estimate_f0(w, grid, p.f0);
  b.excitation = synthesize_excitation(b.f0, w.sample_rate, grid.n_frames * grid.hop);
  return b;
}

FeatureTensors bundle_to_tensors(const FeatureBundle& b) {
  FrameFeatures phon = b.phonetic;
  return tracks_to_tensors(b.loudness, phon, b.excitation.samples, b.loudness.grid.hop);
}

FeatureTensors tracks_to_tensors(const LoudnessTrack& loud, const FrameFeatures& phon,
                                 const std::vector<Real>& excitation, long hop) {
  const long frames = long(loud.loud_db.size());
  SVC_CHECK(phon.n_frames() == frames, ErrorCode::InvalidArgument,
            "loudness/phonetic frame counts disagree: " << frames << " vs " << phon.n_frames());
  SVC_CHECK(long(excitation.size()) == frames * hop, ErrorCode::InvalidArgument,
            "excitation must carry n_frames*hop samples");

  FeatureTensors t;
  std::vector<Real> lv(size_t(frames));
  for (long i = 0; i < frames; ++i)
    lv[size_t(i)] = Real((loud.loud_db[size_t(i)] + kLoudnessShift) / kLoudnessScale);
  t.loudness = ad::Tensor::from_data(std::move(lv), {1, frames});

  std::vector<Real> pv(size_t(frames * phon.dim));
  for (long i = 0; i < frames; ++i)
    for (long d = 0; d < phon.dim; ++d)
      pv[size_t(d * frames + i)] =
          Real((double(phon.values[size_t(i * phon.dim + d)]) + kMelShift) / kMelScale);
  t.phonetic = ad::Tensor::from_data(std::move(pv), {phon.dim, frames});

  std::vector<Real> ev(size_t(hop * frames));
  for (long f = 0; f < frames; ++f)
    for (long c = 0; c < hop; ++c) ev[size_t(c * frames + f)] = excitation[size_t(f * hop + c)];
  t.excitation = ad::Tensor::from_data(std::move(ev), {hop, frames});
  return t;
}

}  // namespace svc
