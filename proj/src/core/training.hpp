#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/features.hpp"
#include "core/losses.hpp"
#include "core/nets.hpp"
#include "core/optim.hpp"
#include "core/wav.hpp"

namespace svc {

struct TrainConfig {
  long total_steps = 800000;
  long batch_size = 8;
  double segment_seconds = 1.0;
  double base_lr = 1e-4;
  long lr_half_period = 200000;
  long disc_start_step = 100000;
  long perceptual_start_step = 50000;
  long mixup_start_step = 100000;
  long mixup_every = 3;
  uint64_t seed = 0;
  long scale_factor = 1;  // divides all step constants for desk-scale runs
  long checkpoint_every = 0;
  double grad_clip_norm = 10.0;

  long scaled(long steps) const { return std::max(1l, steps / scale_factor); }
  void validate() const;
};

double lr_at(long step, const TrainConfig& cfg);

class Corpus {
 public:
  struct Speaker {
    std::string id;
    std::vector<std::string> files;
  };

  // Per-speaker subdirectories of WAV files; a directory holding WAVs
  // directly becomes a single speaker named after the directory.
  static Corpus scan(const std::string& root, int sample_rate);

  const std::vector<Speaker>& speakers() const { return speakers_; }
  std::vector<std::string> speaker_ids() const;
  const Waveform& audio(long speaker, long file) const;

 private:
  std::vector<Speaker> speakers_;
  int sample_rate_ = 0;
  mutable std::map<std::pair<long, long>, Waveform> cache_;
};

class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  // Features for a frame-aligned segment of corpus audio.
  virtual FeatureBundle segment_features(const Corpus& corpus, long speaker, long file,
                                         const Waveform& segment, long offset) = 0;
};

class BuiltinFeatureProvider : public FeatureProvider {
 public:
  explicit BuiltinFeatureProvider(FeatureParams params) : params_(params) {}
  FeatureBundle segment_features(const Corpus&, long, long, const Waveform& segment,
                                 long) override;

 private:
  FeatureParams params_;
};

// Reads <features_dir>/<speaker>/<stem>.{loud,phon,f0}.svcf and slices the
// frame range covering each segment.
class SvcfFeatureProvider : public FeatureProvider {
 public:
  SvcfFeatureProvider(std::string features_dir, FeatureParams params)
      : dir_(std::move(features_dir)), params_(params) {}
  FeatureBundle segment_features(const Corpus& corpus, long speaker, long file,
                                 const Waveform& segment, long offset) override;

 private:
  struct Tracks {
    LoudnessTrack loud;
    FrameFeatures phon;
    F0Track f0;
  };
  const Tracks& utterance_tracks(const Corpus& corpus, long speaker, long file);

  std::string dir_;
  FeatureParams params_;
  std::map<std::pair<long, long>, Tracks> cache_;
};

enum class Regime { Aligned, Unaligned, Mixup };
const char* regime_name(Regime r);

struct BatchItem {
  long speaker = 0;
  long file = 0;
  long offset = 0;
  long target_speaker = -1;  // unaligned target / mixup partner
  double nu = 1.0;
  uint64_t noise_seed = 0;         // generation pass
  uint64_t noise_seed_back = 0;    // mixup back-translation pass
  Waveform segment;
};

struct BatchPlan {
  Regime regime = Regime::Aligned;
  std::vector<BatchItem> items;
};

struct StepReport {
  long step = 0;
  Regime regime = Regime::Aligned;
  double lr = 0.0;
  double d_loss = 0.0;
  double recon = 0.0;
  double adv = 0.0;
  double pitch_perc = 0.0;
  double phon_perc = 0.0;
  double g_total = 0.0;
  double g_grad_norm = 0.0;
  double d_grad_norm = 0.0;
  bool g_clipped = false;
  bool d_clipped = false;
  bool d_active = false;
  bool perc_active = false;

  std::string format_line() const;
};

class Trainer {
 public:
  Trainer(Model& model, const Corpus& corpus, FeatureProvider& features, const TrainConfig& cfg,
          const LossWeights& weights, const SpectralScaleSet& scales, FeatureParams feat_params);

  Regime regime_for_step(long step) const;
  BatchPlan make_batch(Regime regime, long step);
  StepReport training_step(const BatchPlan& batch, long step);
  StepReport run_step();

  long step() const { return step_; }
  Rng& rng() { return rng_; }
  Model& model() { return model_; }

  // x_hat over the segment's full frame span [1, n_frames*hop]
  ad::Tensor generate(const FeatureBundle& bundle, const std::optional<ad::Tensor>& speaker,
                      uint64_t noise_seed) const;

  CheckpointData snapshot(const std::array<uint8_t, 32>& config_hash) const;
  // Returns false when the stored config hash differs (callers warn).
  bool restore(const CheckpointData& data, const std::array<uint8_t, 32>& config_hash);

 private:
  FeatureBundle item_bundle(const BatchItem& item);
  std::optional<ad::Tensor> speaker_embedding(long index) const;

  Model& model_;
  const Corpus& corpus_;
  FeatureProvider& features_;
  TrainConfig cfg_;
  LossWeights weights_;
  SpectralScaleSet scales_;
  FeatureParams feat_params_;
  PerceptualExtractor pitch_extractor_, phon_extractor_;
  Radam opt_gen_, opt_disc_;
  Rng rng_;
  long step_ = 0;
  long seg_len_ = 0;
};

}  // namespace svc
