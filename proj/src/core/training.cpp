#include "core/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "core/features_io.hpp"

namespace svc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  SVC_CHECK(total_steps > 0 && batch_size > 0, ErrorCode::Config,
            "total_steps and batch_size must be positive");
  SVC_CHECK(segment_seconds > 0, ErrorCode::Config, "segment_seconds must be positive");
  SVC_CHECK(base_lr > 0, ErrorCode::Config, "base_lr must be positive");
  SVC_CHECK(lr_half_period > 0, ErrorCode::Config, "lr_half_period must be positive");
  SVC_CHECK(disc_start_step >= 0 && perceptual_start_step >= 0 && mixup_start_step >= 0,
            ErrorCode::Config, "schedule steps must be nonnegative");
  SVC_CHECK(mixup_every > 0, ErrorCode::Config, "mixup_every must be positive");
  SVC_CHECK(scale_factor >= 1, ErrorCode::Config, "scale_factor must be >= 1");
  SVC_CHECK(grad_clip_norm >= 0, ErrorCode::Config, "grad_clip_norm must be nonnegative");
}

double lr_at(long step, const TrainConfig& cfg) {
  SVC_CHECK(step >= 0, ErrorCode::InvalidArgument, "negative step");
  const long period = cfg.scaled(cfg.lr_half_period);
  return cfg.base_lr * std::pow(0.5, double(step / period));
}

Corpus Corpus::scan(const std::string& root, int sample_rate) {
  SVC_CHECK(fs::is_directory(root), ErrorCode::Io, "corpus directory not found: " << root);
  auto list_wavs = [](const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
  };

  Corpus c;
  c.sample_rate_ = sample_rate;
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());

  for (const auto& d : subdirs) {
    auto files = list_wavs(d);
    if (!files.empty()) c.speakers_.push_back({d.filename().string(), std::move(files)});
  }
  if (c.speakers_.empty()) {
    auto files = list_wavs(root);
    if (!files.empty())
      c.speakers_.push_back({fs::path(root).filename().string(), std::move(files)});
  }
  SVC_CHECK(!c.speakers_.empty(), ErrorCode::Io, "no wav files under corpus root: " << root);
  return c;
}

std::vector<std::string> Corpus::speaker_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : speakers_) ids.push_back(s.id);
  return ids;
}

const Waveform& Corpus::audio(long speaker, long file) const {
  const auto key = std::make_pair(speaker, file);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const auto& path = speakers_[size_t(speaker)].files[size_t(file)];
  auto [ins, ok] = cache_.emplace(key, read_wav(path, sample_rate_));
  return ins->second;
}

FeatureBundle BuiltinFeatureProvider::segment_features(const Corpus&, long, long,
                                                       const Waveform& segment, long) {
  return extract_bundle(segment, params_);
}

const SvcfFeatureProvider::Tracks& SvcfFeatureProvider::utterance_tracks(const Corpus& corpus,
                                                                         long speaker, long file) {
  const auto key = std::make_pair(speaker, file);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  const auto& sp = corpus.speakers()[size_t(speaker)];
  const fs::path stem = fs::path(sp.files[size_t(file)]).stem();
  const fs::path base = fs::path(dir_) / sp.id / stem;
  Tracks t;
  t.loud = loudness_from_features(
      svcf_to_features(read_svcf(base.string() + ".loud.svcf"), "loudness-aw"));
  t.phon = svcf_to_features(read_svcf(base.string() + ".phon.svcf"), kMelProviderId);
  t.f0 = svcf_to_f0(read_svcf(base.string() + ".f0.svcf"));
  SVC_CHECK(t.phon.grid.hop == params_.hop && t.f0.grid.hop == params_.hop, ErrorCode::Format,
            "feature files hop mismatch for " << base.string());
  auto [ins, ok] = cache_.emplace(key, std::move(t));
  return ins->second;
}

FeatureBundle SvcfFeatureProvider::segment_features(const Corpus& corpus, long speaker, long file,
                                                    const Waveform& segment, long offset) {
  SVC_CHECK(offset % params_.hop == 0, ErrorCode::InvalidArgument,
            "segment offset must be frame aligned");
  const Tracks& t = utterance_tracks(corpus, speaker, file);
  const long f0_frame = offset / params_.hop;
  const long n = segment.length() / params_.hop + 1;
  SVC_CHECK(f0_frame + n <= t.phon.n_frames(), ErrorCode::InvalidArgument,
            "segment frames exceed utterance feature length");

  FeatureBundle b;
  const FrameGrid grid =
      FrameGrid::for_signal(segment.length(), params_.frame_size, params_.hop, segment.sample_rate);
  b.loudness.grid = grid;
  b.loudness.loud_db.assign(t.loud.loud_db.begin() + f0_frame, t.loud.loud_db.begin() + f0_frame + n);
  b.phonetic.grid = grid;
  b.phonetic.dim = t.phon.dim;
  b.phonetic.provider_id = t.phon.provider_id;
  b.phonetic.values.assign(t.phon.values.begin() + f0_frame * t.phon.dim,
                           t.phon.values.begin() + (f0_frame + n) * t.phon.dim);
  b.f0.grid = grid;
  b.f0.f0_hz.assign(t.f0.f0_hz.begin() + f0_frame, t.f0.f0_hz.begin() + f0_frame + n);
  b.f0.voiced.assign(t.f0.voiced.begin() + f0_frame, t.f0.voiced.begin() + f0_frame + n);
  b.f0.confidence.assign(t.f0.confidence.begin() + f0_frame,
                         t.f0.confidence.begin() + f0_frame + n);
  b.excitation = synthesize_excitation(b.f0, segment.sample_rate, n * params_.hop);
  return b;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Aligned:
      return "aligned";
    case Regime::Unaligned:
      return "unaligned";
    case Regime::Mixup:
      return "mixup";
  }
  return "?";
}

std::string StepReport::format_line() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "step=%ld regime=%s lr=%.9g d=%.9g recon=%.9g adv=%.9g pitch=%.9g phon=%.9g "
                "g=%.9g gnorm=%.9g dnorm=%.9g gclip=%d dclip=%d",
                step, regime_name(regime), lr, d_loss, recon, adv, pitch_perc, phon_perc, g_total,
                g_grad_norm, d_grad_norm, g_clipped ? 1 : 0, d_clipped ? 1 : 0);
  return buf;
}

Trainer::Trainer(Model& model, const Corpus& corpus, FeatureProvider& features,
                 const TrainConfig& cfg, const LossWeights& weights, const SpectralScaleSet& scales,
                 FeatureParams feat_params)
    : model_(model),
      corpus_(corpus),
      features_(features),
      cfg_(cfg),
      weights_(weights),
      scales_(scales),
      feat_params_(feat_params),
      opt_gen_(model.gen_params()),
      opt_disc_(model.disc_params()),
      rng_(splitmix64_mix(cfg.seed ^ 0x7261696e65722aull)) {
  cfg_.validate();
  scales_.validate();
  const int sr = corpus_.speakers().empty() ? 16000 : corpus_.audio(0, 0).sample_rate;
  seg_len_ = long(std::lround(cfg_.segment_seconds * sr));
  SVC_CHECK(seg_len_ >= 1, ErrorCode::Config, "segment too short");
  pitch_extractor_ = make_pitch_extractor(sr);
  phon_extractor_ = make_phonetic_extractor(sr);
}

Regime Trainer::regime_for_step(long step) const {
  const bool multi = corpus_.speakers().size() >= 2 && !model_.speakers().empty();
  if (!multi) return Regime::Aligned;
  const long mixup_start = cfg_.scaled(cfg_.mixup_start_step);
  if (step >= mixup_start && (step - mixup_start) % cfg_.mixup_every == 0) return Regime::Mixup;
  if (step >= cfg_.scaled(cfg_.perceptual_start_step) && step % 2 == 1) return Regime::Unaligned;
  return Regime::Aligned;
}

BatchPlan Trainer::make_batch(Regime regime, long step) {
  const long n_speakers = long(corpus_.speakers().size());
  if (regime != Regime::Aligned)
    SVC_CHECK(n_speakers >= 2, ErrorCode::State,
              regime_name(regime) << " batches need at least two speakers");

  BatchPlan plan;
  plan.regime = regime;
  for (long b = 0; b < cfg_.batch_size; ++b) {
    BatchItem it;
    it.speaker = long(rng_.uniform01() * double(n_speakers));
    const auto& files = corpus_.speakers()[size_t(it.speaker)].files;
    it.file = long(rng_.uniform01() * double(files.size()));
    const Waveform& full = corpus_.audio(it.speaker, it.file);

    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
      const long max_start_frame = std::max(0l, (full.length() - seg_len_) / feat_params_.hop);
      const long off = long(rng_.uniform01() * double(max_start_frame + 1)) * feat_params_.hop;
      Waveform seg;
      seg.sample_rate = full.sample_rate;
      seg.samples.assign(size_t(seg_len_), Real(0));
      const long avail = std::min(seg_len_, full.length() - off);
      for (long i = 0; i < avail; ++i) seg.samples[size_t(i)] = full.samples[size_t(off + i)];
      Real peak = 0;
      for (Real v : seg.samples) peak = std::max(peak, std::abs(v));
      if (peak >= Real(1e-4)) {
        it.offset = off;
        it.segment = std::move(seg);
        found = true;
      }
    }
    SVC_CHECK(found, ErrorCode::State,
              "no non-silent segment found in "
                  << corpus_.speakers()[size_t(it.speaker)].files[size_t(it.file)]);

    if (regime != Regime::Aligned) {
      // uniform over the other speakers, no rejection loop
      long other = long(rng_.uniform01() * double(n_speakers - 1));
      if (other >= it.speaker) ++other;
      it.target_speaker = other;
    }
    if (regime == Regime::Mixup) it.nu = rng_.uniform01();
    it.noise_seed = rng_.next_u64();
    it.noise_seed_back = rng_.next_u64();
    plan.items.push_back(std::move(it));
  }
  return plan;
}

FeatureBundle Trainer::item_bundle(const BatchItem& item) {
  return features_.segment_features(corpus_, item.speaker, item.file, item.segment, item.offset);
}

std::optional<ad::Tensor> Trainer::speaker_embedding(long index) const {
  if (model_.speakers().empty()) return std::nullopt;
  return model_.speakers().embedding(corpus_.speakers()[size_t(index)].id);
}

ad::Tensor Trainer::generate(const FeatureBundle& bundle, const std::optional<ad::Tensor>& speaker,
                             uint64_t noise_seed) const {
  const FeatureTensors t = bundle_to_tensors(bundle);
  const ad::Tensor cond = model_.build_conditioner(t, speaker);
  const long t_len = cond.size(1);
  std::vector<Real> z(size_t(t_len));
  for (long i = 0; i < t_len; ++i) z[size_t(i)] = Real(uniform01_at(noise_seed, uint64_t(i)));
  return model_.generator_forward(ad::Tensor::from_data(std::move(z), {1, t_len}), cond);
}

StepReport Trainer::training_step(const BatchPlan& batch, long step) {
  StepReport rep;
  rep.step = step;
  rep.regime = batch.regime;
  rep.d_active = step >= cfg_.scaled(cfg_.disc_start_step);
  rep.perc_active = step >= cfg_.scaled(cfg_.perceptual_start_step);
  rep.lr = lr_at(step, cfg_);

  struct Prep {
    FeatureBundle source;          // features of the conditioning input
    ad::Tensor target;             // waveform the losses compare against
    std::optional<ad::Tensor> gen_speaker;  // embedding fed to G
    FeatureBundle mixup_source;    // features of the first-pass generation (mixup)
  };
  std::vector<Prep> preps;
  preps.reserve(batch.items.size());
  for (const auto& item : batch.items) {
    Prep p;
    p.source = item_bundle(item);
    std::vector<Real> target(item.segment.samples.begin(), item.segment.samples.end());
    p.target = ad::Tensor::from_data(std::move(target), {1, long(item.segment.samples.size())});
    switch (batch.regime) {
      case Regime::Aligned:
        p.gen_speaker = speaker_embedding(item.speaker);
        break;
      case Regime::Unaligned:
        p.gen_speaker = speaker_embedding(item.target_speaker);
        break;
      case Regime::Mixup: {
        ad::NoGradGuard ng;
        const ad::Tensor u = mixup_embedding(*speaker_embedding(item.speaker),
                                             *speaker_embedding(item.target_speaker), item.nu);
        const ad::Tensor first = generate(p.source, u, item.noise_seed);
        Waveform wave_u;
        wave_u.sample_rate = item.segment.sample_rate;
        wave_u.samples.assign(first.data().begin(), first.data().begin() + seg_len_);
        p.mixup_source = extract_bundle(wave_u, feat_params_);
        p.gen_speaker = speaker_embedding(item.speaker);  // back-translation target
        break;
      }
    }
    preps.push_back(std::move(p));
  }

  auto generate_item = [&](size_t i, bool with_grad) {
    const auto& item = batch.items[i];
    const auto& p = preps[i];
    const FeatureBundle& bundle = batch.regime == Regime::Mixup ? p.mixup_source : p.source;
    const uint64_t seed = batch.regime == Regime::Mixup ? item.noise_seed_back : item.noise_seed;
    ad::Tensor out;
    if (with_grad) {
      out = generate(bundle, p.gen_speaker, seed);
    } else {
      ad::NoGradGuard ng;
      out = generate(bundle, p.gen_speaker, seed);
    }
    return ad::slice_time(out, 0, seg_len_);
  };

  if (rep.d_active) {
    model_.disc_params().zero_grads();
    for (size_t i = 0; i < batch.items.size(); ++i) {
      const ad::Tensor fake = generate_item(i, false);
      const ad::Tensor d_real = model_.discriminator_forward(preps[i].target);
      const ad::Tensor d_fake = model_.discriminator_forward(fake);
      const ad::Tensor loss = lsgan_d_loss(d_real, d_fake);
      ad::backward(loss);
      rep.d_loss += double(loss.scalar());
    }
    rep.d_grad_norm = clip_grad_norm(model_.disc_params(), cfg_.grad_clip_norm, &rep.d_clipped);
    opt_disc_.step(rep.lr);
  }

  model_.gen_params().zero_grads();
  model_.disc_params().zero_grads();
  for (size_t i = 0; i < batch.items.size(); ++i) {
    const ad::Tensor fake = generate_item(i, true);
    GeneratorLossTerms terms;
    if (batch.regime != Regime::Unaligned)
      terms.recon = multires_recon(preps[i].target, fake, scales_);
    if (rep.d_active) terms.adv = lsgan_adv_loss(model_.discriminator_forward(fake));
    if (rep.perc_active) {
      terms.pitch_perc = perceptual_loss(pitch_extractor_, preps[i].target, fake);
      terms.phon_perc = perceptual_loss(phon_extractor_, preps[i].target, fake);
    }
    const ad::Tensor total = generator_total(terms, weights_);
    const double value = double(total.scalar());
    if (!std::isfinite(value)) {
      std::string dump = "non-finite generator loss at step " + std::to_string(step) + ":";
      auto part = [&](const char* n, const ad::Tensor& t) {
        if (t.defined()) dump += std::string(" ") + n + "=" + std::to_string(double(t.scalar()));
      };
      part("recon", terms.recon);
      part("adv", terms.adv);
      part("pitch", terms.pitch_perc);
      part("phon", terms.phon_perc);
      raise(ErrorCode::Numeric, dump);
    }
    ad::backward(total);
    rep.g_total += value;
    if (terms.recon.defined()) rep.recon += double(terms.recon.scalar());
    if (terms.adv.defined()) rep.adv += double(terms.adv.scalar());
    if (terms.pitch_perc.defined()) rep.pitch_perc += double(terms.pitch_perc.scalar());
    if (terms.phon_perc.defined()) rep.phon_perc += double(terms.phon_perc.scalar());
  }
  rep.g_grad_norm = clip_grad_norm(model_.gen_params(), cfg_.grad_clip_norm, &rep.g_clipped);
  opt_gen_.step(rep.lr);
  return rep;
}

StepReport Trainer::run_step() {
  const Regime regime = regime_for_step(step_);
  const BatchPlan plan = make_batch(regime, step_);
  StepReport rep = training_step(plan, step_);
  ++step_;
  return rep;
}

CheckpointData Trainer::snapshot(const std::array<uint8_t, 32>& config_hash) const {
  CheckpointData d;
  d.step = uint64_t(step_);
  d.rng_state = rng_.state();
  d.config_hash = config_hash;
  auto add_store = [&](const Radam& opt, const std::string& prefix) {
    for (const auto& leaf : const_cast<Radam&>(opt).leaves()) {
      d.tensors.emplace_back(leaf.name, leaf.tensor.shape(), leaf.tensor.data());
      d.tensors.emplace_back(prefix + leaf.name + ".m1", leaf.tensor.shape(), leaf.m);
      d.tensors.emplace_back(prefix + leaf.name + ".m2", leaf.tensor.shape(), leaf.v);
    }
    d.tensors.emplace_back(prefix + "steps", ad::Shape{1},
                           std::vector<Real>{Real(double(opt.steps_taken()))});
  };
  add_store(opt_gen_, "opt.gen.");
  add_store(opt_disc_, "opt.disc.");
  return d;
}

bool Trainer::restore(const CheckpointData& data, const std::array<uint8_t, 32>& config_hash) {
  auto copy_into = [&](const std::string& name, std::vector<Real>& dst) {
    const std::vector<Real>* src = data.find(name);
    SVC_CHECK(src != nullptr, ErrorCode::Format, "checkpoint missing tensor " << name);
    SVC_CHECK(src->size() == dst.size(), ErrorCode::Format,
              "checkpoint tensor " << name << " has size " << src->size() << ", expected "
                                   << dst.size());
    dst = *src;
  };
  auto restore_store = [&](Radam& opt, const std::string& prefix) {
    for (auto& leaf : opt.leaves()) {
      copy_into(leaf.name, leaf.tensor.data());
      copy_into(prefix + leaf.name + ".m1", leaf.m);
      copy_into(prefix + leaf.name + ".m2", leaf.v);
    }
    const std::vector<Real>* steps = data.find(prefix + "steps");
    SVC_CHECK(steps && steps->size() == 1, ErrorCode::Format,
              "checkpoint missing optimizer counter");
    opt.set_steps_taken(uint64_t(double((*steps)[0])));
  };
  restore_store(opt_gen_, "opt.gen.");
  restore_store(opt_disc_, "opt.disc.");
  step_ = long(data.step);
  rng_.set_state(data.rng_state);
  return data.config_hash == config_hash;
}

}  // namespace svc
