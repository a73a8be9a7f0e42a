#include "core/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "core/features_io.hpp"
#include "core/metrics.hpp"
#include "core/sha256.hpp"
#include "json.hpp"

namespace svc {

namespace fs = std::filesystem;

namespace {

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m = cfg.model;
  m.hop = cfg.hop;
  m.phonetic_dim = kMelBands;
  return m;
}

std::vector<std::string> list_wavs_recursive(const std::string& root) {
  SVC_CHECK(fs::is_directory(root), ErrorCode::Io, "directory not found: " << root);
  std::vector<std::string> rel;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".wav")
      rel.push_back(fs::relative(e.path(), root).string());
  }
  std::sort(rel.begin(), rel.end());
  return rel;
}

void run_pool(long n_items, const std::function<void(long)>& work) {
  const long n_workers =
      std::max(1l, std::min<long>(n_items, long(std::thread::hardware_concurrency())));
  if (n_workers <= 1) {
    for (long i = 0; i < n_items; ++i) work(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> threads;
  for (long w = 0; w < n_workers; ++w) {
    threads.emplace_back([&]() {
      for (long i = next.fetch_add(1); i < n_items; i = next.fetch_add(1)) work(i);
    });
  }
  for (auto& t : threads) t.join();
}

// Writes only when the encoded content differs from what is on disk.
bool write_if_changed(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ifstream in(path, std::ios::binary);
  if (in.good()) {
    std::vector<uint8_t> old((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    if (old.size() == bytes.size() && sha256(old.data(), old.size()) == sha256(bytes.data(), bytes.size()))
      return false;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  SVC_CHECK(out.good(), ErrorCode::Io, "cannot write " << path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  SVC_CHECK(out.good(), ErrorCode::Io, "write failed: " << path);
  return true;
}

void restore_params_only(Model& model, const CheckpointData& data) {
  auto restore_store = [&](const ParamStore& store) {
    for (const auto& [name, tensor] : leaf_entries(store)) {
      const std::vector<Real>* src = data.find(name);
      SVC_CHECK(src != nullptr, ErrorCode::Format, "checkpoint missing tensor " << name);
      SVC_CHECK(src->size() == tensor.data().size(), ErrorCode::Format,
                "checkpoint tensor " << name << " size mismatch");
      const_cast<ad::Tensor&>(tensor).data() = *src;
    }
  };
  restore_store(model.gen_params());
  restore_store(model.disc_params());
}

std::vector<std::string> checkpoint_speaker_ids(const CheckpointData& data) {
  std::vector<std::string> ids;
  for (const auto& [name, shape, values] : data.tensors) {
    if (name.rfind("speaker.", 0) == 0 && name.find(".m1") == std::string::npos &&
        name.find(".m2") == std::string::npos)
      ids.push_back(name.substr(8));
  }
  return ids;
}

}  // namespace

std::string ExtractReport::summary() const {
  std::string s = "written=" + std::to_string(written) + " skipped=" + std::to_string(skipped) +
                  " failed=" + std::to_string(failures.size());
  for (const auto& [file, err] : failures) s += "\n" + file + ": " + err;
  return s;
}

ExtractReport extract_directory(const RunConfig& cfg, const std::string& in_dir,
                                const std::string& out_dir) {
  const auto files = list_wavs_recursive(in_dir);
  fs::create_directories(out_dir);

  struct Outcome {
    long written = 0, skipped = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(files.size());
  const FeatureParams params = cfg.feature_params();

  run_pool(long(files.size()), [&](long i) {
    Outcome& o = outcomes[size_t(i)];
    try {
      const fs::path rel(files[size_t(i)]);
      const Waveform w = read_wav((fs::path(in_dir) / rel).string(), cfg.sample_rate);
      const FeatureBundle b = extract_bundle(w, params);
      const fs::path out_base = fs::path(out_dir) / rel.parent_path() / rel.stem();
      fs::create_directories(out_base.parent_path());
      const auto emit = [&](const std::string& suffix, const SvcfContent& c) {
        if (write_if_changed(out_base.string() + suffix, encode_svcf(c)))
          ++o.written;
        else
          ++o.skipped;
      };
      emit(".loud.svcf", features_to_svcf(loudness_to_features(b.loudness)));
      emit(".phon.svcf", features_to_svcf(b.phonetic));
      emit(".f0.svcf", f0_to_svcf(b.f0));
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  ExtractReport rep;
  for (size_t i = 0; i < files.size(); ++i) {
    rep.written += outcomes[i].written;
    rep.skipped += outcomes[i].skipped;
    if (!outcomes[i].error.empty()) rep.failures.emplace_back(files[i], outcomes[i].error);
  }
  return rep;
}

TrainResult train_run(const RunConfig& cfg, const std::string& resume_checkpoint, const LogFn& log) {
  cfg.validate();
  SVC_CHECK(!cfg.corpus_dir.empty(), ErrorCode::Config, "corpus_dir not set");
  const Corpus corpus = Corpus::scan(cfg.corpus_dir, cfg.sample_rate);

  Model model(model_config(cfg), corpus.speaker_ids(), cfg.seed);
  const FeatureParams feat_params = cfg.feature_params();
  std::unique_ptr<FeatureProvider> provider;
  if (cfg.feature_provider == "svcf")
    provider = std::make_unique<SvcfFeatureProvider>(cfg.features_dir, feat_params);
  else
    provider = std::make_unique<BuiltinFeatureProvider>(feat_params);

  Trainer trainer(model, corpus, *provider, cfg.train, cfg.loss_weights, cfg.scales, feat_params);
  const auto hash = config_hash(cfg);

  fs::create_directories(cfg.output_dir);
  {
    std::ofstream eff(fs::path(cfg.output_dir) / "effective_config.json");
    eff << config_to_json_text(cfg) << "\n";
  }

  if (!resume_checkpoint.empty()) {
    const CheckpointData data = load_checkpoint(resume_checkpoint);
    if (!trainer.restore(data, hash))
      log("warning: checkpoint config hash differs from the current config");
    log("resumed from " + resume_checkpoint + " at step " + std::to_string(trainer.step()));
  }

  log("generator_receptive_field=" + std::to_string(model.generator_receptive_field()) +
      " discriminator_receptive_field=" + std::to_string(model.discriminator_receptive_field()) +
      " speakers=" + std::to_string(corpus.speakers().size()));

  const long total = cfg.train.scaled(cfg.train.total_steps);
  TrainResult result;
  while (trainer.step() < total) {
    const StepReport rep = trainer.run_step();
    log(rep.format_line());
    ++result.steps_run;
    if (cfg.train.checkpoint_every > 0 && trainer.step() % cfg.train.checkpoint_every == 0 &&
        trainer.step() < total) {
      const std::string path =
          (fs::path(cfg.output_dir) / ("ckpt_" + std::to_string(trainer.step()) + ".svck")).string();
      save_checkpoint(path, trainer.snapshot(hash));
      log("checkpoint " + path);
    }
  }
  result.final_checkpoint = (fs::path(cfg.output_dir) / "final.svck").string();
  save_checkpoint(result.final_checkpoint, trainer.snapshot(hash));
  log("checkpoint " + result.final_checkpoint);
  return result;
}

Engine::Engine(const RunConfig& cfg, const std::string& checkpoint_path) : cfg_(cfg) {
  cfg_.validate();
  const CheckpointData data = load_checkpoint(checkpoint_path);
  model_ = std::make_unique<Model>(model_config(cfg_), checkpoint_speaker_ids(data), cfg_.seed);
  restore_params_only(*model_, data);
  hash_matched_ = data.config_hash == config_hash(cfg_);
}

Engine::~Engine() = default;

std::vector<std::string> Engine::speaker_ids() const { return model_->speakers().ids(); }

std::optional<ad::Tensor> Engine::speaker_or_error(const std::string& speaker) const {
  if (model_->speakers().empty()) return std::nullopt;  // single-singer model ignores the id
  SVC_CHECK(!speaker.empty(), ErrorCode::InvalidArgument,
            "this model is multi-singer; pass --speaker (available: "
                << [this] {
                     std::string s;
                     for (const auto& id : model_->speakers().ids())
                       s += (s.empty() ? "" : ", ") + id;
                     return s;
                   }());
  return model_->speakers().embedding(speaker);
}

std::vector<Real> Engine::convert(const std::vector<Real>& samples, const std::string& speaker,
                                  uint64_t seed) const {
  SVC_CHECK(!samples.empty(), ErrorCode::InvalidArgument, "empty input");
  Waveform w;
  w.sample_rate = cfg_.sample_rate;
  w.samples = samples;
  const FeatureBundle bundle = extract_bundle(w, cfg_.feature_params());
  const auto spk = speaker_or_error(speaker);

  ad::NoGradGuard ng;
  const FeatureTensors t = bundle_to_tensors(bundle);
  const ad::Tensor cond = model_->build_conditioner(t, spk);
  const long t_len = cond.size(1);
  std::vector<Real> z(size_t(t_len));
  for (long i = 0; i < t_len; ++i) z[size_t(i)] = Real(uniform01_at(seed, uint64_t(i)));
  const ad::Tensor y =
      model_->generator_forward(ad::Tensor::from_data(std::move(z), {1, t_len}), cond);
  return {y.data().begin(), y.data().begin() + w.length()};
}

long Engine::convert_file(const std::string& in_wav, const std::string& speaker,
                          const std::string& out_wav, uint64_t seed) const {
  const Waveform in = read_wav(in_wav, cfg_.sample_rate);
  Waveform out;
  out.sample_rate = cfg_.sample_rate;
  out.samples = convert(in.samples, speaker, seed);
  return write_wav(out_wav, out).clipped;
}

std::unique_ptr<StreamConverter> Engine::open_stream(const std::string& speaker, uint64_t seed,
                                                     long chunk) const {
  return std::make_unique<StreamConverter>(*this, speaker, seed, chunk);
}

StreamConverter::StreamConverter(const Engine& engine, const std::string& speaker, uint64_t seed,
                                 long chunk)
    : engine_(engine),
      speaker_(engine.speaker_or_error(speaker)),
      seed_(seed),
      hop_(engine.config().hop),
      chunk_frames_(std::max(1l, (chunk + engine.config().hop - 1) / engine.config().hop)),
      halo_frames_((engine.model().conditioning_halo_samples() + engine.config().hop - 1) /
                   engine.config().hop),
      frame_size_(engine.config().feature_frame_size),
      loud_an_(engine.config().feature_frame_size, engine.config().sample_rate),
      mel_an_(engine.config().feature_frame_size, engine.config().sample_rate, kMelBands),
      yin_an_(engine.config().feature_frame_size, engine.config().sample_rate, engine.config().f0),
      exciter_(engine.config().sample_rate, engine.config().hop) {}

void StreamConverter::feed(const Real* samples, long n) {
  SVC_CHECK(!finished_, ErrorCode::State, "feed after finish");
  input_.insert(input_.end(), samples, samples + n);
  advance_features();
  process_ready_windows();
}

void StreamConverter::finish() {
  if (finished_) return;
  finished_ = true;
  if (input_.empty()) {  // empty stream: empty output
    done_ = true;
    return;
  }
  advance_features();
  exciter_.finish();
  exciter_.drain(excitation_);
  process_ready_windows();
}

void StreamConverter::advance_features() {
  const long len = long(input_.size());
  if (len == 0) return;
  const long total_frames = len / hop_ + 1;
  while (frames_done_ < total_frames) {
    const long center = frames_done_ * hop_;
    if (!finished_ && center + frame_size_ / 2 > len) break;
    loud_db_.push_back(loud_an_.frame_db(input_, center));
    mel_.resize(mel_.size() + size_t(kMelBands));
    mel_an_.frame(input_, center, mel_.data() + mel_.size() - size_t(kMelBands));
    const auto f0 = yin_an_.frame(input_, center);
    exciter_.push_frame(f0.f0, f0.voiced);
    ++frames_done_;
  }
  exciter_.drain(excitation_);
}

void StreamConverter::process_ready_windows() {
  if (done_) return;
  const int sr = engine_.config().sample_rate;
  while (true) {
    const long total_len = long(input_.size());
    if (finished_ && emit_pos_ >= total_len) {
      done_ = true;
      return;
    }
    const long f_avail = std::min(frames_done_, long(excitation_.size()) / hop_);
    const long wanted_end = emit_frame_ + chunk_frames_ + halo_frames_;
    long f1;
    if (finished_) {
      f1 = std::min(wanted_end, total_len / hop_ + 1);
    } else {
      if (f_avail < wanted_end) return;
      f1 = wanted_end;
    }
    const long f0w = std::max(0l, emit_frame_ - halo_frames_);
    const long n = f1 - f0w;

    FrameGrid grid;
    grid.frame_size = frame_size_;
    grid.hop = hop_;
    grid.n_frames = n;
    grid.sample_rate = sr;
    LoudnessTrack loud;
    loud.grid = grid;
    loud.loud_db.assign(loud_db_.begin() + f0w, loud_db_.begin() + f1);
    FrameFeatures phon;
    phon.grid = grid;
    phon.dim = kMelBands;
    phon.provider_id = kMelProviderId;
    phon.values.assign(mel_.begin() + f0w * kMelBands, mel_.begin() + f1 * kMelBands);
    const std::vector<Real> exc(excitation_.begin() + f0w * hop_, excitation_.begin() + f1 * hop_);

    ad::NoGradGuard ng;
    const FeatureTensors t = tracks_to_tensors(loud, phon, exc, hop_);
    const ad::Tensor cond = engine_.model().build_conditioner(t, speaker_);
    const long t_len = cond.size(1);
    std::vector<Real> z(size_t(t_len));
    for (long i = 0; i < t_len; ++i)
      z[size_t(i)] = Real(uniform01_at(seed_, uint64_t(f0w * hop_ + i)));
    const ad::Tensor y =
        engine_.model().generator_forward(ad::Tensor::from_data(std::move(z), {1, t_len}), cond);

    const long local = (emit_frame_ - f0w) * hop_;
    long emit_count = chunk_frames_ * hop_;
    if (finished_) emit_count = std::min(emit_count, total_len - emit_pos_);
    out_queue_.insert(out_queue_.end(), y.data().begin() + local,
                      y.data().begin() + local + emit_count);
    emit_frame_ += chunk_frames_;
    emit_pos_ += emit_count;
  }
}

long StreamConverter::drain(std::vector<Real>& out) {
  const long n = long(out_queue_.size());
  out.insert(out.end(), out_queue_.begin(), out_queue_.end());
  out_queue_.clear();
  return n;
}

std::string EvalResult::text_report() const {
  char buf[256];
  std::string s;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%ld\n", r.name.c_str(), r.vde, r.ffe,
                  r.frames);
    s += buf;
  }
  std::snprintf(buf, sizeof(buf), "TOTAL\t%.6f\t%.6f\t%ld\n", total_vde, total_ffe, total_frames);
  s += buf;
  return s;
}

std::string EvalResult::json_report() const {
  nlohmann::json j;
  j["files"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["files"].push_back({{"name", r.name}, {"vde", r.vde}, {"ffe", r.ffe}, {"frames", r.frames}});
  j["total"] = {{"vde", total_vde}, {"ffe", total_ffe}, {"frames", total_frames}};
  return j.dump(2);
}

EvalResult evaluate_dirs(const RunConfig& cfg, const std::string& ref_dir,
                         const std::string& hyp_dir) {
  const auto ref_files = list_wavs_recursive(ref_dir);
  const auto hyp_files = list_wavs_recursive(hyp_dir);
  std::vector<std::string> unmatched;
  for (const auto& f : ref_files)
    if (!std::binary_search(hyp_files.begin(), hyp_files.end(), f))
      unmatched.push_back("missing hypothesis: " + f);
  for (const auto& f : hyp_files)
    if (!std::binary_search(ref_files.begin(), ref_files.end(), f))
      unmatched.push_back("missing reference: " + f);
  if (!unmatched.empty()) {
    std::string msg = "unmatched files between " + ref_dir + " and " + hyp_dir + ":";
    for (const auto& u : unmatched) msg += "\n  " + u;
    raise(ErrorCode::NotFound, msg);
  }

  const FeatureParams params = cfg.feature_params();
  EvalResult result;
  result.rows.resize(ref_files.size());
  std::vector<std::string> errors(ref_files.size());
  run_pool(long(ref_files.size()), [&](long i) {
    try {
      const std::string& rel = ref_files[size_t(i)];
      const Waveform ref = read_wav((fs::path(ref_dir) / rel).string(), cfg.sample_rate);
      const Waveform hyp = read_wav((fs::path(hyp_dir) / rel).string(), cfg.sample_rate);
      const FrameGrid rg =
          FrameGrid::for_signal(ref.length(), params.frame_size, params.hop, ref.sample_rate);
      const FrameGrid hg =
          FrameGrid::for_signal(hyp.length(), params.frame_size, params.hop, hyp.sample_rate);
      const F0Track rt = estimate_f0(ref, rg, params.f0);
      const F0Track ht = estimate_f0(hyp, hg, params.f0);
      const MetricReport m = compare_f0_tracks(rt, ht);
      result.rows[size_t(i)] = {rel, m.vde, m.ffe, m.n_frames};
    } catch (const std::exception& e) {
      errors[size_t(i)] = e.what();
    }
  });
  for (size_t i = 0; i < errors.size(); ++i)
    SVC_CHECK(errors[i].empty(), ErrorCode::Io, ref_files[i] << ": " << errors[i]);

  double werr_v = 0.0, werr_f = 0.0;
  for (const auto& r : result.rows) {
    werr_v += r.vde * double(r.frames);
    werr_f += r.ffe * double(r.frames);
    result.total_frames += r.frames;
  }
  if (result.total_frames > 0) {
    result.total_vde = werr_v / double(result.total_frames);
    result.total_ffe = werr_f / double(result.total_frames);
  }
  return result;
}

}  // namespace svc
