#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/training.hpp"

namespace svc {

struct ExtractReport {
  long written = 0;
  long skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (file, error)

  std::string summary() const;
  bool ok() const { return failures.empty(); }
};

// Writes <stem>.{loud,phon,f0}.svcf per input wav, mirroring the directory
// layout; unchanged outputs (by content hash) are not rewritten.
ExtractReport extract_directory(const RunConfig& cfg, const std::string& in_dir,
                                const std::string& out_dir);

using LogFn = std::function<void(const std::string&)>;

struct TrainResult {
  std::string final_checkpoint;
  long steps_run = 0;
};

TrainResult train_run(const RunConfig& cfg, const std::string& resume_checkpoint, const LogFn& log);

class StreamConverter;

// Loaded checkpoint ready for conversion; speaker ids are recovered from the
// checkpoint itself.
class Engine {
 public:
  Engine(const RunConfig& cfg, const std::string& checkpoint_path);
  ~Engine();

  const RunConfig& config() const { return cfg_; }
  const Model& model() const { return *model_; }
  std::vector<std::string> speaker_ids() const;
  bool config_hash_matched() const { return hash_matched_; }

  // Output samples match the input length; deterministic per seed.
  std::vector<Real> convert(const std::vector<Real>& samples, const std::string& speaker,
                            uint64_t seed) const;
  // Returns the count of samples clipped during PCM16 write.
  long convert_file(const std::string& in_wav, const std::string& speaker,
                    const std::string& out_wav, uint64_t seed) const;

  std::unique_ptr<StreamConverter> open_stream(const std::string& speaker, uint64_t seed,
                                               long chunk) const;

 private:
  friend class StreamConverter;
  std::optional<ad::Tensor> speaker_or_error(const std::string& speaker) const;

  RunConfig cfg_;
  std::unique_ptr<Model> model_;
  bool hash_matched_ = true;
};

// Chunked conversion with enough context on both sides of each chunk that
// interior samples match the offline path exactly.
class StreamConverter {
 public:
  StreamConverter(const Engine& engine, const std::string& speaker, uint64_t seed, long chunk);

  void feed(const Real* samples, long n);
  void finish();
  // Moves whatever converted audio is ready into `out`; returns count.
  long drain(std::vector<Real>& out);
  bool done() const { return done_; }
  long halo_frames() const { return halo_frames_; }

 private:
  void advance_features();
  void process_ready_windows();

  const Engine& engine_;
  std::optional<ad::Tensor> speaker_;
  uint64_t seed_;
  long hop_;
  long chunk_frames_;
  long halo_frames_;
  long frame_size_;

  std::vector<Real> input_;
  bool finished_ = false;
  bool done_ = false;

  std::vector<double> loud_db_;
  std::vector<Real> mel_;  // frame-major
  LoudnessAnalyzer loud_an_;
  MelAnalyzer mel_an_;
  YinAnalyzer yin_an_;
  ExcitationSynth exciter_;
  std::vector<Real> excitation_;
  long frames_done_ = 0;

  long emit_frame_ = 0;
  long emit_pos_ = 0;
  std::vector<Real> out_queue_;
};

struct EvalRow {
  std::string name;
  double vde = 0.0;
  double ffe = 0.0;
  long frames = 0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double total_vde = 0.0;
  double total_ffe = 0.0;
  long total_frames = 0;

  std::string text_report() const;  // name\tVDE\tFFE\tframes lines + TOTAL row
  std::string json_report() const;
};

EvalResult evaluate_dirs(const RunConfig& cfg, const std::string& ref_dir,
                         const std::string& hyp_dir);

}  // namespace svc
