#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace svc {

struct ContextStackConfig {
  long blocks = 2;
  long layers_per_block = 8;
  long channels = 128;
  long kernel = 3;
};

struct GeneratorConfig {
  long blocks = 3;
  long layers_per_block = 10;
  long residual_channels = 128;
  long skip_channels = 128;
  long kernel = 3;
  std::vector<long> upsample_stages{4, 4, 4, 4};  // product must equal the feature hop
  long noise_channels = 1;
  long cond_channels = 128;

  long upsample_product() const {
    long p = 1;
    for (long f : upsample_stages) p *= f;
    return p;
  }
};

struct DiscriminatorConfig {
  long layers = 10;
  long channels = 128;
  long kernel = 3;
  double leakiness = 0.2;
};

struct ModelConfig {
  ContextStackConfig context_stack;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  long speaker_dim = 64;
  long hop = 256;
  long phonetic_dim = 40;
};

// 1 + (kernel-1) * sum(dilations)
long receptive_field(long kernel, const std::vector<long>& dilations);

std::vector<long> stack_dilations(const ContextStackConfig& c);      // 2^0..2^(L-1) per block
std::vector<long> generator_dilations(const GeneratorConfig& c);     // 2^0..2^(L-1) per block
std::vector<long> discriminator_dilations(const DiscriminatorConfig& c);  // 1..layers

struct Param {
  std::string name;
  ad::Tensor value;  // plain parameter
  bool weight_normed = false;
  ad::Tensor v, g;  // direction + per-output-channel gain when weight_normed

  ad::Tensor effective() const;
  std::vector<ad::Tensor> leaves() const;
};

class ParamStore {
 public:
  std::shared_ptr<Param> create_plain(const std::string& name, ad::Shape shape,
                                      const std::vector<Real>& init);
  std::shared_ptr<Param> create_weight_normed(const std::string& name, ad::Shape shape,
                                              const std::vector<Real>& init);
  const std::vector<std::shared_ptr<Param>>& all() const { return params_; }
  std::shared_ptr<Param> find(const std::string& name) const;

  long leaf_count() const;    // number of trainable leaf tensors
  long scalar_count() const;  // total trainable scalars
  void zero_grads();

 private:
  std::vector<std::shared_ptr<Param>> params_;
  std::map<std::string, size_t> index_;
};

// Conv layer with weight normalization; bias optional.
struct ConvLayer {
  std::shared_ptr<Param> w;  // [Co, Ci, k]
  std::shared_ptr<Param> b;  // [Co] or null
  long dilation = 1;

  ad::Tensor apply(const ad::Tensor& x) const;
};

ConvLayer make_conv(ParamStore& store, Rng& rng, const std::string& name, long c_out, long c_in,
                    long kernel, long dilation, bool bias = true);

// Dilated residual encoder applied to one feature track before conditioning.
class ContextStack {
 public:
  ContextStack() = default;
  ContextStack(const std::string& name, long in_channels, const ContextStackConfig& cfg,
               ParamStore& store, Rng& rng);

  ad::Tensor forward(const ad::Tensor& x) const;
  long receptive_field_frames() const;

 private:
  ConvLayer input_;
  std::vector<ConvLayer> layers_;
  long kernel_ = 3;
};

struct FeatureTensors {
  ad::Tensor loudness;    // [1, F]
  ad::Tensor phonetic;    // [D, F]
  ad::Tensor excitation;  // [hop, F] sample block per frame
};

class SpeakerTable {
 public:
  SpeakerTable() = default;
  SpeakerTable(const std::vector<std::string>& ids, long dim, ParamStore& store, Rng& rng);

  bool empty() const { return ids_.empty(); }
  long dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  bool has(const std::string& id) const;
  ad::Tensor embedding(const std::string& id) const;  // [dim]

 private:
  std::vector<std::string> ids_;
  std::vector<std::shared_ptr<Param>> rows_;
  long dim_ = 0;
};

// u = nu * v_j + (1 - nu) * v_j2
ad::Tensor mixup_embedding(const ad::Tensor& v_j, const ad::Tensor& v_j2, double nu);

class Model {
 public:
  Model(const ModelConfig& cfg, const std::vector<std::string>& speaker_ids, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }

  // [C_cond, F*hop]; speaker embedding is broadcast and concatenated ahead
  // of the upsampling chain
  ad::Tensor build_conditioner(const FeatureTensors& f,
                               const std::optional<ad::Tensor>& speaker) const;

  ad::Tensor generator_forward(const ad::Tensor& z, const ad::Tensor& cond) const;
  ad::Tensor discriminator_forward(const ad::Tensor& x) const;

  long generator_receptive_field() const;
  long discriminator_receptive_field() const;
  // one-sided sample halo covering stacks, upsampling and the wavenet
  long conditioning_halo_samples() const;

  SpeakerTable& speakers() { return speakers_; }
  const SpeakerTable& speakers() const { return speakers_; }
  ParamStore& gen_params() { return gen_params_; }
  ParamStore& disc_params() { return disc_params_; }
  const ParamStore& gen_params() const { return gen_params_; }
  const ParamStore& disc_params() const { return disc_params_; }

 private:
  ModelConfig cfg_;
  ParamStore gen_params_;
  ParamStore disc_params_;

  ContextStack stack_loud_, stack_phon_, stack_exc_;
  std::vector<ConvLayer> upsample_convs_;
  ConvLayer wn_input_;
  struct WaveNetLayer {
    ConvLayer filter, gate, cond_filter, cond_gate, skip, res;
  };
  std::vector<WaveNetLayer> wn_layers_;
  ConvLayer post1_, post2_;
  std::vector<ConvLayer> disc_layers_;
  ConvLayer disc_out_;
  SpeakerTable speakers_;
};

}  // namespace svc
