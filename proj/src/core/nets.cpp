#include "core/nets.hpp"

#include <algorithm>
#include <cmath>

namespace svc {

long receptive_field(long kernel, const std::vector<long>& dilations) {
  long sum = 0;
  for (long d : dilations) sum += d;
  return 1 + (kernel - 1) * sum;
}

std::vector<long> stack_dilations(const ContextStackConfig& c) {
  std::vector<long> d;
  for (long b = 0; b < c.blocks; ++b)
    for (long l = 0; l < c.layers_per_block; ++l) d.push_back(1l << l);
  return d;
}

std::vector<long> generator_dilations(const GeneratorConfig& c) {
  std::vector<long> d;
  for (long b = 0; b < c.blocks; ++b)
    for (long l = 0; l < c.layers_per_block; ++l) d.push_back(1l << l);
  return d;
}

std::vector<long> discriminator_dilations(const DiscriminatorConfig& c) {
  std::vector<long> d;
  for (long l = 1; l <= c.layers; ++l) d.push_back(l);
  return d;
}

ad::Tensor Param::effective() const {
  if (weight_normed) return ad::weight_norm_effective(v, g);
  return value;
}

std::vector<ad::Tensor> Param::leaves() const {
  if (weight_normed) return {v, g};
  return {value};
}

std::shared_ptr<Param> ParamStore::create_plain(const std::string& name, ad::Shape shape,
                                                const std::vector<Real>& init) {
  SVC_CHECK(index_.find(name) == index_.end(), ErrorCode::State, "duplicate parameter " << name);
  auto p = std::make_shared<Param>();
  p->name = name;
  p->value = ad::Tensor::from_data(init, std::move(shape), true);
  index_[name] = params_.size();
  params_.push_back(p);
  return p;
}

std::shared_ptr<Param> ParamStore::create_weight_normed(const std::string& name, ad::Shape shape,
                                                        const std::vector<Real>& init) {
  SVC_CHECK(index_.find(name) == index_.end(), ErrorCode::State, "duplicate parameter " << name);
  SVC_CHECK(shape.size() >= 2, ErrorCode::InvalidArgument, "weight-normed parameter needs >= 2 dims");
  auto p = std::make_shared<Param>();
  p->name = name;
  p->weight_normed = true;
  p->v = ad::Tensor::from_data(init, shape, true);
  const long c_out = shape[0];
  const long per = ad::numel(shape) / c_out;
  std::vector<Real> gains(size_t(c_out));
  for (long c = 0; c < c_out; ++c) {
    double acc = 0.0;
    for (long i = 0; i < per; ++i) {
      const double vv = double(init[size_t(c * per + i)]);
      acc += vv * vv;
    }
    SVC_CHECK(acc > 0.0, ErrorCode::Numeric, "zero-norm init for " << name);
    gains[size_t(c)] = Real(std::sqrt(acc));  // effective weight equals v at init
  }
  p->g = ad::Tensor::from_data(std::move(gains), ad::Shape{c_out}, true);
  index_[name] = params_.size();
  params_.push_back(p);
  return p;
}

std::shared_ptr<Param> ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second];
}

long ParamStore::leaf_count() const {
  long n = 0;
  for (const auto& p : params_) n += long(p->leaves().size());
  return n;
}

long ParamStore::scalar_count() const {
  long n = 0;
  for (const auto& p : params_)
    for (const auto& t : p->leaves()) n += t.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (const auto& p : params_)
    for (auto t : p->leaves()) std::fill(t.grad().begin(), t.grad().end(), Real(0));
}

ad::Tensor ConvLayer::apply(const ad::Tensor& x) const {
  return ad::conv1d(x, w->effective(), b ? b->value : ad::Tensor(), dilation);
}

ConvLayer make_conv(ParamStore& store, Rng& rng, const std::string& name, long c_out, long c_in,
                    long kernel, long dilation, bool bias) {
  const double sigma = 1.0 / std::sqrt(double(c_in * kernel));
  std::vector<Real> init(size_t(c_out * c_in * kernel));
  for (auto& v : init) v = Real(rng.normal() * sigma);
  ConvLayer layer;
  layer.w = store.create_weight_normed(name + ".w", {c_out, c_in, kernel}, init);
  if (bias)
    layer.b = store.create_plain(name + ".b", {c_out}, std::vector<Real>(size_t(c_out), Real(0)));
  layer.dilation = dilation;
  return layer;
}

ContextStack::ContextStack(const std::string& name, long in_channels,
                           const ContextStackConfig& cfg, ParamStore& store, Rng& rng)
    : kernel_(cfg.kernel) {
  input_ = make_conv(store, rng, name + ".in", cfg.channels, in_channels, 1, 1);
  const auto dils = stack_dilations(cfg);
  for (size_t i = 0; i < dils.size(); ++i)
    layers_.push_back(
        make_conv(store, rng, name + ".l" + std::to_string(i), cfg.channels, cfg.channels,
                  cfg.kernel, dils[i]));
}

ad::Tensor ContextStack::forward(const ad::Tensor& x) const {
  ad::Tensor h = input_.apply(x);
  for (const auto& layer : layers_) {
    ad::Tensor y = ad::leaky_relu(layer.apply(h), Real(0.2));
    h = ad::add(h, y);
  }
  return h;
}

long ContextStack::receptive_field_frames() const {
  std::vector<long> dils;
  for (const auto& l : layers_) dils.push_back(l.dilation);
  return receptive_field(kernel_, dils);
}

SpeakerTable::SpeakerTable(const std::vector<std::string>& ids, long dim, ParamStore& store,
                           Rng& rng)
    : ids_(ids), dim_(dim) {
  for (size_t i = 1; i < ids_.size(); ++i)
    SVC_CHECK(ids_[i] != ids_[i - 1], ErrorCode::InvalidArgument, "duplicate speaker id " << ids_[i]);
  for (const auto& id : ids_) {
    std::vector<Real> init(size_t(dim));
    for (auto& v : init) v = Real(rng.normal() * 0.1);
    rows_.push_back(store.create_plain("speaker." + id, {dim}, init));
  }
}

bool SpeakerTable::has(const std::string& id) const {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

ad::Tensor SpeakerTable::embedding(const std::string& id) const {
  for (size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return rows_[i]->value;
  std::string known;
  for (const auto& s : ids_) known += (known.empty() ? "" : ", ") + s;
  raise(ErrorCode::NotFound, "unknown speaker id '" + id + "' (available: " + known + ")");
}

ad::Tensor mixup_embedding(const ad::Tensor& v_j, const ad::Tensor& v_j2, double nu) {
  SVC_CHECK(v_j.shape() == v_j2.shape(), ErrorCode::InvalidArgument,
            "mixup embeddings must share a dimension");
  SVC_CHECK(nu >= 0.0 && nu <= 1.0, ErrorCode::InvalidArgument, "nu must lie in [0, 1]");
  return ad::add(ad::scale(v_j, Real(nu)), ad::scale(v_j2, Real(1.0 - nu)));
}

Model::Model(const ModelConfig& cfg, const std::vector<std::string>& speaker_ids, uint64_t init_seed)
    : cfg_(cfg) {
  SVC_CHECK(cfg.generator.upsample_product() == cfg.hop, ErrorCode::Config,
            "upsample stages product " << cfg.generator.upsample_product()
                                       << " must equal feature hop " << cfg.hop);
  Rng rng(init_seed);

  const long sc = cfg.context_stack.channels;
  stack_loud_ = ContextStack("gen.stack.loud", 1, cfg.context_stack, gen_params_, rng);
  stack_phon_ = ContextStack("gen.stack.phon", cfg.phonetic_dim, cfg.context_stack, gen_params_, rng);
  stack_exc_ = ContextStack("gen.stack.exc", cfg.hop, cfg.context_stack, gen_params_, rng);

  std::vector<std::string> ids = speaker_ids;
  if (ids.size() <= 1) ids.clear();  // single-singer models carry no embedding
  speakers_ = SpeakerTable(ids, cfg.speaker_dim, gen_params_, rng);

  long up_in = 3 * sc + (speakers_.empty() ? 0 : cfg.speaker_dim);
  for (size_t s = 0; s < cfg.generator.upsample_stages.size(); ++s) {
    upsample_convs_.push_back(make_conv(gen_params_, rng, "gen.up." + std::to_string(s),
                                        cfg.generator.cond_channels, up_in, 3, 1));
    up_in = cfg.generator.cond_channels;
  }

  const long rc = cfg.generator.residual_channels;
  wn_input_ = make_conv(gen_params_, rng, "gen.wn.in", rc, cfg.generator.noise_channels, 1, 1);
  const auto dils = generator_dilations(cfg.generator);
  for (size_t i = 0; i < dils.size(); ++i) {
    const std::string base = "gen.wn.l" + std::to_string(i);
    WaveNetLayer layer;
    layer.filter = make_conv(gen_params_, rng, base + ".filter", rc, rc, cfg.generator.kernel, dils[i]);
    layer.gate = make_conv(gen_params_, rng, base + ".gate", rc, rc, cfg.generator.kernel, dils[i]);
    layer.cond_filter =
        make_conv(gen_params_, rng, base + ".cond_f", rc, cfg.generator.cond_channels, 1, 1, false);
    layer.cond_gate =
        make_conv(gen_params_, rng, base + ".cond_g", rc, cfg.generator.cond_channels, 1, 1, false);
    layer.skip = make_conv(gen_params_, rng, base + ".skip", cfg.generator.skip_channels, rc, 1, 1);
    layer.res = make_conv(gen_params_, rng, base + ".res", rc, rc, 1, 1);
    wn_layers_.push_back(std::move(layer));
  }
  post1_ = make_conv(gen_params_, rng, "gen.post.1", cfg.generator.skip_channels,
                     cfg.generator.skip_channels, 1, 1);
  post2_ = make_conv(gen_params_, rng, "gen.post.2", 1, cfg.generator.skip_channels, 1, 1);

  const auto ddils = discriminator_dilations(cfg.discriminator);
  long dc_in = 1;
  for (size_t i = 0; i < ddils.size(); ++i) {
    disc_layers_.push_back(make_conv(disc_params_, rng, "disc.l" + std::to_string(i),
                                     cfg.discriminator.channels, dc_in, cfg.discriminator.kernel,
                                     ddils[i]));
    dc_in = cfg.discriminator.channels;
  }
  disc_out_ = make_conv(disc_params_, rng, "disc.out", 1, cfg.discriminator.channels, 1, 1);
}

ad::Tensor Model::build_conditioner(const FeatureTensors& f,
                                    const std::optional<ad::Tensor>& speaker) const {
  const long frames = f.loudness.size(1);
  SVC_CHECK(f.phonetic.size(1) == frames && f.excitation.size(1) == frames, ErrorCode::InvalidArgument,
            "feature grids disagree: " << f.loudness.size(1) << "/" << f.phonetic.size(1) << "/"
                                       << f.excitation.size(1));
  SVC_CHECK(f.excitation.size(0) == cfg_.hop, ErrorCode::InvalidArgument,
            "excitation block must carry hop=" << cfg_.hop << " channels");

  ad::Tensor h = ad::concat_channels(stack_loud_.forward(f.loudness), stack_phon_.forward(f.phonetic));
  h = ad::concat_channels(h, stack_exc_.forward(f.excitation));
  if (speaker.has_value()) {
    SVC_CHECK(!speakers_.empty() || speaker->size(0) == cfg_.speaker_dim, ErrorCode::InvalidArgument,
              "speaker embedding dimension mismatch");
    h = ad::concat_channels(h, ad::broadcast_time(*speaker, frames));
  } else {
    SVC_CHECK(speakers_.empty(), ErrorCode::InvalidArgument,
              "multi-singer model requires a speaker embedding");
  }

  for (size_t s = 0; s < upsample_convs_.size(); ++s) {
    h = ad::nn_upsample(h, cfg_.generator.upsample_stages[s]);
    h = ad::leaky_relu(upsample_convs_[s].apply(h), Real(0.2));
  }
  return h;
}

ad::Tensor Model::generator_forward(const ad::Tensor& z, const ad::Tensor& cond) const {
  SVC_CHECK(z.shape().size() == 2 && z.size(0) == cfg_.generator.noise_channels,
            ErrorCode::InvalidArgument, "noise must be [noise_channels, T]");
  SVC_CHECK(cond.size(1) == z.size(1), ErrorCode::InvalidArgument,
            "conditioner length " << cond.size(1) << " != noise length " << z.size(1));

  ad::Tensor h = wn_input_.apply(z);
  ad::Tensor skip_sum;
  for (const auto& layer : wn_layers_) {
    ad::Tensor fil = ad::add(layer.filter.apply(h), layer.cond_filter.apply(cond));
    ad::Tensor gat = ad::add(layer.gate.apply(h), layer.cond_gate.apply(cond));
    ad::Tensor act = ad::mul(ad::tanh_t(fil), ad::sigmoid_t(gat));
    ad::Tensor sk = layer.skip.apply(act);
    skip_sum = skip_sum.defined() ? ad::add(skip_sum, sk) : sk;
    h = ad::add(h, layer.res.apply(act));
  }
  ad::Tensor y = ad::leaky_relu(skip_sum, Real(0.2));
  y = ad::leaky_relu(post1_.apply(y), Real(0.2));
  return ad::tanh_t(post2_.apply(y));
}

ad::Tensor Model::discriminator_forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (const auto& layer : disc_layers_)
    h = ad::leaky_relu(layer.apply(h), Real(cfg_.discriminator.leakiness));
  return disc_out_.apply(h);
}

long Model::generator_receptive_field() const {
  return receptive_field(cfg_.generator.kernel, generator_dilations(cfg_.generator));
}

long Model::discriminator_receptive_field() const {
  return receptive_field(cfg_.discriminator.kernel, discriminator_dilations(cfg_.discriminator));
}

long Model::conditioning_halo_samples() const {
  // one-sided spans, walked back from the waveform to the frame grid
  const long gen_halo = (generator_receptive_field() - 1) / 2;
  long span = 0;  // extra samples needed at the current rate
  long rate = 1;  // samples per step at the current position in the chain
  for (size_t s = upsample_convs_.size(); s-- > 0;) {
    span += rate;  // kernel-3 conv, one step each side at this rate
    rate *= cfg_.generator.upsample_stages[s];
  }
  // span is in output samples; frames consumed on top of it
  const long stack_halo_frames =
      (stack_loud_.receptive_field_frames() - 1) / 2;  // all stacks share the config
  const long frame_halo = stack_halo_frames + (span + cfg_.hop - 1) / cfg_.hop;
  return gen_halo + frame_halo * cfg_.hop;
}

}  // namespace svc
