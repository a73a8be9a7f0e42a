#include "core/config.hpp"

#include <fstream>

#include "core/sha256.hpp"
#include "json.hpp"

namespace svc {

using nlohmann::json;

namespace {

json config_to_json(const RunConfig& c) {
  json j;
  j["sample_rate"] = c.sample_rate;
  j["hop"] = c.hop;
  j["seed"] = c.seed;
  j["corpus_dir"] = c.corpus_dir;
  j["output_dir"] = c.output_dir;
  j["stream_chunk"] = c.stream_chunk;
  j["features"] = {{"provider", c.feature_provider},
                   {"features_dir", c.features_dir},
                   {"frame_size", c.feature_frame_size},
                   {"fmin", c.f0.fmin},
                   {"fmax", c.f0.fmax},
                   {"yin_threshold", c.f0.threshold}};
  j["model"] = {
      {"speaker_dim", c.model.speaker_dim},
      {"context_stack",
       {{"blocks", c.model.context_stack.blocks},
        {"layers_per_block", c.model.context_stack.layers_per_block},
        {"channels", c.model.context_stack.channels},
        {"kernel", c.model.context_stack.kernel}}},
      {"generator",
       {{"blocks", c.model.generator.blocks},
        {"layers_per_block", c.model.generator.layers_per_block},
        {"residual_channels", c.model.generator.residual_channels},
        {"skip_channels", c.model.generator.skip_channels},
        {"kernel", c.model.generator.kernel},
        {"upsample_stages", c.model.generator.upsample_stages},
        {"noise_channels", c.model.generator.noise_channels},
        {"cond_channels", c.model.generator.cond_channels}}},
      {"discriminator",
       {{"layers", c.model.discriminator.layers},
        {"channels", c.model.discriminator.channels},
        {"kernel", c.model.discriminator.kernel},
        {"leakiness", c.model.discriminator.leakiness}}}};
  j["training"] = {{"total_steps", c.train.total_steps},
                   {"batch_size", c.train.batch_size},
                   {"segment_seconds", c.train.segment_seconds},
                   {"base_lr", c.train.base_lr},
                   {"lr_half_period", c.train.lr_half_period},
                   {"disc_start_step", c.train.disc_start_step},
                   {"perceptual_start_step", c.train.perceptual_start_step},
                   {"mixup_start_step", c.train.mixup_start_step},
                   {"mixup_every", c.train.mixup_every},
                   {"scale_factor", c.train.scale_factor},
                   {"checkpoint_every", c.train.checkpoint_every},
                   {"grad_clip_norm", c.train.grad_clip_norm}};
  j["loss"] = {{"alpha", c.loss_weights.alpha},
               {"beta", c.loss_weights.beta},
               {"gamma", c.loss_weights.gamma},
               {"fft_sizes", c.scales.fft_sizes}};
  return j;
}

void reject_unknown(const json& given, const json& schema, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    SVC_CHECK(schema.contains(it.key()), ErrorCode::Config, "unknown config key: " << path);
    if (it.value().is_object())
      reject_unknown(it.value(), schema.at(it.key()), path);
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(ErrorCode::Config, std::string("bad value for config key '") + key + "': " + e.what());
  }
}

RunConfig config_from_json(const json& j, const std::string& origin) {
  RunConfig c = default_config();
  reject_unknown(j, config_to_json(c), "");

  read_into(j, "sample_rate", c.sample_rate);
  read_into(j, "hop", c.hop);
  read_into(j, "seed", c.seed);
  read_into(j, "corpus_dir", c.corpus_dir);
  read_into(j, "output_dir", c.output_dir);
  read_into(j, "stream_chunk", c.stream_chunk);
  if (j.contains("features")) {
    const json& f = j.at("features");
    read_into(f, "provider", c.feature_provider);
    read_into(f, "features_dir", c.features_dir);
    read_into(f, "frame_size", c.feature_frame_size);
    read_into(f, "fmin", c.f0.fmin);
    read_into(f, "fmax", c.f0.fmax);
    read_into(f, "yin_threshold", c.f0.threshold);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    read_into(m, "speaker_dim", c.model.speaker_dim);
    if (m.contains("context_stack")) {
      const json& s = m.at("context_stack");
      read_into(s, "blocks", c.model.context_stack.blocks);
      read_into(s, "layers_per_block", c.model.context_stack.layers_per_block);
      read_into(s, "channels", c.model.context_stack.channels);
      read_into(s, "kernel", c.model.context_stack.kernel);
    }
    if (m.contains("generator")) {
      const json& g = m.at("generator");
      read_into(g, "blocks", c.model.generator.blocks);
      read_into(g, "layers_per_block", c.model.generator.layers_per_block);
      read_into(g, "residual_channels", c.model.generator.residual_channels);
      read_into(g, "skip_channels", c.model.generator.skip_channels);
      read_into(g, "kernel", c.model.generator.kernel);
      read_into(g, "upsample_stages", c.model.generator.upsample_stages);
      read_into(g, "noise_channels", c.model.generator.noise_channels);
      read_into(g, "cond_channels", c.model.generator.cond_channels);
    }
    if (m.contains("discriminator")) {
      const json& d = m.at("discriminator");
      read_into(d, "layers", c.model.discriminator.layers);
      read_into(d, "channels", c.model.discriminator.channels);
      read_into(d, "kernel", c.model.discriminator.kernel);
      read_into(d, "leakiness", c.model.discriminator.leakiness);
    }
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    read_into(t, "total_steps", c.train.total_steps);
    read_into(t, "batch_size", c.train.batch_size);
    read_into(t, "segment_seconds", c.train.segment_seconds);
    read_into(t, "base_lr", c.train.base_lr);
    read_into(t, "lr_half_period", c.train.lr_half_period);
    read_into(t, "disc_start_step", c.train.disc_start_step);
    read_into(t, "perceptual_start_step", c.train.perceptual_start_step);
    read_into(t, "mixup_start_step", c.train.mixup_start_step);
    read_into(t, "mixup_every", c.train.mixup_every);
    read_into(t, "scale_factor", c.train.scale_factor);
    read_into(t, "checkpoint_every", c.train.checkpoint_every);
    read_into(t, "grad_clip_norm", c.train.grad_clip_norm);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    read_into(l, "alpha", c.loss_weights.alpha);
    read_into(l, "beta", c.loss_weights.beta);
    read_into(l, "gamma", c.loss_weights.gamma);
    read_into(l, "fft_sizes", c.scales.fft_sizes);
  }
  c.train.seed = c.seed;
  try {
    c.validate();
  } catch (const Error& e) {
    raise(ErrorCode::Config, "invalid config (" + origin + "): " + e.what());
  }
  return c;
}

}  // namespace

void RunConfig::validate() const {
  SVC_CHECK(sample_rate > 0, ErrorCode::Config, "sample_rate must be positive");
  SVC_CHECK(hop >= 1, ErrorCode::Config, "hop must be >= 1");
  SVC_CHECK(feature_frame_size >= hop, ErrorCode::Config, "feature frame_size must be >= hop");
  SVC_CHECK(feature_provider == "builtin" || feature_provider == "svcf", ErrorCode::Config,
            "feature provider must be 'builtin' or 'svcf'");
  SVC_CHECK(feature_provider != "svcf" || !features_dir.empty(), ErrorCode::Config,
            "svcf provider needs features_dir");
  SVC_CHECK(f0.fmin > 0 && f0.fmin < f0.fmax && f0.fmax < sample_rate / 2.0, ErrorCode::Config,
            "need 0 < fmin < fmax < sample_rate/2");
  SVC_CHECK(model.generator.upsample_product() == hop, ErrorCode::Config,
            "generator upsample stages must multiply to hop");
  SVC_CHECK(stream_chunk >= 1, ErrorCode::Config, "stream_chunk must be >= 1");
  train.validate();
  scales.validate();
}

RunConfig default_config() { return RunConfig{}; }

RunConfig config_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::Config, "config parse error (" + origin + "): " + e.what());
  }
  SVC_CHECK(j.is_object(), ErrorCode::Config, "config root must be an object (" << origin << ")");
  return config_from_json(j, origin);
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  SVC_CHECK(in.good(), ErrorCode::Config, "cannot open config file: " << path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json_text(text, path);
}

std::string config_to_json_text(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  json j = config_to_json(cfg);
  json* node = &j;
  std::string rest = dotted_key;
  while (true) {
    const size_t dot = rest.find('.');
    const std::string key = rest.substr(0, dot);
    SVC_CHECK(node->contains(key), ErrorCode::Config, "unknown config key: " << dotted_key);
    node = &node->at(key);
    if (dot == std::string::npos) break;
    rest = rest.substr(dot + 1);
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // bare string
  *node = parsed;
  cfg = config_from_json(j, "override " + dotted_key);
}

std::array<uint8_t, 32> config_hash(const RunConfig& cfg) {
  return sha256(config_to_json(cfg).dump());
}

}  // namespace svc
