// segan.cpp

// Copyright 2026  The SeganForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "seganforge/segan.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

namespace seganforge {
namespace segan {

namespace tg = seganforge::tg;

// ---------------------------------------------------------------------------
// GeneratorConfig

int64_t GeneratorConfig::latent_len() const {
  int64_t len = window_len;
  for (int64_t i = 0; i < n_layers(); ++i) len /= stride;
  return len;
}

void GeneratorConfig::validate() const {
  if (window_len <= 0) raise("model: window_len must be positive");
  if (stride < 2) raise("model: stride must be >= 2");
  if (kernel_width < 1 || kernel_width % 2 == 0)
    raise("model: kernel_width must be odd (centered padding)");
  if (encoder_channels.empty()) raise("model: encoder_channels is empty");
  for (int64_t c : encoder_channels)
    if (c <= 0) raise("model: encoder channel counts must be positive");
  int64_t len = window_len;
  for (int64_t i = 0; i < n_layers(); ++i) {
    if (len % stride != 0)
      raise(strprintf(
          "model: window_len %lld is not divisible by stride^%lld",
          (long long)window_len, (long long)n_layers()));
    len /= stride;
  }
  if (len < 1) raise("model: latent length collapsed to zero");
  if (preemphasis_coef < 0.0f || preemphasis_coef >= 1.0f)
    raise("model: preemphasis coefficient must be in [0, 1)");
}

GeneratorConfig GeneratorConfig::desk() {
  GeneratorConfig cfg;
  cfg.profile = "desk";
  cfg.window_len = 1024;
  cfg.encoder_channels = {16, 32, 32, 64, 64, 128};
  return cfg;
}

GeneratorConfig GeneratorConfig::canonical() {
  GeneratorConfig cfg;
  cfg.profile = "canonical";
  cfg.window_len = 16384;
  cfg.encoder_channels = {16, 32, 32, 64, 64, 128, 128, 256, 256, 512, 1024};
  return cfg;
}

GeneratorConfig GeneratorConfig::from_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "canonical") return canonical();
  raise("unknown model profile \"" + name + "\" (expected desk or canonical)");
}

void GeneratorConfig::to_config(Config* cfg) const {
  cfg->set("model.profile", profile);
  cfg->set("model.window_len", std::to_string(window_len));
  cfg->set("model.kernel_width", std::to_string(kernel_width));
  cfg->set("model.stride", std::to_string(stride));
  std::string ch;
  for (size_t i = 0; i < encoder_channels.size(); ++i) {
    if (i) ch += ",";
    ch += std::to_string(encoder_channels[i]);
  }
  cfg->set("model.encoder_channels", ch);
  cfg->set("model.preemphasis", format_double(double(preemphasis_coef)));
}

GeneratorConfig GeneratorConfig::from_config(const Config& cfg) {
  GeneratorConfig g;
  if (cfg.has("model.profile"))
    g = from_profile(cfg.get_string("model.profile"));
  g.window_len = cfg.get_int("model.window_len", g.window_len);
  g.kernel_width = cfg.get_int("model.kernel_width", g.kernel_width);
  g.stride = cfg.get_int("model.stride", g.stride);
  if (cfg.has("model.encoder_channels"))
    g.encoder_channels = cfg.get_int_list("model.encoder_channels");
  g.preemphasis_coef =
      float(cfg.get_double("model.preemphasis", double(g.preemphasis_coef)));
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// parameter plumbing

namespace {

constexpr float kPreluInit = 0.25f;

struct ParamSpec {
  std::string name;
  tg::Shape shape;
  enum Kind { kWeight, kBias, kAlpha } kind;
};

std::vector<ParamSpec> generator_param_specs(const GeneratorConfig& cfg) {
  std::vector<ParamSpec> specs;
  const int64_t n = cfg.n_layers();
  const int64_t K = cfg.kernel_width;
  for (int64_t i = 0; i < n; ++i) {
    int64_t cin = i == 0 ? 1 : cfg.encoder_channels[size_t(i - 1)];
    int64_t cout = cfg.encoder_channels[size_t(i)];
    std::string base = strprintf("g.enc.%lld.", (long long)i);
    specs.push_back({base + "weight", {cout, cin, K}, ParamSpec::kWeight});
    specs.push_back({base + "bias", {cout}, ParamSpec::kBias});
    specs.push_back({base + "alpha", {cout}, ParamSpec::kAlpha});
  }
  for (int64_t i = 0; i < n; ++i) {
    int64_t cin = 2 * cfg.encoder_channels[size_t(n - 1 - i)];
    int64_t cout = i == n - 1 ? 1 : cfg.encoder_channels[size_t(n - 2 - i)];
    std::string base = strprintf("g.dec.%lld.", (long long)i);
    specs.push_back({base + "weight", {cin, cout, K}, ParamSpec::kWeight});
    specs.push_back({base + "bias", {cout}, ParamSpec::kBias});
    if (i != n - 1)
      specs.push_back({base + "alpha", {cout}, ParamSpec::kAlpha});
  }
  return specs;
}

std::vector<ParamSpec> discriminator_param_specs(const GeneratorConfig& cfg) {
  std::vector<ParamSpec> specs;
  const int64_t n = cfg.n_layers();
  const int64_t K = cfg.kernel_width;
  for (int64_t i = 0; i < n; ++i) {
    int64_t cin = i == 0 ? 2 : cfg.encoder_channels[size_t(i - 1)];
    int64_t cout = cfg.encoder_channels[size_t(i)];
    std::string base = strprintf("d.conv.%lld.", (long long)i);
    specs.push_back({base + "weight", {cout, cin, K}, ParamSpec::kWeight});
    specs.push_back({base + "bias", {cout}, ParamSpec::kBias});
  }
  specs.push_back({"d.feat.weight",
                   {1, cfg.encoder_channels.back(), 1},
                   ParamSpec::kWeight});
  specs.push_back({"d.feat.bias", {1}, ParamSpec::kBias});
  specs.push_back({"d.out.weight", {1, 1, cfg.latent_len()}, ParamSpec::kWeight});
  specs.push_back({"d.out.bias", {1}, ParamSpec::kBias});
  return specs;
}

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases 0, PReLU slopes 0.25.
std::vector<tg::ParameterF> init_params(const std::vector<ParamSpec>& specs,
                                        Rng& rng) {
  std::vector<tg::ParameterF> params;
  params.reserve(specs.size());
  for (const auto& spec : specs) {
    tg::TensorF t = tg::TensorF::zeros(spec.shape, /*requires_grad=*/true);
    switch (spec.kind) {
      case ParamSpec::kWeight: {
        int64_t fan_in = 1;
        for (size_t d = 1; d < spec.shape.size(); ++d) fan_in *= spec.shape[d];
        // Transposed-conv weights are stored [Cin, Cout, K]; fan-in is Cin*K.
        if (spec.name.find(".dec.") != std::string::npos)
          fan_in = spec.shape[0] * spec.shape[2];
        float bound = 1.0f / std::sqrt(float(fan_in));
        for (auto& v : t.values()) v = float(rng.uniform(-bound, bound));
        break;
      }
      case ParamSpec::kBias:
        break;  // zeros
      case ParamSpec::kAlpha:
        std::fill(t.values().begin(), t.values().end(), kPreluInit);
        break;
    }
    params.emplace_back(spec.name, std::move(t));
  }
  return params;
}

std::vector<tg::ParameterF> params_from_arrays(
    const std::vector<ParamSpec>& specs, const ParamArrays& arrays) {
  std::vector<tg::ParameterF> params;
  params.reserve(specs.size());
  for (const auto& spec : specs) {
    auto it = arrays.find(spec.name);
    if (it == arrays.end())
      raise("checkpoint is missing parameter \"" + spec.name + "\"");
    if (it->second.first != spec.shape)
      raise(strprintf("checkpoint parameter \"%s\" has shape %s, expected %s",
                      spec.name.c_str(),
                      tg::shape_str(it->second.first).c_str(),
                      tg::shape_str(spec.shape).c_str()));
    tg::TensorF t = tg::TensorF::from_values(spec.shape, it->second.second,
                                             /*requires_grad=*/true);
    params.emplace_back(spec.name, std::move(t));
  }
  return params;
}

void set_params_trainable(std::vector<tg::ParameterF>& params, bool trainable) {
  for (auto& p : params) {
    p.tensor.node()->requires_grad = trainable;
    p.tensor.node()->needs_grad = trainable;
  }
}

ParamArrays checkpoint_arrays(const Checkpoint& ckpt) {
  ParamArrays map;
  for (const auto& a : ckpt.arrays) map[a.name] = {a.shape, a.data};
  return map;
}

}  // namespace

std::vector<std::string> Generator::expected_param_names(
    const GeneratorConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& s : generator_param_specs(cfg)) names.push_back(s.name);
  return names;
}

std::vector<std::string> Discriminator::expected_param_names(
    const GeneratorConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& s : discriminator_param_specs(cfg)) names.push_back(s.name);
  return names;
}

Generator::Generator(const GeneratorConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  params_ = init_params(generator_param_specs(cfg_), init_rng);
}

Generator::Generator(const GeneratorConfig& cfg, const ParamArrays& arrays)
    : cfg_(cfg) {
  cfg_.validate();
  params_ = params_from_arrays(generator_param_specs(cfg_), arrays);
}

std::vector<tg::ParameterF*> Generator::parameters() {
  std::vector<tg::ParameterF*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void Generator::set_trainable(bool trainable) {
  set_params_trainable(params_, trainable);
}

tg::ParameterF* Generator::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  raise("generator parameter not found: " + name);
}

tg::TensorF Generator::forward(const tg::TensorF& x_tilde, const tg::TensorF& z,
                               ShapeTrace* trace) const {
  const int64_t n = cfg_.n_layers();
  const int64_t pad = cfg_.conv_pad();
  const int64_t out_pad = cfg_.stride - 1;
  auto* self = const_cast<Generator*>(this);

  if (x_tilde.shape().size() != 3 || x_tilde.dim(1) != 1 ||
      x_tilde.dim(2) != cfg_.window_len)
    raise(strprintf("generator expects x[B,1,%lld], got %s",
                    (long long)cfg_.window_len,
                    tg::shape_str(x_tilde.shape()).c_str()));

  tg::TensorF h = x_tilde;
  std::vector<tg::TensorF> skips;
  for (int64_t i = 0; i < n; ++i) {
    std::string base = strprintf("g.enc.%lld.", (long long)i);
    h = tg::conv1d(h, self->find(base + "weight")->tensor,
                   self->find(base + "bias")->tensor, cfg_.stride, pad);
    h = tg::prelu(h, self->find(base + "alpha")->tensor);
    if (trace) trace->push_back({strprintf("enc.%lld", (long long)i), h.shape()});
    if (i < n - 1) skips.push_back(h);
  }

  // Latent code k = [c|z]: deterministic encoder output next to the prior
  // sample, stacked on the channel axis.
  tg::Shape expect_z = {x_tilde.dim(0), cfg_.latent_channels(), cfg_.latent_len()};
  if (z.shape() != expect_z)
    raise(strprintf("latent z must have shape %s, got %s",
                    tg::shape_str(expect_z).c_str(),
                    tg::shape_str(z.shape()).c_str()));
  if (trace) trace->push_back({"latent.c", h.shape()});
  h = tg::concat_channels(h, z);
  if (trace) trace->push_back({"latent.k", h.shape()});

  for (int64_t i = 0; i < n; ++i) {
    if (trace)
      trace->push_back({strprintf("dec.%lld.in", (long long)i), h.shape()});
    std::string base = strprintf("g.dec.%lld.", (long long)i);
    h = tg::conv_transpose1d(h, self->find(base + "weight")->tensor,
                             self->find(base + "bias")->tensor, cfg_.stride,
                             pad, out_pad);
    if (i < n - 1) {
      h = tg::prelu(h, self->find(base + "alpha")->tensor);
      h = tg::concat_channels(h, skips[size_t(n - 2 - i)]);
    } else {
      h = tg::tanh(h);
    }
    if (trace)
      trace->push_back({strprintf("dec.%lld.out", (long long)i), h.shape()});
  }
  return h;
}

Discriminator::Discriminator(const GeneratorConfig& cfg, Rng& init_rng)
    : cfg_(cfg) {
  cfg_.validate();
  params_ = init_params(discriminator_param_specs(cfg_), init_rng);
}

Discriminator::Discriminator(const GeneratorConfig& cfg,
                             const ParamArrays& arrays)
    : cfg_(cfg) {
  cfg_.validate();
  params_ = params_from_arrays(discriminator_param_specs(cfg_), arrays);
}

std::vector<tg::ParameterF*> Discriminator::parameters() {
  std::vector<tg::ParameterF*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void Discriminator::set_trainable(bool trainable) {
  set_params_trainable(params_, trainable);
}

tg::TensorF Discriminator::forward(const tg::TensorF& candidate,
                                   const tg::TensorF& x_tilde) const {
  if (candidate.shape() != x_tilde.shape())
    raise("discriminator: candidate and conditioning shapes differ");
  auto* self = const_cast<Discriminator*>(this);
  const int64_t pad = cfg_.conv_pad();
  size_t pi = 0;
  auto next = [&]() -> tg::ParameterF& { return self->params_[pi++]; };

  tg::TensorF h = tg::concat_channels(candidate, x_tilde);
  for (int64_t i = 0; i < cfg_.n_layers(); ++i) {
    tg::ParameterF& w = next();
    tg::ParameterF& b = next();
    h = tg::conv1d(h, w.tensor, b.tensor, cfg_.stride, pad);
    h = tg::leaky_relu(h, kLeakySlope);
  }
  tg::ParameterF& fw = next();
  tg::ParameterF& fb = next();
  h = tg::conv1d(h, fw.tensor, fb.tensor, 1, 0);  // width-1 conv -> 1 channel
  tg::ParameterF& ow = next();
  tg::ParameterF& ob = next();
  h = tg::conv1d(h, ow.tensor, ob.tensor, 1, 0);  // linear reduction
  return tg::reshape(h, {h.dim(0), 1});
}

// ---------------------------------------------------------------------------
// losses

Losses gan_losses(const tg::TensorF& d_real, const tg::TensorF& d_fake,
                  const tg::TensorF& x_hat, const tg::TensorF& x_clean,
                  float lambda_l1) {
  auto ones_real = tg::TensorF::full(d_real.shape(), 1.0f);
  auto zeros_fake = tg::TensorF::zeros(d_fake.shape());
  auto ones_fake = tg::TensorF::full(d_fake.shape(), 1.0f);

  Losses out;
  out.d_loss = tg::scale(
      tg::add(tg::mse_loss(d_real, ones_real), tg::mse_loss(d_fake, zeros_fake)),
      0.5f);
  out.l1_term = tg::l1_loss(x_hat, x_clean);
  out.g_loss = tg::add(tg::scale(tg::mse_loss(d_fake, ones_fake), 0.5f),
                       tg::scale(out.l1_term, lambda_l1));
  return out;
}

// ---------------------------------------------------------------------------
// config & checkpoint

void TrainConfig::validate() const {
  if (batch_size < 1) raise("train: batch_size must be >= 1");
  if (epochs < 0) raise("train: epochs must be >= 0");
  if (lambda_l1 < 0) raise("train: lambda_l1 must be >= 0");
  if (lr <= 0) raise("train: lr must be positive");
  if (rmsprop_decay < 0 || rmsprop_decay >= 1)
    raise("train: rmsprop_decay must be in [0, 1)");
}

void TrainConfig::apply_config(const Config& cfg) {
  batch_size = cfg.get_int("train.batch_size", batch_size);
  epochs = cfg.get_int("train.epochs", epochs);
  lr = cfg.get_double("train.lr", lr);
  rmsprop_decay = cfg.get_double("train.rmsprop_decay", rmsprop_decay);
  rmsprop_eps = cfg.get_double("train.rmsprop_eps", rmsprop_eps);
  lambda_l1 = cfg.get_double("train.lambda_l1", lambda_l1);
  freeze_discriminator =
      cfg.get_bool("train.freeze_discriminator", freeze_discriminator);
  seed = cfg.get_u64("train.seed", seed);
  epoch_checkpoints = cfg.get_bool("train.epoch_checkpoints", epoch_checkpoints);
}

GeneratorConfig Checkpoint::generator_config() const {
  return GeneratorConfig::from_config(config);
}

uint64_t Checkpoint::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& a : arrays) {
    h = fnv1a64(a.name.data(), a.name.size(), h);
    h = fnv1a64(a.data.data(), a.data.size() * sizeof(float), h);
  }
  return h;
}

namespace {

void put_u32(std::string& out, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  out.append(b, 4);
}

struct ByteReader {
  const unsigned char* p;
  size_t len;
  size_t pos = 0;
  std::string path;

  void need(size_t n) {
    if (pos + n > len)
      raise("truncated checkpoint file: " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = uint32_t(p[pos]) | uint32_t(p[pos + 1]) << 8 |
                 uint32_t(p[pos + 2]) << 16 | uint32_t(p[pos + 3]) << 24;
    pos += 4;
    return v;
  }
  uint8_t u8() {
    need(1);
    return p[pos++];
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out += "SGCK";
  put_u32(out, ckpt.version);
  std::string cfg_text = ckpt.config.echo();
  put_u32(out, uint32_t(cfg_text.size()));
  out += cfg_text;
  put_u32(out, uint32_t(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    put_u32(out, uint32_t(a.name.size()));
    out += a.name;
    out.push_back(char(1));  // dtype tag: float32
    put_u32(out, uint32_t(a.shape.size()));
    int64_t numel = 1;
    for (int64_t d : a.shape) {
      put_u32(out, uint32_t(d));
      numel *= d;
    }
    if (numel != int64_t(a.data.size()))
      raise("checkpoint array \"" + a.name + "\" has inconsistent payload size");
    size_t off = out.size();
    out.resize(off + a.data.size() * sizeof(float));
    std::memcpy(out.data() + off, a.data.data(), a.data.size() * sizeof(float));
  }
  write_text_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string bytes = read_text_file(path);
  ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()),
               bytes.size(), 0, path};
  if (r.bytes(4) != "SGCK")
    raise("not a checkpoint file (bad magic): " + path);
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion)
    raise(strprintf("unsupported checkpoint version %u in %s (expected %u)",
                    ckpt.version, path.c_str(), kCheckpointVersion));
  uint32_t cfg_len = r.u32();
  ckpt.config = Config::from_string(r.bytes(cfg_len), path + ":config");
  uint32_t count = r.u32();
  ckpt.arrays.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    uint32_t name_len = r.u32();
    a.name = r.bytes(name_len);
    uint8_t dtype = r.u8();
    if (dtype != 1)
      raise(strprintf("unsupported dtype tag %u for \"%s\" in %s", dtype,
                      a.name.c_str(), path.c_str()));
    uint32_t rank = r.u32();
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      int64_t dim = r.u32();
      if (dim <= 0) raise("checkpoint array with non-positive dim: " + a.name);
      a.shape.push_back(dim);
      numel *= dim;
    }
    r.need(size_t(numel) * sizeof(float));
    a.data.resize(size_t(numel));
    std::memcpy(a.data.data(), r.p + r.pos, size_t(numel) * sizeof(float));
    r.pos += size_t(numel) * sizeof(float);
    ckpt.arrays.push_back(std::move(a));
  }
  if (r.pos != r.len)
    raise(strprintf("trailing bytes (%zu) after checkpoint records in %s",
                    r.len - r.pos, path.c_str()));
  return ckpt;
}

std::string loss_log_to_csv(const std::vector<LossRow>& rows) {
  std::string out = "epoch,batch,d_loss,g_loss,l1_term\n";
  for (const auto& r : rows)
    out += strprintf("%lld,%lld,%.8g,%.8g,%.8g\n", (long long)r.epoch,
                     (long long)r.batch, r.d_loss, r.g_loss, r.l1_term);
  return out;
}

// ---------------------------------------------------------------------------
// training

namespace {

uint64_t corpus_fingerprint(const ChunkCorpus& corpus) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& pair : corpus) {
    h = fnv1a64(pair.clean.data(), pair.clean.size() * sizeof(float), h);
    h = fnv1a64(pair.noisy.data(), pair.noisy.size() * sizeof(float), h);
  }
  return h;
}

Checkpoint build_checkpoint(const GeneratorConfig& gcfg, Generator& g,
                            Discriminator& d, const TrainConfig& tcfg,
                            int64_t epochs_completed, uint64_t corpus_fp,
                            const std::string& init_mode,
                            const std::string& base_fp) {
  Checkpoint ckpt;
  gcfg.to_config(&ckpt.config);
  ckpt.config.set("provenance.epochs_completed",
                  std::to_string(epochs_completed));
  ckpt.config.set("provenance.seed", std::to_string(tcfg.seed));
  ckpt.config.set("provenance.corpus_fingerprint", to_hex(corpus_fp));
  ckpt.config.set("provenance.init_mode", init_mode);
  if (!base_fp.empty()) ckpt.config.set("provenance.base_fingerprint", base_fp);
  ckpt.config.set("provenance.lambda_l1", format_double(tcfg.lambda_l1));
  ckpt.config.set("provenance.lr", format_double(tcfg.lr));
  ckpt.config.set("provenance.rmsprop_decay", format_double(tcfg.rmsprop_decay));
  for (const auto& [k, v] : tcfg.provenance_extra) ckpt.config.set(k, v);

  for (auto* p : g.parameters())
    ckpt.arrays.push_back({p->name, p->tensor.shape(), p->tensor.values()});
  for (auto* p : d.parameters())
    ckpt.arrays.push_back({p->name, p->tensor.shape(), p->tensor.values()});
  for (auto* p : g.parameters())
    ckpt.arrays.push_back({"rms." + p->name, p->tensor.shape(), p->rms});
  for (auto* p : d.parameters())
    ckpt.arrays.push_back({"rms." + p->name, p->tensor.shape(), p->rms});
  return ckpt;
}

TrainResult train_models(Generator& g, Discriminator& d,
                         const GeneratorConfig& gcfg, const ChunkCorpus& corpus,
                         const TrainConfig& tcfg, const std::string& init_mode,
                         const std::string& base_fp) {
  tcfg.validate();
  if (corpus.empty()) raise("train: empty chunk corpus");
  const int64_t window = gcfg.window_len;
  for (const auto& pair : corpus)
    if (int64_t(pair.clean.size()) != window ||
        int64_t(pair.noisy.size()) != window)
      raise("train: chunk length does not match the model window");

  uint64_t corpus_fp = corpus_fingerprint(corpus);
  const bool freeze_d = tcfg.freeze_discriminator;
  if (freeze_d) d.set_trainable(false);

  auto g_params = g.parameters();
  auto d_params = d.parameters();
  tg::RmspropOptions opt{tcfg.lr, tcfg.rmsprop_decay, tcfg.rmsprop_eps};

  Rng shuffle_rng(Rng::derive(tcfg.seed, 1));
  Rng z_rng(Rng::derive(tcfg.seed, 2));

  const int64_t n_chunks = int64_t(corpus.size());
  const int64_t zc = gcfg.latent_channels();
  const int64_t zl = gcfg.latent_len();

  std::vector<int64_t> indices(size_t(n_chunks));
  std::iota(indices.begin(), indices.end(), 0);

  TrainResult result;
  if (!tcfg.checkpoint_dir.empty())
    std::filesystem::create_directories(tcfg.checkpoint_dir);

  for (int64_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    shuffle_rng.shuffle(indices);
    int64_t batch_index = 0;
    for (int64_t start = 0; start < n_chunks;
         start += tcfg.batch_size, ++batch_index) {
      int64_t bsz = std::min(tcfg.batch_size, n_chunks - start);
      try {
        std::vector<float> noisy(size_t(bsz * window));
        std::vector<float> clean(size_t(bsz * window));
        for (int64_t i = 0; i < bsz; ++i) {
          const auto& pair = corpus[size_t(indices[size_t(start + i)])];
          std::memcpy(noisy.data() + i * window, pair.noisy.data(),
                      size_t(window) * sizeof(float));
          std::memcpy(clean.data() + i * window, pair.clean.data(),
                      size_t(window) * sizeof(float));
        }
        auto x_tilde =
            tg::TensorF::from_values({bsz, 1, window}, std::move(noisy));
        auto x_clean =
            tg::TensorF::from_values({bsz, 1, window}, std::move(clean));
        std::vector<float> zv(size_t(bsz * zc * zl));
        for (auto& v : zv) v = z_rng.normal_f();
        auto z = tg::TensorF::from_values({bsz, zc, zl}, std::move(zv));

        auto x_hat = g.forward(x_tilde, z);

        double d_loss_value;
        if (!freeze_d) {
          auto d_real = d.forward(x_clean, x_tilde);
          auto d_fake = d.forward(x_hat.detach(), x_tilde);
          auto d_loss = tg::scale(
              tg::add(tg::mse_loss(d_real, tg::TensorF::full(d_real.shape(), 1.0f)),
                      tg::mse_loss(d_fake, tg::TensorF::zeros(d_fake.shape()))),
              0.5f);
          d_loss_value = double(d_loss.item());
          if (!std::isfinite(d_loss_value))
            raise("d_loss became non-finite");
          d_loss.backward();
          tg::rmsprop_step(d_params, opt);

          auto d_fake_live = d.forward(x_hat, x_tilde);
          auto l1 = tg::l1_loss(x_hat, x_clean);
          auto g_loss = tg::add(
              tg::scale(tg::mse_loss(d_fake_live,
                                     tg::TensorF::full(d_fake_live.shape(), 1.0f)),
                        0.5f),
              tg::scale(l1, float(tcfg.lambda_l1)));
          double g_loss_value = double(g_loss.item());
          double l1_value = double(l1.item());
          if (!std::isfinite(g_loss_value)) raise("g_loss became non-finite");
          g_loss.backward();
          tg::rmsprop_step(g_params, opt);
          result.log.push_back(
              {epoch, batch_index, d_loss_value, g_loss_value, l1_value});
        } else {
          auto d_real = d.forward(x_clean, x_tilde);
          auto d_fake_live = d.forward(x_hat, x_tilde);
          auto losses = gan_losses(d_real, d_fake_live, x_hat, x_clean,
                                   float(tcfg.lambda_l1));
          d_loss_value = double(losses.d_loss.item());
          double g_loss_value = double(losses.g_loss.item());
          double l1_value = double(losses.l1_term.item());
          if (!std::isfinite(g_loss_value)) raise("g_loss became non-finite");
          losses.g_loss.backward();
          tg::rmsprop_step(g_params, opt);
          result.log.push_back(
              {epoch, batch_index, d_loss_value, g_loss_value, l1_value});
        }
      } catch (const Error& e) {
        raise(strprintf("training aborted at epoch %lld batch %lld: %s",
                        (long long)epoch, (long long)batch_index, e.what()));
      }
    }

    if (!tcfg.checkpoint_dir.empty() && tcfg.epoch_checkpoints) {
      Checkpoint ckpt = build_checkpoint(gcfg, g, d, tcfg, epoch + 1, corpus_fp,
                                         init_mode, base_fp);
      save_checkpoint(ckpt, tcfg.checkpoint_dir +
                                strprintf("/epoch_%03lld.ckpt",
                                          (long long)(epoch + 1)));
    }
  }

  result.checkpoint = build_checkpoint(gcfg, g, d, tcfg, tcfg.epochs, corpus_fp,
                                       init_mode, base_fp);
  if (!tcfg.checkpoint_dir.empty()) {
    save_checkpoint(result.checkpoint, tcfg.checkpoint_dir + "/final.ckpt");
    write_text_file_atomic(tcfg.checkpoint_dir + "/loss_log.csv",
                           loss_log_to_csv(result.log));
  }
  return result;
}

}  // namespace

TrainResult train(const ChunkCorpus& corpus, const GeneratorConfig& gcfg,
                  const TrainConfig& tcfg) {
  gcfg.validate();
  Rng init_rng(Rng::derive(tcfg.seed, 0));
  Generator g(gcfg, init_rng);
  Discriminator d(gcfg, init_rng);
  return train_models(g, d, gcfg, corpus, tcfg, "scratch", "");
}

TrainResult finetune(const Checkpoint& base, const ChunkCorpus& corpus,
                     const TrainConfig& tcfg) {
  GeneratorConfig gcfg = base.generator_config();
  ParamArrays arrays = checkpoint_arrays(base);
  Generator g(gcfg, arrays);
  Discriminator d(gcfg, arrays);

  // Reject checkpoints carrying arrays no model owns.
  {
    std::vector<std::string> expected = Generator::expected_param_names(gcfg);
    auto dn = Discriminator::expected_param_names(gcfg);
    expected.insert(expected.end(), dn.begin(), dn.end());
    for (const auto& a : base.arrays) {
      if (a.name.rfind("rms.", 0) == 0) continue;
      if (std::find(expected.begin(), expected.end(), a.name) == expected.end())
        raise("checkpoint carries unexpected parameter \"" + a.name + "\"");
    }
    std::map<std::string, int> seen;
    for (const auto& a : base.arrays)
      if (++seen[a.name] > 1)
        raise("checkpoint carries duplicate parameter \"" + a.name + "\"");
  }

  return train_models(g, d, gcfg, corpus, tcfg, "pretrained",
                      to_hex(base.fingerprint()));
}

void append_chunk_pairs(const audio::AudioClip& clean,
                        const audio::AudioClip& noisy,
                        const GeneratorConfig& gcfg, double overlap_fraction,
                        ChunkCorpus* corpus) {
  if (clean.num_samples() != noisy.num_samples())
    raise("append_chunk_pairs: clean/noisy length mismatch for utterance " +
          clean.utterance_id);
  audio::AudioClip pc = audio::preemphasis(clean, gcfg.preemphasis_coef);
  audio::AudioClip pn = audio::preemphasis(noisy, gcfg.preemphasis_coef);
  auto cc = audio::chunk_signal(pc, gcfg.window_len, overlap_fraction);
  auto cn = audio::chunk_signal(pn, gcfg.window_len, overlap_fraction);
  for (size_t i = 0; i < cc.size(); ++i)
    corpus->push_back({std::move(cc[i].samples), std::move(cn[i].samples)});
}

// ---------------------------------------------------------------------------
// enhancement

Enhancer::Enhancer(const Checkpoint& ckpt)
    : cfg_(ckpt.generator_config()),
      generator_(new Generator(cfg_, checkpoint_arrays(ckpt))) {}

audio::AudioClip Enhancer::enhance(const audio::AudioClip& clip,
                                   uint64_t z_seed) const {
  if (clip.sample_rate_hz != audio::kPipelineSampleRate)
    raise(strprintf("enhance requires 16 kHz input, got %d Hz",
                    clip.sample_rate_hz));
  if (clip.samples.empty()) raise("enhance: empty input clip");

  audio::AudioClip pre = audio::preemphasis(clip, cfg_.preemphasis_coef);
  auto chunks = audio::chunk_signal(pre, cfg_.window_len, 0.0);

  Rng z_rng(z_seed);
  const int64_t window = cfg_.window_len;
  const int64_t zc = cfg_.latent_channels();
  const int64_t zl = cfg_.latent_len();
  constexpr int64_t kMaxBatch = 32;

  for (size_t base = 0; base < chunks.size(); base += size_t(kMaxBatch)) {
    int64_t bsz = std::min<int64_t>(kMaxBatch, int64_t(chunks.size() - base));
    std::vector<float> xv(size_t(bsz * window));
    for (int64_t i = 0; i < bsz; ++i)
      std::memcpy(xv.data() + i * window, chunks[base + size_t(i)].samples.data(),
                  size_t(window) * sizeof(float));
    std::vector<float> zv(size_t(bsz * zc * zl));
    for (auto& v : zv) v = z_rng.normal_f();

    auto x = tg::TensorF::from_values({bsz, 1, window}, std::move(xv));
    auto z = tg::TensorF::from_values({bsz, zc, zl}, std::move(zv));
    auto y = generator_->forward(x, z);
    const float* yv = y.values().data();
    for (int64_t i = 0; i < bsz; ++i)
      std::memcpy(chunks[base + size_t(i)].samples.data(), yv + i * window,
                  size_t(window) * sizeof(float));
  }

  audio::AudioClip stitched = audio::reconstruct(chunks, clip);
  audio::AudioClip out = audio::deemphasis(stitched, cfg_.preemphasis_coef);
  for (auto& s : out.samples) s = std::min(1.0f, std::max(-1.0f, s));
  out.utterance_id = clip.utterance_id;
  out.speaker_id = clip.speaker_id;
  out.language = clip.language;
  out.condition = clip.condition;
  return out;
}

audio::AudioClip enhance(const audio::AudioClip& clip, const Checkpoint& ckpt,
                         uint64_t z_seed) {
  return Enhancer(ckpt).enhance(clip, z_seed);
}

}  // namespace segan
}  // namespace seganforge
