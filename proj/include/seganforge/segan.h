// segan.h

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

// Waveform enhancement networks: a strided-conv encoder / transposed-conv
// decoder generator with skip connections and a latent code k = [c|z], a
// conditioned convolutional discriminator, least-squares adversarial training
// with an L1 reconstruction term, fine-tuning from a checkpoint, and whole-
// utterance enhancement.

#ifndef SEGANFORGE_SEGAN_H_
#define SEGANFORGE_SEGAN_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seganforge/audio.h"
#include "seganforge/config.h"
#include "seganforge/rng.h"
#include "seganforge/tensorgrad.h"

namespace seganforge {
namespace segan {

inline constexpr uint32_t kCheckpointVersion = 1;

struct GeneratorConfig {
  std::string profile = "desk";
  int64_t window_len = 1024;
  int64_t kernel_width = 31;
  int64_t stride = 2;
  std::vector<int64_t> encoder_channels = {16, 32, 32, 64, 64, 128};
  float preemphasis_coef = 0.95f;

  int64_t n_layers() const { return int64_t(encoder_channels.size()); }
  // window_len / stride^n_layers
  int64_t latent_len() const;
  int64_t latent_channels() const { return encoder_channels.back(); }
  int64_t conv_pad() const { return (kernel_width - 1) / 2; }

  void validate() const;

  // "desk": window 1024, 6 layers — every acceptance test runs in minutes.
  static GeneratorConfig desk();
  // "canonical": window 16384, 11 layers, channels 16..1024.
  static GeneratorConfig canonical();
  static GeneratorConfig from_profile(const std::string& name);

  void to_config(Config* cfg) const;
  static GeneratorConfig from_config(const Config& cfg);
};

struct LayerShape {
  std::string name;
  tg::Shape shape;
};
using ShapeTrace = std::vector<LayerShape>;

using ParamArrays = std::map<std::string, std::pair<tg::Shape, std::vector<float>>>;

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, Rng& init_rng);
  Generator(const GeneratorConfig& cfg, const ParamArrays& arrays);

  // x_tilde: [B, 1, W] preemphasized waveform chunks; z: [B, Cz, Lz] prior
  // sample matching the encoder output shape. Returns [B, 1, W].
  tg::TensorF forward(const tg::TensorF& x_tilde, const tg::TensorF& z,
                      ShapeTrace* trace = nullptr) const;

  const GeneratorConfig& config() const { return cfg_; }
  std::vector<tg::ParameterF*> parameters();
  void set_trainable(bool trainable);

  static std::vector<std::string> expected_param_names(const GeneratorConfig&);

 private:
  void build(const GeneratorConfig& cfg);
  tg::ParameterF* find(const std::string& name);

  GeneratorConfig cfg_;
  std::vector<tg::ParameterF> params_;
};

// Scores whether (candidate, conditioning) waveform pairs look like
// (clean, noisy) pairs. Mirrors the encoder stack on a 2-channel input,
// LeakyReLU(0.3), a width-1 convolution, then a full linear reduction
// to one score per batch item.
class Discriminator {
 public:
  Discriminator(const GeneratorConfig& cfg, Rng& init_rng);
  Discriminator(const GeneratorConfig& cfg, const ParamArrays& arrays);

  // candidate, x_tilde: [B, 1, W]. Returns [B, 1].
  tg::TensorF forward(const tg::TensorF& candidate,
                      const tg::TensorF& x_tilde) const;

  std::vector<tg::ParameterF*> parameters();
  void set_trainable(bool trainable);

  static std::vector<std::string> expected_param_names(const GeneratorConfig&);

  static constexpr float kLeakySlope = 0.3f;

 private:
  void build(const GeneratorConfig& cfg);

  GeneratorConfig cfg_;
  std::vector<tg::ParameterF> params_;
};

// Least-squares adversarial objectives:
//   d_loss = 1/2 mean((d_real - 1)^2) + 1/2 mean(d_fake^2)
//   g_loss = 1/2 mean((d_fake - 1)^2) + lambda * mean|x_hat - x_clean|
struct Losses {
  tg::TensorF d_loss;
  tg::TensorF g_loss;
  tg::TensorF l1_term;  // raw mean absolute error, before lambda
};
Losses gan_losses(const tg::TensorF& d_real, const tg::TensorF& d_fake,
                  const tg::TensorF& x_hat, const tg::TensorF& x_clean,
                  float lambda_l1);

struct TrainConfig {
  int64_t batch_size = 100;
  int64_t epochs = 30;
  double lr = 2e-4;
  double rmsprop_decay = 0.9;
  double rmsprop_eps = 1e-8;
  double lambda_l1 = 100.0;
  bool freeze_discriminator = false;
  uint64_t seed = 0;
  // When non-empty, checkpoints are written here (per epoch when
  // epoch_checkpoints is set, and always at the end) plus loss_log.csv.
  std::string checkpoint_dir;
  bool epoch_checkpoints = true;
  std::vector<std::pair<std::string, std::string>> provenance_extra;

  void validate() const;
  void apply_config(const Config& cfg);  // reads train.* keys
};

// One aligned training example: preemphasized clean/noisy windows.
struct ChunkPair {
  std::vector<float> clean;
  std::vector<float> noisy;
};
using ChunkCorpus = std::vector<ChunkPair>;

struct NamedArray {
  std::string name;
  tg::Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  Config config;  // model profile + training provenance
  std::vector<NamedArray> arrays;

  GeneratorConfig generator_config() const;
  // FNV-1a over the parameter payloads; identifies the weights.
  uint64_t fingerprint() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct LossRow {
  int64_t epoch = 0;
  int64_t batch = 0;
  double d_loss = 0, g_loss = 0, l1_term = 0;
};
std::string loss_log_to_csv(const std::vector<LossRow>& rows);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRow> log;
};

// Adversarial training from random initialization.
TrainResult train(const ChunkCorpus& corpus, const GeneratorConfig& gcfg,
                  const TrainConfig& tcfg);

// Continued training from a checkpoint; architecture comes from the base.
// Optimizer accumulators restart from zero. With freeze_discriminator only
// the generator updates.
TrainResult finetune(const Checkpoint& base, const ChunkCorpus& corpus,
                     const TrainConfig& tcfg);

// Builds chunk pairs from aligned clean/noisy clips: preemphasis, windowing,
// pairing. Both clips must have equal length.
void append_chunk_pairs(const audio::AudioClip& clean,
                        const audio::AudioClip& noisy,
                        const GeneratorConfig& gcfg, double overlap_fraction,
                        ChunkCorpus* corpus);

// Whole-utterance enhancement: preemphasize, window at overlap 0, run the
// generator per window with seeded z, stitch, trim, deemphasize. Keeps the
// input length exactly.
class Enhancer {
 public:
  explicit Enhancer(const Checkpoint& ckpt);
  audio::AudioClip enhance(const audio::AudioClip& clip, uint64_t z_seed) const;

  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  std::unique_ptr<Generator> generator_;
};

audio::AudioClip enhance(const audio::AudioClip& clip, const Checkpoint& ckpt,
                         uint64_t z_seed);

}  // namespace segan
}  // namespace seganforge

#endif  // SEGANFORGE_SEGAN_H_
