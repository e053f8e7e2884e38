// audio.h

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

#ifndef SEGANFORGE_AUDIO_H_
#define SEGANFORGE_AUDIO_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace seganforge {
namespace audio {

inline constexpr int kPipelineSampleRate = 16000;
inline constexpr float kDefaultPreemphasis = 0.95f;

struct NoiseCondition {
  std::string noise_type;
  double snr_db = 0.0;
};

// Mono waveform, samples in [-1, 1]. The universal signal carrier: every
// pipeline entry point requires sample_rate_hz == 16000.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kPipelineSampleRate;
  std::string utterance_id;
  std::string speaker_id;
  std::string language;
  std::optional<NoiseCondition> condition;

  int64_t num_samples() const { return int64_t(samples.size()); }
  double duration_s() const {
    return double(samples.size()) / double(sample_rate_hz);
  }
};

// Fixed-length analysis/training window cut from a clip.
struct Chunk {
  std::vector<float> samples;  // length exactly window_len
  std::string source_utterance;
  int64_t offset = 0;       // sample index into the source clip
  int64_t padded_tail = 0;  // zero samples appended at the end
};

struct MixResult {
  AudioClip mixed;
  double alpha = 0.0;           // noise gain applied
  int64_t noise_offset = 0;     // seed-chosen start into the noise clip
  int64_t clipped_samples = 0;  // samples hard-clipped to [-1, 1]
};

// Reads a RIFF/WAVE file (16-bit PCM or IEEE float). Multichannel input keeps
// channel 0 and warns on stderr. Rejects sample rates other than 16 kHz.
AudioClip load_wav(const std::string& path);

// Writes 16-bit PCM little-endian. Round-trips within 1/32768 per sample.
void write_wav(const AudioClip& clip, const std::string& path);

// Mixes clean + alpha * noise at the requested SNR. The noise segment starts
// at a seed-deterministic random offset and wraps around if the noise clip is
// shorter than the speech. Powers are full-utterance mean squares of the
// selected segment. Output is hard-clipped to [-1, 1]; the count of clipped
// samples is surfaced in the result.
MixResult mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                     double snr_db, uint64_t rng_seed);

// y[n] = x[n] - coef * x[n-1], x[-1] = 0.
AudioClip preemphasis(const AudioClip& clip, float coef = kDefaultPreemphasis);
// Exact inverse recursion of preemphasis.
AudioClip deemphasis(const AudioClip& clip, float coef = kDefaultPreemphasis);

// Cuts the clip into windows of window_len with hop window_len*(1-overlap).
// Windows are emitted until the clip is covered; the final window is
// zero-padded. With overlap 0, reconstruct() inverts this bit-exactly.
std::vector<Chunk> chunk_signal(const AudioClip& clip, int64_t window_len,
                                double overlap_fraction);

// Concatenates non-overlapping chunks and trims the padded tail.
AudioClip reconstruct(const std::vector<Chunk>& chunks,
                      const AudioClip& like = AudioClip{});

// Corpus manifest: one tab-separated record per mixed utterance.
struct ManifestRow {
  std::string utterance_id;
  std::string speaker_id;
  std::string language;
  std::string clean_path;
  std::string noise_type;
  double snr_db = 0.0;
  std::string mixed_path;
  double duration_s = 0.0;
};

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestRow>& rows,
                    const std::string& path);
std::string manifest_to_string(const std::vector<ManifestRow>& rows);

}  // namespace audio
}  // namespace seganforge

#endif  // SEGANFORGE_AUDIO_H_
