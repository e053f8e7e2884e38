// audio.cpp

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

#include "seganforge/audio.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seganforge/common.h"
#include "seganforge/rng.h"

namespace seganforge {
namespace audio {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return uint16_t(p[0]) | uint16_t(uint32_t(p[1]) << 8);
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatIeeeFloat = 3;

double mean_square(const std::vector<float>& v) {
  double acc = 0.0;
  for (float s : v) acc += double(s) * double(s);
  return v.empty() ? 0.0 : acc / double(v.size());
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise("cannot open WAV file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    raise("malformed WAV header (not RIFF/WAVE): " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* chunk = p + pos;
    uint32_t chunk_len = read_u32(chunk + 4);
    const unsigned char* body = chunk + 8;
    if (pos + 8 + chunk_len > n)
      raise("truncated WAV chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_len < 16) raise("malformed fmt chunk in " + path);
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt) raise("missing fmt chunk in " + path);
  if (data == nullptr) raise("missing data chunk in " + path);
  if (channels == 0) raise("malformed fmt chunk (0 channels) in " + path);
  if (data_len == 0) raise("empty clip (zero-length data chunk) in " + path);

  bool pcm16 = format == kFormatPcm && bits == 16;
  bool f32 = format == kFormatIeeeFloat && bits == 32;
  bool f64 = format == kFormatIeeeFloat && bits == 64;
  if (!pcm16 && !f32 && !f64)
    raise(strprintf("unsupported WAV codec (format %u, %u bits) in %s", format,
                    bits, path.c_str()));
  if (int(rate) != kPipelineSampleRate)
    raise(strprintf("unsupported sample rate %u Hz (pipeline requires %d) in %s",
                    rate, kPipelineSampleRate, path.c_str()));
  if (channels > 1)
    fprintf(stderr, "warning: %s has %u channels; keeping channel 0\n",
            path.c_str(), channels);

  size_t bytes_per_sample = bits / 8u;
  size_t frame_bytes = bytes_per_sample * channels;
  size_t frames = data_len / frame_bytes;
  if (frames == 0) raise("empty clip (no complete frames) in " + path);

  AudioClip clip;
  clip.sample_rate_hz = int(rate);
  clip.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    const unsigned char* s = data + i * frame_bytes;  // channel 0
    if (pcm16) {
      int16_t v = int16_t(read_u16(s));
      clip.samples[i] = float(v) / 32768.0f;
    } else if (f32) {
      float v;
      std::memcpy(&v, s, 4);
      clip.samples[i] = v;
    } else {
      double v;
      std::memcpy(&v, s, 8);
      clip.samples[i] = float(v);
    }
    if (!std::isfinite(clip.samples[i]))
      raise("non-finite sample in " + path);
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
  if (clip.samples.empty()) raise("refusing to write empty clip: " + path);
  std::string out;
  out.reserve(44 + clip.samples.size() * 2);
  uint32_t data_len = uint32_t(clip.samples.size() * 2);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);  // mono
  put_u32(out, uint32_t(clip.sample_rate_hz));
  put_u32(out, uint32_t(clip.sample_rate_hz) * 2);  // byte rate
  put_u16(out, 2);                                  // block align
  put_u16(out, 16);                                 // bits per sample
  out += "data";
  put_u32(out, data_len);
  for (float s : clip.samples) {
    long q = std::lround(double(s) * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put_u16(out, uint16_t(int16_t(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise("cannot open WAV for writing: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) raise("WAV write failed: " + path);
}

MixResult mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                     double snr_db, uint64_t rng_seed) {
  if (clean.sample_rate_hz != kPipelineSampleRate ||
      noise.sample_rate_hz != kPipelineSampleRate)
    raise("mix_at_snr requires 16 kHz inputs");
  if (clean.samples.empty() || noise.samples.empty())
    raise("mix_at_snr requires non-empty inputs");

  double p_clean = mean_square(clean.samples);
  if (p_clean <= 0.0)
    raise("degenerate input: clean signal has zero power (utterance " +
          clean.utterance_id + ")");

  Rng rng(rng_seed);
  int64_t noise_len = noise.num_samples();
  int64_t offset = rng.uniform_int(0, noise_len - 1);

  // Select the (wrapping) noise segment aligned with the clean signal.
  std::vector<float> segment(clean.samples.size());
  for (size_t i = 0; i < segment.size(); ++i)
    segment[i] = noise.samples[size_t((offset + int64_t(i)) % noise_len)];

  double p_noise = mean_square(segment);
  if (p_noise <= 0.0)
    raise("degenerate input: selected noise segment has zero power (noise " +
          noise.utterance_id + ")");

  double alpha = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));

  MixResult result;
  result.alpha = alpha;
  result.noise_offset = offset;
  result.mixed = clean;
  result.mixed.samples.resize(clean.samples.size());
  int64_t clipped = 0;
  for (size_t i = 0; i < segment.size(); ++i) {
    double v = double(clean.samples[i]) + alpha * double(segment[i]);
    if (v > 1.0) {
      v = 1.0;
      ++clipped;
    } else if (v < -1.0) {
      v = -1.0;
      ++clipped;
    }
    result.mixed.samples[i] = float(v);
  }
  result.clipped_samples = clipped;
  return result;
}

AudioClip preemphasis(const AudioClip& clip, float coef) {
  if (coef < 0.0f || coef >= 1.0f)
    raise(strprintf("preemphasis coefficient must be in [0, 1), got %g",
                    double(coef)));
  AudioClip out = clip;
  double prev = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    double x = double(clip.samples[i]);
    out.samples[i] = float(x - double(coef) * prev);
    prev = x;
  }
  return out;
}

AudioClip deemphasis(const AudioClip& clip, float coef) {
  if (coef < 0.0f || coef >= 1.0f)
    raise(strprintf("deemphasis coefficient must be in [0, 1), got %g",
                    double(coef)));
  AudioClip out = clip;
  double prev = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    double y = double(clip.samples[i]) + double(coef) * prev;
    out.samples[i] = float(y);
    prev = y;
  }
  return out;
}

std::vector<Chunk> chunk_signal(const AudioClip& clip, int64_t window_len,
                                double overlap_fraction) {
  if (window_len <= 0) raise("chunk_signal: window_len must be positive");
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
    raise("chunk_signal: overlap_fraction must be in [0, 1)");
  int64_t hop = int64_t(std::llround(double(window_len) * (1.0 - overlap_fraction)));
  if (hop < 1) hop = 1;

  std::vector<Chunk> chunks;
  int64_t len = clip.num_samples();
  if (len == 0) return chunks;
  int64_t offset = 0;
  while (true) {
    Chunk c;
    c.source_utterance = clip.utterance_id;
    c.offset = offset;
    c.samples.assign(size_t(window_len), 0.0f);
    int64_t avail = std::min(window_len, len - offset);
    for (int64_t i = 0; i < avail; ++i)
      c.samples[size_t(i)] = clip.samples[size_t(offset + i)];
    c.padded_tail = window_len - avail;
    chunks.push_back(std::move(c));
    if (offset + window_len >= len) break;
    offset += hop;
  }
  return chunks;
}

AudioClip reconstruct(const std::vector<Chunk>& chunks, const AudioClip& like) {
  AudioClip out = like;
  out.samples.clear();
  if (chunks.empty()) return out;
  int64_t window = int64_t(chunks.front().samples.size());
  for (size_t i = 0; i < chunks.size(); ++i) {
    const Chunk& c = chunks[i];
    if (c.offset != int64_t(i) * window)
      raise("reconstruct expects non-overlapping chunks (overlap 0)");
    out.samples.insert(out.samples.end(), c.samples.begin(), c.samples.end());
  }
  int64_t tail = chunks.back().padded_tail;
  out.samples.resize(out.samples.size() - size_t(tail));
  return out;
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise("cannot open manifest: " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '\t')) fields.push_back(f);
    if (fields.size() != 8)
      raise(strprintf("%s:%d: expected 8 tab-separated fields, got %zu",
                      path.c_str(), lineno, fields.size()));
    ManifestRow r;
    r.utterance_id = fields[0];
    r.speaker_id = fields[1];
    r.language = fields[2];
    r.clean_path = fields[3];
    r.noise_type = fields[4];
    r.snr_db = std::strtod(fields[5].c_str(), nullptr);
    r.mixed_path = fields[6];
    r.duration_s = std::strtod(fields[7].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string manifest_to_string(const std::vector<ManifestRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.utterance_id + "\t" + r.speaker_id + "\t" + r.language + "\t" +
           r.clean_path + "\t" + r.noise_type + "\t" +
           format_double(r.snr_db) + "\t" + r.mixed_path + "\t" +
           format_double(r.duration_s) + "\n";
  }
  return out;
}

void write_manifest(const std::vector<ManifestRow>& rows,
                    const std::string& path) {
  write_text_file_atomic(path, manifest_to_string(rows));
}

}  // namespace audio
}  // namespace seganforge
