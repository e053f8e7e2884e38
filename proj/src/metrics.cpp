// metrics.cpp

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

#include "seganforge/metrics.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <mutex>
#include <regex>

#include "seganforge/common.h"

namespace seganforge {
namespace metrics {

namespace {

constexpr double kEps = 2.220446049250313e-16;

int64_t num_frames(int64_t len, int64_t frame, int64_t hop) {
  if (len < frame) return 0;
  return (len - frame) / hop + 1;
}

// Symmetric Hann window without zero endpoints: w[n] = 0.5*(1 - cos(2*pi*(n+1)/(N+1)))
std::vector<double> hanning(int64_t n) {
  std::vector<double> w(size_t(n));
  for (int64_t i = 0; i < n; ++i)
    w[size_t(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(i + 1) / double(n + 1)));
  return w;
}

void trim_pair(const audio::AudioClip& clean, const audio::AudioClip& degraded,
               std::vector<double>* c, std::vector<double>* d) {
  if (clean.sample_rate_hz != degraded.sample_rate_hz)
    raise("metric inputs have different sample rates");
  size_t n = std::min(clean.samples.size(), degraded.samples.size());
  if (n == 0) raise("metric inputs have empty overlap");
  c->resize(n);
  d->resize(n);
  for (size_t i = 0; i < n; ++i) {
    (*c)[i] = double(clean.samples[i]);
    (*d)[i] = double(degraded.samples[i]);
  }
}

// Cached FFTW real-to-complex plans, one per transform size.
class FftCache {
 public:
  static void power_spectrum(const double* frame, int64_t frame_len,
                             int64_t n_fft, double* out_half) {
    fftw_plan plan = instance().plan_for(n_fft);
    double* in = fftw_alloc_real(size_t(n_fft));
    fftw_complex* out = fftw_alloc_complex(size_t(n_fft / 2 + 1));
    std::memcpy(in, frame, size_t(frame_len) * sizeof(double));
    std::memset(in + frame_len, 0, size_t(n_fft - frame_len) * sizeof(double));
    fftw_execute_dft_r2c(plan, in, out);
    for (int64_t j = 0; j < n_fft / 2; ++j)
      out_half[j] = out[j][0] * out[j][0] + out[j][1] * out[j][1];
    fftw_free(in);
    fftw_free(out);
  }

 private:
  static FftCache& instance() {
    static FftCache cache;
    return cache;
  }

  fftw_plan plan_for(int64_t n_fft);

  std::mutex mu_;
  std::map<int64_t, fftw_plan> plans_;
};

fftw_plan FftCache::plan_for(int64_t n_fft) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = plans_.find(n_fft);
  if (it != plans_.end()) return it->second;
  double* in = fftw_alloc_real(size_t(n_fft));
  fftw_complex* out = fftw_alloc_complex(size_t(n_fft / 2 + 1));
  fftw_plan plan = fftw_plan_dft_r2c_1d(int(n_fft), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  plans_[n_fft] = plan;
  return plan;
}

int64_t next_pow2(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Mean of the lowest `keep` fraction of frame values.
double trimmed_mean(std::vector<double> frames, double keep) {
  if (frames.empty()) raise("metric has no valid frames");
  std::sort(frames.begin(), frames.end());
  int64_t k = std::max<int64_t>(1, llround(keep * double(frames.size())));
  k = std::min<int64_t>(k, int64_t(frames.size()));
  double acc = 0.0;
  for (int64_t i = 0; i < k; ++i) acc += frames[size_t(i)];
  return acc / double(k);
}

}  // namespace

int64_t FrameSpec::frame_len(int sample_rate_hz) const {
  return llround(frame_ms * double(sample_rate_hz) / 1000.0);
}

int64_t FrameSpec::hop(int sample_rate_hz) const {
  int64_t h = int64_t(std::floor(double(frame_len(sample_rate_hz)) *
                                 (1.0 - overlap_fraction)));
  return std::max<int64_t>(1, h);
}

// ---------------------------------------------------------------------------
// segmental SNR

double segmental_snr(const audio::AudioClip& clean,
                     const audio::AudioClip& degraded, const FrameSpec& spec,
                     const MetricsOptions& opt) {
  std::vector<double> c, d;
  trim_pair(clean, degraded, &c, &d);
  const int64_t frame = spec.frame_len(clean.sample_rate_hz);
  const int64_t hop = spec.hop(clean.sample_rate_hz);
  const int64_t frames = num_frames(int64_t(c.size()), frame, hop);
  if (frames < 1) raise("segmental_snr: input shorter than one frame");

  double total_clean = 0.0;
  for (double v : c) total_clean += v * v;
  if (total_clean <= 0.0) raise("segmental_snr: clean signal is all zero");

  const std::vector<double> win = hanning(frame);
  double acc = 0.0;
  for (int64_t f = 0; f < frames; ++f) {
    const int64_t start = f * hop;
    double se = 0.0, ne = 0.0;
    for (int64_t i = 0; i < frame; ++i) {
      double cw = c[size_t(start + i)] * win[size_t(i)];
      double dw = d[size_t(start + i)] * win[size_t(i)];
      se += cw * cw;
      ne += (cw - dw) * (cw - dw);
    }
    double snr = 10.0 * std::log10(se / (ne + kEps) + kEps);
    if (opt.ssnr_clipped) {
      snr = std::max(snr, opt.ssnr_floor_db);
      snr = std::min(snr, opt.ssnr_ceil_db);
    }
    acc += snr;
  }
  return acc / double(frames);
}

// ---------------------------------------------------------------------------
// LPC / LLR

std::vector<double> lpc_coefficients(const std::vector<double>& frame,
                                     int order) {
  const int64_t n = int64_t(frame.size());
  if (n <= order) raise("lpc_coefficients: frame shorter than the LPC order");
  std::vector<double> r(size_t(order) + 1, 0.0);
  for (int k = 0; k <= order; ++k) {
    double acc = 0.0;
    for (int64_t i = 0; i + k < n; ++i) acc += frame[size_t(i)] * frame[size_t(i + k)];
    r[size_t(k)] = acc;
  }
  if (r[0] <= 0.0) raise("lpc_coefficients: degenerate frame (zero energy)");

  std::vector<double> pred(size_t(order) + 1, 0.0);  // pred[1..order]
  std::vector<double> prev(size_t(order) + 1, 0.0);
  double err = r[0];
  for (int i = 1; i <= order; ++i) {
    for (int j = 1; j < i; ++j) prev[size_t(j)] = pred[size_t(j)];
    double acc = 0.0;
    for (int j = 1; j < i; ++j) acc += prev[size_t(j)] * r[size_t(i - j)];
    double k = (r[size_t(i)] - acc) / err;
    pred[size_t(i)] = k;
    for (int j = 1; j < i; ++j)
      pred[size_t(j)] = prev[size_t(j)] - k * prev[size_t(i - j)];
    err *= (1.0 - k * k);
    if (err <= 0.0) raise("lpc_coefficients: degenerate recursion");
  }
  std::vector<double> a(size_t(order) + 1);
  a[0] = 1.0;
  for (int i = 1; i <= order; ++i) a[size_t(i)] = -pred[size_t(i)];
  return a;
}

namespace {

// a' * Toeplitz(r) * a evaluated directly.
double toeplitz_quadratic(const std::vector<double>& a,
                          const std::vector<double>& r) {
  const int n = int(a.size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) acc += a[size_t(i)] * a[size_t(j)] * r[size_t(std::abs(i - j))];
  return acc;
}

std::vector<double> autocorr(const std::vector<double>& frame, int order) {
  std::vector<double> r(size_t(order) + 1, 0.0);
  const int64_t n = int64_t(frame.size());
  for (int k = 0; k <= order; ++k) {
    double acc = 0.0;
    for (int64_t i = 0; i + k < n; ++i) acc += frame[size_t(i)] * frame[size_t(i + k)];
    r[size_t(k)] = acc;
  }
  return r;
}

}  // namespace

std::vector<double> llr_frames(const audio::AudioClip& clean,
                               const audio::AudioClip& degraded,
                               const FrameSpec& spec,
                               const MetricsOptions& opt) {
  std::vector<double> c, d;
  trim_pair(clean, degraded, &c, &d);
  const int64_t frame = spec.frame_len(clean.sample_rate_hz);
  const int64_t hop = spec.hop(clean.sample_rate_hz);
  const int64_t frames = num_frames(int64_t(c.size()), frame, hop);
  if (frames < 1) raise("llr: input shorter than one frame");
  const std::vector<double> win = hanning(frame);

  std::vector<double> out;
  std::vector<double> cf(size_t(frame)), df(size_t(frame));
  for (int64_t f = 0; f < frames; ++f) {
    const int64_t start = f * hop;
    for (int64_t i = 0; i < frame; ++i) {
      cf[size_t(i)] = c[size_t(start + i)] * win[size_t(i)];
      df[size_t(i)] = d[size_t(start + i)] * win[size_t(i)];
    }
    try {
      std::vector<double> a_c = lpc_coefficients(cf, opt.lpc_order);
      std::vector<double> a_d = lpc_coefficients(df, opt.lpc_order);
      std::vector<double> r_c = autocorr(cf, opt.lpc_order);
      double num = toeplitz_quadratic(a_d, r_c);
      double den = toeplitz_quadratic(a_c, r_c);
      if (den <= 0.0) continue;  // degenerate frame
      // a_c minimizes the quadratic form, so the ratio is >= 1 up to
      // roundoff; the floor removes the roundoff.
      double ratio = std::max(num / den, 1.0);
      out.push_back(std::log(ratio));
    } catch (const Error&) {
      continue;  // degenerate frame skipped
    }
  }
  if (out.empty()) raise("llr: all frames degenerate");
  return out;
}

double llr(const audio::AudioClip& clean, const audio::AudioClip& degraded,
           const FrameSpec& spec, const MetricsOptions& opt) {
  return trimmed_mean(llr_frames(clean, degraded, spec, opt), opt.frame_keep);
}

// ---------------------------------------------------------------------------
// WSS

namespace {

constexpr int kNumCrit = 25;
constexpr double kCentFreq[kNumCrit] = {
    50.0,    120.0,   190.0,   260.0,   330.0,   400.0,  470.0,
    540.0,   617.372, 703.378, 798.717, 904.128, 1020.38, 1148.30,
    1288.72, 1442.54, 1610.70, 1794.16, 1993.93, 2211.08, 2446.71,
    2701.97, 2978.04, 3276.17, 3597.63};
constexpr double kBandwidth[kNumCrit] = {
    70.0,    70.0,    70.0,    70.0,    70.0,    70.0,    70.0,
    77.3724, 86.0056, 95.3398, 105.411, 116.256, 127.914, 140.423,
    153.823, 168.154, 183.457, 199.776, 217.153, 235.631, 255.255,
    276.072, 298.126, 321.465, 346.136};
constexpr double kKmax = 20.0;
constexpr double kKlocmax = 1.0;

// Gaussian critical-band filters over the first n_fft/2 bins; -30 dB skirt.
std::vector<std::vector<double>> build_crit_filters(int sample_rate_hz,
                                                    int64_t n_fftby2) {
  const double max_freq = double(sample_rate_hz) / 2.0;
  const double bw_min = kBandwidth[0];
  const double min_factor = std::exp(-30.0 / (2.0 * 2.303));
  std::vector<std::vector<double>> filters(kNumCrit,
                                           std::vector<double>(size_t(n_fftby2)));
  for (int band = 0; band < kNumCrit; ++band) {
    double cf = (kCentFreq[band] / max_freq) * double(n_fftby2);
    double bw = (kBandwidth[band] / max_freq) * double(n_fftby2);
    double norm = std::log(bw_min) - std::log(kBandwidth[band]);
    for (int64_t j = 0; j < n_fftby2; ++j) {
      double u = (double(j) - std::floor(cf)) / bw;
      double v = std::exp(-11.0 * u * u + norm);
      filters[size_t(band)][size_t(j)] = v > min_factor ? v : 0.0;
    }
  }
  return filters;
}

void band_energies_db(const double* spec, int64_t n_fftby2,
                      const std::vector<std::vector<double>>& filters,
                      double* energy) {
  for (int band = 0; band < kNumCrit; ++band) {
    double acc = 0.0;
    const auto& filt = filters[size_t(band)];
    for (int64_t j = 0; j < n_fftby2; ++j) acc += spec[j] * filt[size_t(j)];
    energy[band] = 10.0 * std::log10(std::max(acc, 1e-10));
  }
}

// Nearest-peak energies per band, following the reference search: climb
// right on positive slopes, descend left otherwise.
void locate_peaks(const double* energy, const double* slope, double* peak) {
  for (int n = 0; n < kNumCrit - 1; ++n) {
    int n1 = n;
    if (slope[n] > 0.0) {
      while (n1 < kNumCrit - 1 && slope[n1] > 0.0) ++n1;
      peak[n] = energy[n1];
    } else {
      while (n1 > 0 && slope[n1] <= 0.0) --n1;
      peak[n] = energy[n1 + 1];
    }
  }
}

}  // namespace

std::vector<double> wss_frames(const audio::AudioClip& clean,
                               const audio::AudioClip& degraded,
                               const FrameSpec& spec,
                               const MetricsOptions& opt) {
  (void)opt;
  std::vector<double> c, d;
  trim_pair(clean, degraded, &c, &d);
  const int64_t frame = spec.frame_len(clean.sample_rate_hz);
  const int64_t hop = spec.hop(clean.sample_rate_hz);
  const int64_t frames = num_frames(int64_t(c.size()), frame, hop);
  if (frames < 1) raise("wss: input shorter than one frame");
  const std::vector<double> win = hanning(frame);

  const int64_t n_fft = next_pow2(2 * frame);
  const int64_t half = n_fft / 2;
  static std::mutex filt_mu;
  static std::map<std::pair<int, int64_t>, std::vector<std::vector<double>>>
      filt_cache;
  const std::vector<std::vector<double>>* filters;
  {
    std::lock_guard<std::mutex> lock(filt_mu);
    auto key = std::make_pair(clean.sample_rate_hz, half);
    auto it = filt_cache.find(key);
    if (it == filt_cache.end())
      it = filt_cache.emplace(key, build_crit_filters(clean.sample_rate_hz, half))
               .first;
    filters = &it->second;
  }

  std::vector<double> out;
  std::vector<double> cf(size_t(frame)), df(size_t(frame));
  std::vector<double> cspec(size_t(half)), dspec(size_t(half));
  double ce[kNumCrit], de[kNumCrit];
  double cs[kNumCrit - 1], ds[kNumCrit - 1];
  double cpk[kNumCrit - 1], dpk[kNumCrit - 1];

  for (int64_t f = 0; f < frames; ++f) {
    const int64_t start = f * hop;
    for (int64_t i = 0; i < frame; ++i) {
      cf[size_t(i)] = c[size_t(start + i)] * win[size_t(i)];
      df[size_t(i)] = d[size_t(start + i)] * win[size_t(i)];
    }
    FftCache::power_spectrum(cf.data(), frame, n_fft, cspec.data());
    FftCache::power_spectrum(df.data(), frame, n_fft, dspec.data());
    band_energies_db(cspec.data(), half, *filters, ce);
    band_energies_db(dspec.data(), half, *filters, de);
    for (int n = 0; n < kNumCrit - 1; ++n) {
      cs[n] = ce[n + 1] - ce[n];
      ds[n] = de[n + 1] - de[n];
    }
    locate_peaks(ce, cs, cpk);
    locate_peaks(de, ds, dpk);
    double cmax = *std::max_element(ce, ce + kNumCrit);
    double dmax = *std::max_element(de, de + kNumCrit);
    double num = 0.0, wsum = 0.0;
    for (int n = 0; n < kNumCrit - 1; ++n) {
      double wc = (kKmax / (kKmax + cmax - ce[n])) *
                  (kKlocmax / (kKlocmax + cpk[n] - ce[n]));
      double wd = (kKmax / (kKmax + dmax - de[n])) *
                  (kKlocmax / (kKlocmax + dpk[n] - de[n]));
      double w = 0.5 * (wc + wd);
      double diff = cs[n] - ds[n];
      num += w * diff * diff;
      wsum += w;
    }
    out.push_back(num / wsum);
  }
  return out;
}

double wss(const audio::AudioClip& clean, const audio::AudioClip& degraded,
           const FrameSpec& spec, const MetricsOptions& opt) {
  return trimmed_mean(wss_frames(clean, degraded, spec, opt), opt.frame_keep);
}

// ---------------------------------------------------------------------------
// PESQ adapter

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'')
      out += "'\\''";
    else
      out.push_back(ch);
  }
  out += "'";
  return out;
}

std::string substitute(const std::string& tmpl, const std::string& key,
                       const std::string& value) {
  std::string out = tmpl;
  const std::string pat = "{" + key + "}";
  size_t pos = 0;
  while ((pos = out.find(pat, pos)) != std::string::npos) {
    out.replace(pos, pat.size(), value);
    pos += value.size();
  }
  return out;
}

}  // namespace

double pesq_external(const PesqAdapter& adapter, const std::string& clean_path,
                     const std::string& degraded_path) {
  if (!adapter.configured()) throw PesqUnavailable("PESQ adapter not configured");
  std::string cmd = substitute(adapter.command, "clean", shell_quote(clean_path));
  cmd = substitute(cmd, "degraded", shell_quote(degraded_path));
  cmd += " 2>/dev/null";

  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw PesqUnavailable("cannot launch PESQ adapter: " + cmd);
  std::string output;
  char buf[4096];
  size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
  int status = pclose(pipe);
  int exit_code = -1;
  if (WIFEXITED(status)) exit_code = WEXITSTATUS(status);
  if (exit_code == 126 || exit_code == 127)
    throw PesqUnavailable("PESQ adapter executable not runnable (exit " +
                          std::to_string(exit_code) + ")");
  if (exit_code != 0)
    raise(strprintf("PESQ adapter failed (exit %d), output: %.200s", exit_code,
                    output.c_str()));

  std::regex re(adapter.pattern);
  std::string last;
  for (auto it = std::sregex_iterator(output.begin(), output.end(), re);
       it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    last = (m.size() > 1 && m[1].matched) ? m[1].str() : m[0].str();
  }
  if (last.empty())
    raise(strprintf("cannot parse PESQ adapter output: %.200s", output.c_str()));
  char* end = nullptr;
  double value = std::strtod(last.c_str(), &end);
  if (end == last.c_str() || !std::isfinite(value))
    raise(strprintf("cannot parse PESQ value from \"%s\"", last.c_str()));
  if (value < -0.5 || value > 4.5)
    raise(strprintf("PESQ value %g outside [-0.5, 4.5]; adapter output: %.200s",
                    value, output.c_str()));
  return value;
}

// ---------------------------------------------------------------------------
// composites & corpus evaluation

CompositeScores composite_measures(double pesq, double llr_v, double wss_v,
                                   double ssnr_v) {
  auto clamp = [](double v) { return std::min(5.0, std::max(1.0, v)); };
  CompositeScores s;
  s.csig = clamp(3.093 - 1.029 * llr_v + 0.603 * pesq - 0.009 * wss_v);
  s.cbak = clamp(1.634 + 0.478 * pesq - 0.007 * wss_v + 0.063 * ssnr_v);
  s.covl = clamp(1.594 + 0.805 * pesq - 0.512 * llr_v - 0.007 * wss_v);
  return s;
}

namespace {

std::string condition_key(const std::string& noise_type, double snr_db) {
  return noise_type + "@" + format_double(snr_db);
}

Averages average_rows(const std::vector<const UtteranceRow*>& rows) {
  Averages avg;
  double pesq = 0, csig = 0, cbak = 0, covl = 0;
  int64_t n_pesq = 0;
  for (const auto* r : rows) {
    avg.ssnr += r->ssnr;
    avg.llr += r->llr;
    avg.wss += r->wss;
    if (r->pesq) {
      pesq += *r->pesq;
      csig += *r->csig;
      cbak += *r->cbak;
      covl += *r->covl;
      ++n_pesq;
    }
    ++avg.n_utterances;
  }
  if (avg.n_utterances > 0) {
    avg.ssnr /= double(avg.n_utterances);
    avg.llr /= double(avg.n_utterances);
    avg.wss /= double(avg.n_utterances);
  }
  if (n_pesq > 0 && n_pesq == avg.n_utterances) {
    avg.pesq = pesq / double(n_pesq);
    avg.csig = csig / double(n_pesq);
    avg.cbak = cbak / double(n_pesq);
    avg.covl = covl / double(n_pesq);
  }
  return avg;
}

}  // namespace

MetricsReport evaluate_corpus(std::vector<EvalPair> pairs,
                              const FrameSpec& spec, const PesqAdapter* adapter,
                              const MetricsOptions& opt) {
  if (pairs.empty()) raise("evaluate_corpus: empty pair list");
  std::sort(pairs.begin(), pairs.end(), [](const EvalPair& a, const EvalPair& b) {
    return a.degraded.utterance_id < b.degraded.utterance_id;
  });

  bool pesq_enabled = adapter != nullptr && adapter->configured();
  bool pesq_warned = false;

  MetricsReport report;
  for (auto& pair : pairs) {
    UtteranceRow row;
    row.utterance_id = pair.degraded.utterance_id;
    if (pair.degraded.condition) {
      row.noise_type = pair.degraded.condition->noise_type;
      row.snr_db = pair.degraded.condition->snr_db;
    }
    try {
      row.ssnr = segmental_snr(pair.clean, pair.degraded, spec, opt);
      row.llr = llr(pair.clean, pair.degraded, spec, opt);
      row.wss = wss(pair.clean, pair.degraded, spec, opt);
      if (pesq_enabled) {
        std::string cp = pair.clean_path, dp = pair.degraded_path;
        std::string tmp_c, tmp_d;
        if (cp.empty() || dp.empty()) {
          auto dir = std::filesystem::temp_directory_path();
          tmp_c = (dir / (row.utterance_id + ".pesq_clean.wav")).string();
          tmp_d = (dir / (row.utterance_id + ".pesq_degraded.wav")).string();
          audio::write_wav(pair.clean, tmp_c);
          audio::write_wav(pair.degraded, tmp_d);
          cp = tmp_c;
          dp = tmp_d;
        }
        try {
          double p = pesq_external(*adapter, cp, dp);
          CompositeScores cs = composite_measures(p, row.llr, row.wss, row.ssnr);
          row.pesq = p;
          row.csig = cs.csig;
          row.cbak = cs.cbak;
          row.covl = cs.covl;
        } catch (const PesqUnavailable& e) {
          if (!pesq_warned) {
            fprintf(stderr, "warning: PESQ unavailable, composites skipped: %s\n",
                    e.what());
            pesq_warned = true;
          }
          pesq_enabled = false;
        }
        if (!tmp_c.empty()) {
          std::error_code ec;
          std::filesystem::remove(tmp_c, ec);
          std::filesystem::remove(tmp_d, ec);
        }
      }
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
      ++report.n_failed;
    }
    report.rows.push_back(std::move(row));
  }

  // A late adapter outage must not leave a half-covered report.
  if (!pesq_enabled)
    for (auto& row : report.rows) {
      row.pesq.reset();
      row.csig.reset();
      row.cbak.reset();
      row.covl.reset();
    }

  std::vector<const UtteranceRow*> ok_rows;
  std::map<std::string, std::vector<const UtteranceRow*>> groups;
  for (const auto& row : report.rows) {
    if (!row.ok) continue;
    ok_rows.push_back(&row);
    groups[condition_key(row.noise_type, row.snr_db)].push_back(&row);
  }
  if (!ok_rows.empty()) report.overall = average_rows(ok_rows);
  for (const auto& [key, rows] : groups)
    report.by_condition.emplace_back(key, average_rows(rows));
  return report;
}

std::string report_to_csv(const MetricsReport& report) {
  std::string out =
      "utterance_id,noise_type,snr_db,pesq,csig,cbak,covl,ssnr,llr,wss\n";
  auto opt_str = [](const std::optional<double>& v) {
    return v ? strprintf("%.6f", *v) : std::string();
  };
  for (const auto& r : report.rows) {
    if (r.ok) {
      out += strprintf("%s,%s,%s,%s,%s,%s,%s,%.6f,%.6f,%.6f\n",
                       r.utterance_id.c_str(), r.noise_type.c_str(),
                       format_double(r.snr_db).c_str(), opt_str(r.pesq).c_str(),
                       opt_str(r.csig).c_str(), opt_str(r.cbak).c_str(),
                       opt_str(r.covl).c_str(), r.ssnr, r.llr, r.wss);
    } else {
      out += strprintf("%s,%s,%s,,,,,,,\n", r.utterance_id.c_str(),
                       r.noise_type.c_str(), format_double(r.snr_db).c_str());
    }
  }
  return out;
}

}  // namespace metrics
}  // namespace seganforge
