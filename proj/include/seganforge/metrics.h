// metrics.h

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

// Objective speech-quality measures: segmental SNR, LPC-based log-likelihood
// ratio, weighted spectral slope distance, an external PESQ adapter, and the
// CSIG/CBAK/COVL composite MOS predictors.

#ifndef SEGANFORGE_METRICS_H_
#define SEGANFORGE_METRICS_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seganforge/audio.h"

namespace seganforge {
namespace metrics {

// 30 ms Hanning frames with 75% overlap, shared by all three DSP measures.
struct FrameSpec {
  double frame_ms = 30.0;
  double overlap_fraction = 0.75;

  int64_t frame_len(int sample_rate_hz) const;
  int64_t hop(int sample_rate_hz) const;
};

struct MetricsOptions {
  int lpc_order = 10;
  double ssnr_floor_db = -10.0;
  double ssnr_ceil_db = 35.0;
  bool ssnr_clipped = true;   // unclipped variant for sensitivity analysis
  double frame_keep = 0.95;   // lowest-95%-frames rule for LLR and WSS
};

// Mean over frames of 10*log10(sum(clean^2)/sum((clean-degraded)^2)), each
// frame clipped to [floor, ceil]. Inputs are trimmed to the shorter length.
double segmental_snr(const audio::AudioClip& clean,
                     const audio::AudioClip& degraded, const FrameSpec& spec,
                     const MetricsOptions& opt = {});

// Levinson-Durbin solution of the autocorrelation normal equations on a
// (windowed) frame. Returns a[0..order] with a[0] = 1. Raises on a
// degenerate frame (zero autocorrelation energy).
std::vector<double> lpc_coefficients(const std::vector<double>& frame,
                                     int order);

// log( (a_d R_c a_d') / (a_c R_c a_c') ) per frame; mean of the lowest 95%.
double llr(const audio::AudioClip& clean, const audio::AudioClip& degraded,
           const FrameSpec& spec, const MetricsOptions& opt = {});
// Per-frame values (ascending sort applied by llr itself, not here).
std::vector<double> llr_frames(const audio::AudioClip& clean,
                               const audio::AudioClip& degraded,
                               const FrameSpec& spec,
                               const MetricsOptions& opt = {});

// Klatt-style weighted spectral slope distance over 25 critical bands
// (Kmax = 20, Klocmax = 1); mean of the lowest 95% of frames.
double wss(const audio::AudioClip& clean, const audio::AudioClip& degraded,
           const FrameSpec& spec, const MetricsOptions& opt = {});
std::vector<double> wss_frames(const audio::AudioClip& clean,
                               const audio::AudioClip& degraded,
                               const FrameSpec& spec,
                               const MetricsOptions& opt = {});

// External wide-band PESQ. The command template runs with {clean} and
// {degraded} replaced by shell-quoted file paths; stdout is searched with
// `pattern` (ECMAScript regex, last match wins, capture group 1 if present).
struct PesqAdapter {
  std::string command;
  std::string pattern = R"([-+]?[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?)";

  bool configured() const { return !command.empty(); }
};

// Thrown when the adapter's executable cannot be run at all; callers treat
// the metric as unavailable rather than failing.
class PesqUnavailable : public Error {
 public:
  using Error::Error;
};

// Runs the adapter; returns the parsed MOS in [-0.5, 4.5]. Raises
// PesqUnavailable if the command cannot be executed, Error on garbage output.
double pesq_external(const PesqAdapter& adapter, const std::string& clean_path,
                     const std::string& degraded_path);

struct CompositeScores {
  double csig = 0, cbak = 0, covl = 0;
};

// Linear MOS predictors, each clamped to [1, 5]:
//   csig = 3.093 - 1.029*llr + 0.603*pesq - 0.009*wss
//   cbak = 1.634 + 0.478*pesq - 0.007*wss + 0.063*ssnr
//   covl = 1.594 + 0.805*pesq - 0.512*llr - 0.007*wss
CompositeScores composite_measures(double pesq, double llr, double wss,
                                   double ssnr);

struct UtteranceRow {
  std::string utterance_id;
  std::string noise_type;
  double snr_db = 0.0;
  std::optional<double> pesq, csig, cbak, covl;
  double ssnr = 0, llr = 0, wss = 0;
  bool ok = true;
  std::string error;
};

struct Averages {
  std::optional<double> pesq, csig, cbak, covl;
  double ssnr = 0, llr = 0, wss = 0;
  int64_t n_utterances = 0;
};

struct MetricsReport {
  Averages overall;
  // Keyed by (noise_type, snr_db), in sorted order.
  std::vector<std::pair<std::string, Averages>> by_condition;
  std::vector<UtteranceRow> rows;
  int64_t n_failed = 0;
};

struct EvalPair {
  audio::AudioClip clean;
  audio::AudioClip degraded;
  // Required only when a PESQ adapter is in use; temp files are written
  // otherwise.
  std::string clean_path;
  std::string degraded_path;
};

// Evaluates every pair (sorted by utterance id); per-utterance failures
// become flagged rows, not aborts. Means are unweighted.
MetricsReport evaluate_corpus(std::vector<EvalPair> pairs,
                              const FrameSpec& spec,
                              const PesqAdapter* adapter = nullptr,
                              const MetricsOptions& opt = {});

// CSV with columns: utterance_id, noise_type, snr_db, pesq, csig, cbak,
// covl, ssnr, llr, wss.
std::string report_to_csv(const MetricsReport& report);

}  // namespace metrics
}  // namespace seganforge

#endif  // SEGANFORGE_METRICS_H_
