#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectrain/matrix.hpp"
#include "spectrain/probe.hpp"

namespace spectrain {

// Recency weighting over the shift score's difference terms.
enum class AlphaRule { kLinear, kUniform };

inline const char* alpha_rule_name(AlphaRule rule) {
  return rule == AlphaRule::kLinear ? "linear" : "uniform";
}

inline AlphaRule alpha_rule_from_name(const std::string& name) {
  if (name == "linear") return AlphaRule::kLinear;
  if (name == "uniform") return AlphaRule::kUniform;
  throw std::invalid_argument("unknown alpha rule: " + name);
}

// Hyperparameters for the spectrum scores. The window length t0 counts
// scored difference steps; the history buffer keeps t0 + 1 epochs.
struct ScoreConfig {
  double beta = 1.0;          // compression score scale
  double eta = 3.5e3;         // weight of the shift term in the combined score
  std::size_t t0 = 5;         // rolling window length
  double t1 = 0.25;           // continue-training threshold on the final score
  double t2 = 40.0;           // compression gate: spectra this compressed ...
  double delta = 1e-6;        // ... that shift at most this much get frozen out
  double gamma_coeff = 2e-4;  // combined-score scale inside the labeled score
  AlphaRule alpha_rule = AlphaRule::kLinear;

  void validate() const {
    if (t0 < 2) throw std::invalid_argument("ScoreConfig: t0 must be >= 2");
    if (!(beta > 0.0)) throw std::invalid_argument("ScoreConfig: beta must be > 0");
    if (!std::isfinite(t1) || !std::isfinite(t2) || !std::isfinite(delta) ||
        !std::isfinite(eta) || !std::isfinite(gamma_coeff)) {
      throw std::invalid_argument("ScoreConfig: non-finite threshold");
    }
  }
};

// Weight of the term_index-th oldest difference term (0-based): linear runs
// from 1/t0 (oldest) up to exactly 1 (newest); uniform weighs all terms 1.
inline double alpha_weight(std::size_t term_index, std::size_t t0, AlphaRule rule) {
  if (rule == AlphaRule::kUniform) return 1.0;
  return static_cast<double>(term_index + 1) / static_cast<double>(t0);
}

// All scores for one epoch. The gate fires when spectra are already
// compressed (s_o >= t2) yet barely shifting (s_s <= delta), or when a
// hidden layer died; either way the final score is zeroed.
struct ScoreSample {
  std::size_t epoch = 0;
  double compression = 0.0;            // s_o
  double shift = 0.0;                  // s_s
  double combined = 0.0;               // s_t
  double final_score = 0.0;            // s_F
  std::optional<double> labeled_score; // s_Fv, present iff val_accuracy is
  std::optional<double> val_accuracy;  // v_t in [0, 1]
  bool gated = false;
  std::vector<double> layer_compression;
  std::vector<double> layer_shift;
};

namespace detail {

inline void require_window(const SpectrumHistory& history, std::size_t t) {
  if (!history.window_ready(t)) {
    throw WindowError("scoring: window not ready at epoch " + std::to_string(t));
  }
}

inline void require_live_layer(const SpectrumHistory& history, std::size_t layer,
                               std::size_t t) {
  for (std::size_t k = t - history.window_length(); k <= t; ++k) {
    if (history.at(layer, k).degenerate) {
      throw DeadLayerError("scoring: layer " + std::to_string(layer) +
                           " degenerate at epoch " + std::to_string(k));
    }
  }
}

}  // namespace detail

// Compression of one layer's spectra over the window: beta * d_l * t0
// divided by the sum of all normalized singular values across the stored
// t0 + 1 epochs. Uniform spectra give beta*t0/(t0+1); a lone leading value
// gives beta*d_l*t0/(t0+1).
inline double score_layer_compression(const SpectrumHistory& history, std::size_t layer,
                                      std::size_t t, const ScoreConfig& cfg) {
  detail::require_window(history, t);
  detail::require_live_layer(history, layer, t);
  const std::size_t t0 = cfg.t0;
  double sum = 0.0;
  std::size_t d_layer = 0;
  for (std::size_t k = t - t0; k <= t; ++k) {
    const LayerSpectrum& spec = history.at(layer, k);
    d_layer = spec.values.size();
    for (double v : spec.values) sum += v;
  }
  return cfg.beta * static_cast<double>(d_layer) * static_cast<double>(t0) / sum;
}

inline double score_compression(const SpectrumHistory& history, std::size_t t,
                                const ScoreConfig& cfg) {
  const std::size_t layers = history.num_layers();
  if (layers == 0) throw WindowError("score_compression: empty history");
  double sum = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    sum += score_layer_compression(history, l, t, cfg);
  }
  return sum / static_cast<double>(layers);
}

// Recency-weighted decay of one layer's spectrum across the window: term k
// contributes alpha_k * (sigma_{k-1} - sigma_k) summed over ranks, and the
// total is normalized by (t0 - 1) * d_l. Positive when the tail keeps
// shrinking, negative when the spectrum expands again.
inline double score_layer_shift(const SpectrumHistory& history, std::size_t layer,
                                std::size_t t, const ScoreConfig& cfg) {
  detail::require_window(history, t);
  detail::require_live_layer(history, layer, t);
  const std::size_t t0 = cfg.t0;
  double sum = 0.0;
  std::size_t d_layer = 0;
  for (std::size_t term = 0; term < t0; ++term) {
    const std::size_t k = t - t0 + 1 + term;
    const LayerSpectrum& prev = history.at(layer, k - 1);
    const LayerSpectrum& cur = history.at(layer, k);
    d_layer = cur.values.size();
    const double alpha = alpha_weight(term, t0, cfg.alpha_rule);
    double step = 0.0;
    for (std::size_t j = 0; j < cur.values.size(); ++j) {
      step += prev.values[j] - cur.values[j];
    }
    sum += alpha * step;
  }
  return sum / (static_cast<double>(t0 - 1) * static_cast<double>(d_layer));
}

inline double score_shift(const SpectrumHistory& history, std::size_t t,
                          const ScoreConfig& cfg) {
  const std::size_t layers = history.num_layers();
  if (layers == 0) throw WindowError("score_shift: empty history");
  double sum = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    sum += score_layer_shift(history, l, t, cfg);
  }
  return sum / static_cast<double>(layers);
}

// Combined score: |log s_o| + eta * s_s (natural log).
inline double score_combined(double compression, double shift, const ScoreConfig& cfg) {
  if (!(compression > 0.0)) {
    throw std::invalid_argument("score_combined: compression score must be > 0");
  }
  return std::abs(std::log(compression)) + cfg.eta * shift;
}

// Zeroes the combined score when training has frozen: spectra compressed
// past t2 while shifting no more than delta, or a dead layer.
inline std::pair<double, bool> score_final(double compression, double shift, double combined,
                                           const ScoreConfig& cfg, bool dead_layer = false) {
  if (dead_layer || (compression >= cfg.t2 && shift <= cfg.delta)) {
    return {0.0, true};
  }
  return {combined, false};
}

// Label-aware score: scales the checkpoint validation accuracy v by
// 1 + min((1-v)/v, gamma * s_t) with gamma = gamma_coeff * v * epoch. The
// min caps the result at 1; the lower clamp keeps it non-negative when the
// combined score is strongly negative. Gated samples return v unchanged.
inline double score_final_with_labels(double compression, double shift, double combined,
                                      double val_accuracy, std::size_t epoch,
                                      const ScoreConfig& cfg, bool dead_layer = false) {
  if (!(val_accuracy > 0.0 && val_accuracy <= 1.0)) {
    throw std::invalid_argument("score_final_with_labels: accuracy must be in (0, 1]");
  }
  if (dead_layer || (compression >= cfg.t2 && shift <= cfg.delta)) {
    return val_accuracy;
  }
  const double gamma = cfg.gamma_coeff * val_accuracy * static_cast<double>(epoch);
  const double boost = std::min((1.0 - val_accuracy) / val_accuracy, gamma * combined);
  return std::max(0.0, val_accuracy * (1.0 + boost));
}

// Full per-epoch scoring pipeline. A dead layer anywhere in the window
// turns the sample into a gated zero rather than an error.
inline ScoreSample compute_scores(const SpectrumHistory& history, std::size_t t,
                                  const ScoreConfig& cfg,
                                  std::optional<double> val_accuracy = std::nullopt) {
  detail::require_window(history, t);
  ScoreSample sample;
  sample.epoch = t;
  sample.val_accuracy = val_accuracy;
  try {
    const std::size_t layers = history.num_layers();
    for (std::size_t l = 0; l < layers; ++l) {
      sample.layer_compression.push_back(score_layer_compression(history, l, t, cfg));
      sample.layer_shift.push_back(score_layer_shift(history, l, t, cfg));
    }
    for (double v : sample.layer_compression) sample.compression += v;
    sample.compression /= static_cast<double>(layers);
    for (double v : sample.layer_shift) sample.shift += v;
    sample.shift /= static_cast<double>(layers);
    sample.combined = score_combined(sample.compression, sample.shift, cfg);
    auto [final_score, gated] =
        score_final(sample.compression, sample.shift, sample.combined, cfg);
    sample.final_score = final_score;
    sample.gated = gated;
    if (val_accuracy) {
      sample.labeled_score = score_final_with_labels(
          sample.compression, sample.shift, sample.combined, *val_accuracy, t, cfg);
    }
  } catch (const DeadLayerError&) {
    sample = ScoreSample{};
    sample.epoch = t;
    sample.val_accuracy = val_accuracy;
    sample.gated = true;
    if (val_accuracy) sample.labeled_score = *val_accuracy;
  }
  return sample;
}

// ---------------------------------------------------------------------------
// Noise-sensitivity diagnostics.
// ---------------------------------------------------------------------------

inline double vector_norm_sq(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Closed form for a linear map: ||M||_F^2 ||x||^2 / ||Mx||^2.
inline double noise_sensitivity_linear(const Matrix& m, const std::vector<double>& x) {
  if (x.size() != m.cols()) {
    throw std::invalid_argument("noise_sensitivity_linear: dimension mismatch");
  }
  const double x_sq = vector_norm_sq(x);
  if (x_sq == 0.0) throw std::invalid_argument("noise_sensitivity_linear: x must be nonzero");
  double mx_sq = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row(i).data();
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += row[j] * x[j];
    mx_sq += s * s;
  }
  if (mx_sq == 0.0) throw std::invalid_argument("noise_sensitivity_linear: Mx is zero");
  return frobenius_norm_sq(m) * x_sq / mx_sq;
}

// Monte-Carlo estimate of E[ ||M(x + eta*||x||) - M(x)||^2 / ||M(x)||^2 ]
// with standard Gaussian eta, for an arbitrary mapping.
inline double noise_sensitivity_empirical(
    const std::function<std::vector<double>(const std::vector<double>&)>& map,
    const std::vector<double>& x, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("noise_sensitivity_empirical: samples >= 1");
  const std::vector<double> base = map(x);
  const double base_sq = vector_norm_sq(base);
  if (base_sq == 0.0) {
    throw std::invalid_argument("noise_sensitivity_empirical: M(x) is zero");
  }
  const double x_norm = std::sqrt(vector_norm_sq(x));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> perturbed(x.size());
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      perturbed[j] = x[j] + gauss(rng) * x_norm;
    }
    const std::vector<double> out = map(perturbed);
    double diff_sq = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double d = out[j] - base[j];
      diff_sq += d * d;
    }
    total += diff_sq / base_sq;
  }
  return total / static_cast<double>(samples);
}

}  // namespace spectrain
