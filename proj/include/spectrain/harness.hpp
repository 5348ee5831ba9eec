#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spectrain/dataset.hpp"
#include "spectrain/network.hpp"
#include "spectrain/probe.hpp"
#include "spectrain/rng.hpp"
#include "spectrain/scoring.hpp"

namespace spectrain {

enum class Outcome { kSuccess, kFailure };  // cleared / missed the accuracy threshold
enum class Decision { kContinue, kDiscard };
enum class RunMode { kFull, kGiveUp };

inline const char* outcome_name(Outcome o) {
  return o == Outcome::kSuccess ? "success" : "failure";
}
inline const char* decision_name(Decision d) {
  return d == Decision::kContinue ? "continue" : "discard";
}

// One trainable configuration: dataset + architecture + initialization,
// plus the training recipe and scoring setup. Epochs are numbered from 1.
struct DaiSpec {
  const LabeledDataset* train = nullptr;
  const LabeledDataset* val = nullptr;
  MlpSpec arch;
  double init_scale = 1.0;
  std::uint64_t init_seed = 0;
  OptimizerKind optimizer = OptimizerKind::RmsProp;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t schedule_seed = 0;
  std::size_t final_epoch = 100;
  std::vector<std::size_t> checkpoints;
  ScoreConfig score;
  double success_threshold = 0.65;

  void validate() const {
    if (!train || !val) throw std::invalid_argument("DaiSpec: datasets not set");
    arch.validate();
    score.validate();
    if (arch.input_dim != train->dim() || arch.input_dim != val->dim()) {
      throw std::invalid_argument("DaiSpec: architecture input dim != dataset dim");
    }
    if (final_epoch == 0) throw std::invalid_argument("DaiSpec: final epoch must be >= 1");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      const std::size_t cp = checkpoints[i];
      if (cp == 0 || cp >= final_epoch) {
        throw std::invalid_argument("DaiSpec: checkpoint " + std::to_string(cp) +
                                    " must lie in [1, final_epoch)");
      }
      if (i > 0 && checkpoints[i - 1] >= cp) {
        throw std::invalid_argument("DaiSpec: checkpoints must be strictly increasing");
      }
    }
    if (!(success_threshold > 0.0 && success_threshold < 1.0)) {
      throw std::invalid_argument("DaiSpec: success threshold must be in (0, 1)");
    }
  }
};

// Continue iff the final score strictly clears the t1 threshold; gated
// samples carry a zero score and are always discarded.
inline Decision decide(const ScoreSample& sample, const ScoreConfig& cfg) {
  return sample.final_score > cfg.t1 ? Decision::kContinue : Decision::kDiscard;
}

struct CheckpointDecision {
  std::size_t epoch = 0;
  bool scored = false;  // the spectrum window was ready at this epoch
  Decision decision = Decision::kContinue;
  double final_score = 0.0;
  double labeled_score = 0.0;
  double val_accuracy = 0.0;
  bool gated = false;
};

// Everything observed while training one configuration. Per-epoch vectors
// are indexed by epoch - 1 and stop early for diverged or given-up runs.
struct RunRecord {
  DaiSpec spec;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
  std::vector<double> epoch_loss;
  std::vector<std::optional<ScoreSample>> scores;
  std::vector<double> epoch_seconds;
  std::vector<CheckpointDecision> decisions;
  bool diverged = false;
  std::size_t epochs_trained = 0;
  double final_val_accuracy = std::numeric_limits<double>::quiet_NaN();
  Outcome final_class = Outcome::kFailure;
};

// Trains one configuration epoch by epoch, probing spectra and scoring
// after every epoch. kGiveUp stops at the first checkpoint that says
// discard; kFull always reaches the final epoch. A non-finite loss or
// activation marks the run diverged instead of failing the caller.
inline RunRecord run_dai(const DaiSpec& spec, RunMode mode) {
  spec.validate();
  RunRecord rec;
  rec.spec = spec;

  MlpParams params = init_normal_xavier(spec.arch, spec.init_scale, spec.init_seed);
  OptimizerState state = make_optimizer(spec.optimizer, spec.learning_rate, params);
  BatchSchedule schedule{spec.batch_size, spec.schedule_seed};
  SpectrumHistory history(spec.score.t0);

  for (std::size_t epoch = 1; epoch <= spec.final_epoch; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    try {
      rec.epoch_loss.push_back(train_epoch(params, state, *spec.train, schedule, epoch));
      rec.train_accuracy.push_back(accuracy(params, *spec.train));
      rec.val_accuracy.push_back(accuracy(params, *spec.val));
      history.push(capture_spectra(params, spec.val->features, epoch), epoch);
    } catch (const NonFiniteError&) {
      rec.diverged = true;
      rec.epoch_loss.resize(rec.epochs_trained);
      rec.train_accuracy.resize(rec.epochs_trained);
      rec.val_accuracy.resize(rec.epochs_trained);
      break;
    }

    std::optional<ScoreSample> sample;
    if (history.window_ready(epoch)) {
      sample = compute_scores(history, epoch, spec.score, rec.val_accuracy.back());
    }
    rec.scores.push_back(sample);
    rec.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    rec.epochs_trained = epoch;

    if (std::find(spec.checkpoints.begin(), spec.checkpoints.end(), epoch) !=
        spec.checkpoints.end()) {
      CheckpointDecision cd;
      cd.epoch = epoch;
      cd.scored = sample.has_value();
      cd.val_accuracy = rec.val_accuracy.back();
      if (sample) {
        cd.final_score = sample->final_score;
        cd.labeled_score = sample->labeled_score.value_or(0.0);
        cd.gated = sample->gated;
        cd.decision = decide(*sample, spec.score);
      } else {
        // No window yet: no evidence to discard on.
        cd.decision = Decision::kContinue;
      }
      rec.decisions.push_back(cd);
      if (mode == RunMode::kGiveUp && cd.decision == Decision::kDiscard) break;
    }
  }

  if (!rec.diverged && !rec.val_accuracy.empty()) {
    rec.final_val_accuracy = rec.val_accuracy.back();
    rec.final_class = rec.final_val_accuracy >= spec.success_threshold ? Outcome::kSuccess
                                                                       : Outcome::kFailure;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Rank statistics and classification tables.
// ---------------------------------------------------------------------------

// Fractional (mid) ranks, 1-based; ties share the average of their ranks.
inline std::vector<double> midranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation: Pearson correlation of the mid-rank vectors.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");
  for (const auto* v : {&x, &y}) {
    if (std::adjacent_find(v->begin(), v->end(), std::not_equal_to<>()) == v->end()) {
      throw std::invalid_argument("spearman: constant input has zero rank variance");
    }
  }
  const std::vector<double> rx = midranks(x);
  const std::vector<double> ry = midranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  return cov / std::sqrt(vx * vy);
}

// 2x2 classification table with success as the positive class;
// rows = truth, columns = prediction.
struct Confusion {
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  std::size_t total() const { return tp + fn + fp + tn; }
};

inline Confusion confusion(const std::vector<Outcome>& predicted,
                           const std::vector<Outcome>& actual) {
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument("confusion: length mismatch");
  }
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred = predicted[i] == Outcome::kSuccess;
    const bool act = actual[i] == Outcome::kSuccess;
    if (act && pred) ++c.tp;
    if (act && !pred) ++c.fn;
    if (!act && pred) ++c.fp;
    if (!act && !pred) ++c.tn;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Campaigns: many initializations (and optionally architectures) of one
// dataset, evaluated checkpoint by checkpoint against the final outcome.
// ---------------------------------------------------------------------------

// Per-checkpoint comparison of the three predictors against the final
// validation accuracy. Correlations are absent when a predictor is
// constant across runs or the window was not yet ready.
struct CheckpointEval {
  std::size_t epoch = 0;
  std::optional<double> spearman_final_score;    // s_F vs final accuracy
  std::optional<double> spearman_labeled_score;  // s_Fv vs final accuracy
  std::optional<double> spearman_val_accuracy;   // v at checkpoint vs final
  Confusion confusion_final_score;
  Confusion confusion_labeled_score;
  Confusion confusion_val_accuracy;
};

// Minimal per-run slice needed to evaluate a campaign; also reconstructable
// from a stored report so evaluations can be re-derived offline.
struct RunEvalInput {
  bool diverged = false;
  double final_val_accuracy = 0.0;
  Outcome final_class = Outcome::kFailure;
  // parallel to the checkpoint list
  std::vector<CheckpointDecision> checkpoints;
};

inline std::vector<CheckpointEval> evaluate_checkpoints(
    const std::vector<RunEvalInput>& runs, const std::vector<std::size_t>& checkpoints,
    double t1, double success_threshold) {
  std::vector<const RunEvalInput*> usable;
  for (const auto& r : runs) {
    if (!r.diverged) usable.push_back(&r);
  }
  if (usable.size() < 2) {
    throw std::runtime_error("evaluate_checkpoints: fewer than 2 non-diverged runs");
  }

  std::vector<double> finals;
  std::vector<Outcome> actual;
  for (const auto* r : usable) {
    finals.push_back(r->final_val_accuracy);
    actual.push_back(r->final_class);
  }

  std::vector<CheckpointEval> evals;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    CheckpointEval eval;
    eval.epoch = checkpoints[c];
    std::vector<double> sf, sfv, vacc;
    std::vector<Outcome> pred_sf, pred_sfv, pred_v;
    bool all_scored = true;
    for (const auto* r : usable) {
      const CheckpointDecision& cd = r->checkpoints.at(c);
      all_scored = all_scored && cd.scored;
      sf.push_back(cd.final_score);
      sfv.push_back(cd.labeled_score);
      vacc.push_back(cd.val_accuracy);
      pred_sf.push_back(cd.final_score > t1 ? Outcome::kSuccess : Outcome::kFailure);
      pred_sfv.push_back(cd.labeled_score >= success_threshold ? Outcome::kSuccess
                                                               : Outcome::kFailure);
      pred_v.push_back(cd.val_accuracy >= success_threshold ? Outcome::kSuccess
                                                            : Outcome::kFailure);
    }
    auto guarded_spearman = [&](const std::vector<double>& xs) -> std::optional<double> {
      if (!all_scored) return std::nullopt;
      try {
        return spearman(xs, finals);
      } catch (const std::invalid_argument&) {
        return std::nullopt;  // constant predictor
      }
    };
    eval.spearman_final_score = guarded_spearman(sf);
    eval.spearman_labeled_score = guarded_spearman(sfv);
    // Checkpoint accuracy exists whether or not the window was ready.
    try {
      eval.spearman_val_accuracy = spearman(vacc, finals);
    } catch (const std::invalid_argument&) {
      eval.spearman_val_accuracy = std::nullopt;
    }
    eval.confusion_final_score = confusion(pred_sf, actual);
    eval.confusion_labeled_score = confusion(pred_sfv, actual);
    eval.confusion_val_accuracy = confusion(pred_v, actual);
    evals.push_back(eval);
  }
  return evals;
}

inline RunEvalInput eval_input_from_record(const RunRecord& rec) {
  RunEvalInput in;
  in.diverged = rec.diverged || rec.epochs_trained < rec.spec.final_epoch;
  in.final_val_accuracy = rec.final_val_accuracy;
  in.final_class = rec.final_class;
  in.checkpoints = rec.decisions;
  return in;
}

// Architecture sampler for sweeps: depth uniform on [depth_min, depth_max],
// each hidden width drawn uniformly from dim_choices.
struct ArchitectureSampler {
  std::size_t depth_min = 1;
  std::size_t depth_max = 11;
  std::vector<std::size_t> dim_choices{32, 64, 128, 256, 512};

  void validate() const {
    if (depth_min == 0 || depth_min > depth_max || dim_choices.empty()) {
      throw std::invalid_argument("ArchitectureSampler: bad bounds");
    }
  }

  MlpSpec sample(std::size_t input_dim, int num_classes, std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> depth(depth_min, depth_max);
    std::uniform_int_distribution<std::size_t> choice(0, dim_choices.size() - 1);
    MlpSpec spec;
    spec.input_dim = input_dim;
    spec.num_classes = num_classes;
    const std::size_t layers = depth(rng);
    for (std::size_t l = 0; l < layers; ++l) {
      spec.hidden_dims.push_back(dim_choices[choice(rng)]);
    }
    return spec;
  }
};

struct CampaignOptions {
  std::size_t num_runs = 2;
  std::uint64_t seed = 0;
  double scale_min = 0.1;  // initialization jitter, log-uniform
  double scale_max = 10.0;
  std::size_t threads = 1;
  std::optional<ArchitectureSampler> architecture;  // set for sweeps
};

struct CampaignReport {
  DaiSpec base;  // per-run init scale/seeds (and arch, for sweeps) overridden
  CampaignOptions options;
  std::vector<RunRecord> runs;
  std::vector<CheckpointEval> evals;
  std::size_t num_diverged = 0;
  std::size_t num_success = 0;
  std::size_t num_failure = 0;
  double total_seconds = 0.0;
};

namespace detail {

// Sub-stream indices for per-run RNG derivation; runs depend only on
// (campaign seed, run index), never on execution order.
inline constexpr std::uint64_t kScaleStream = 0;
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kScheduleStream = 2;
inline constexpr std::uint64_t kArchStream = 3;

inline DaiSpec make_run_spec(const DaiSpec& base, const CampaignOptions& opt,
                             std::size_t run_index) {
  const std::uint64_t master = mix_seed(opt.seed, run_index);
  DaiSpec spec = base;
  std::mt19937_64 scale_rng(mix_seed(master, kScaleStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  spec.init_scale = std::exp(std::log(opt.scale_min) +
                             unit(scale_rng) * (std::log(opt.scale_max) - std::log(opt.scale_min)));
  spec.init_seed = mix_seed(master, kInitStream);
  spec.schedule_seed = mix_seed(master, kScheduleStream);
  if (opt.architecture) {
    std::mt19937_64 arch_rng(mix_seed(master, kArchStream));
    spec.arch = opt.architecture->sample(base.train->dim(), base.train->num_classes, arch_rng);
  }
  return spec;
}

inline std::vector<RunRecord> run_all(const std::vector<DaiSpec>& specs, std::size_t threads) {
  std::vector<RunRecord> records(specs.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) records[i] = run_dai(specs[i], RunMode::kFull);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1)) {
      try {
        records[i] = run_dai(specs[i], RunMode::kFull);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min(threads, specs.size());
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

}  // namespace detail

// Trains num_runs initializations of the base configuration in full mode
// (scale jitter log-uniform on [scale_min, scale_max]) and evaluates the
// three predictors at every checkpoint. With options.architecture set, each
// run additionally samples its own architecture.
inline CampaignReport run_campaign(const DaiSpec& base, const CampaignOptions& options) {
  base.validate();
  if (options.num_runs < 2) {
    throw std::invalid_argument("run_campaign: need at least 2 runs");
  }
  if (!(options.scale_min > 0.0 && options.scale_min <= options.scale_max)) {
    throw std::invalid_argument("run_campaign: bad scale bounds");
  }
  if (options.architecture) options.architecture->validate();

  const auto start = std::chrono::steady_clock::now();
  std::vector<DaiSpec> specs;
  specs.reserve(options.num_runs);
  for (std::size_t i = 0; i < options.num_runs; ++i) {
    specs.push_back(detail::make_run_spec(base, options, i));
  }

  CampaignReport report;
  report.base = base;
  report.options = options;
  report.runs = detail::run_all(specs, options.threads);

  std::vector<RunEvalInput> inputs;
  for (const auto& rec : report.runs) {
    inputs.push_back(eval_input_from_record(rec));
    if (inputs.back().diverged) {
      ++report.num_diverged;
    } else if (rec.final_class == Outcome::kSuccess) {
      ++report.num_success;
    } else {
      ++report.num_failure;
    }
  }
  report.evals = evaluate_checkpoints(inputs, base.checkpoints, base.score.t1,
                                      base.success_threshold);
  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline CampaignReport run_architecture_sweep(const DaiSpec& base,
                                             const ArchitectureSampler& sampler,
                                             CampaignOptions options) {
  options.architecture = sampler;
  return run_campaign(base, options);
}

}  // namespace spectrain
