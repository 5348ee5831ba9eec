#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectrain/harness.hpp"

// Report files: a JSON campaign (or single-run) summary that embeds the
// full configuration, plus one CSV per run with the epoch series. The CSV
// column set is fixed; score fields are empty until the window is ready.

namespace spectrain {

inline constexpr const char* kRunCsvHeader =
    "epoch,train_acc,val_acc,s_o,s_s,s_t,s_F,s_Fv,gated";

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::json provenance_to_json(const Provenance& p) {
  nlohmann::json j{{"generator", p.generator}};
  if (p.generator == "shell") {
    j["dim"] = p.dim;
    j["r1"] = p.r1;
    j["r2"] = p.r2;
    j["seed"] = p.seed;
  }
  if (p.shuffled_count > 0 || p.shuffle_percent > 0.0) {
    j["shuffle_percent"] = p.shuffle_percent;
    j["shuffle_seed"] = p.shuffle_seed;
    j["shuffled_count"] = p.shuffled_count;
  }
  return j;
}

inline nlohmann::json score_config_to_json(const ScoreConfig& cfg) {
  return {{"beta", cfg.beta},          {"eta", cfg.eta},
          {"t0", cfg.t0},              {"t1", cfg.t1},
          {"t2", cfg.t2},              {"delta", cfg.delta},
          {"gamma_coeff", cfg.gamma_coeff},
          {"alpha_rule", alpha_rule_name(cfg.alpha_rule)}};
}

inline ScoreConfig score_config_from_json(const nlohmann::json& j) {
  ScoreConfig cfg;
  cfg.beta = j.at("beta").get<double>();
  cfg.eta = j.at("eta").get<double>();
  cfg.t0 = j.at("t0").get<std::size_t>();
  cfg.t1 = j.at("t1").get<double>();
  cfg.t2 = j.at("t2").get<double>();
  cfg.delta = j.at("delta").get<double>();
  cfg.gamma_coeff = j.at("gamma_coeff").get<double>();
  cfg.alpha_rule = alpha_rule_from_name(j.at("alpha_rule").get<std::string>());
  return cfg;
}

// Configuration echo shared by single-run and campaign reports. Dataset
// payloads are referenced by provenance only.
inline nlohmann::json spec_to_json(const DaiSpec& spec) {
  return {{"train_data", provenance_to_json(spec.train->provenance)},
          {"val_data", provenance_to_json(spec.val->provenance)},
          {"num_classes", spec.train->num_classes},
          {"input_dim", spec.arch.input_dim},
          {"hidden_dims", spec.arch.hidden_dims},
          {"init_scale", spec.init_scale},
          {"init_seed", spec.init_seed},
          {"optimizer", optimizer_name(spec.optimizer)},
          {"learning_rate", spec.learning_rate},
          {"batch_size", spec.batch_size},
          {"schedule_seed", spec.schedule_seed},
          {"final_epoch", spec.final_epoch},
          {"checkpoints", spec.checkpoints},
          {"success_threshold", spec.success_threshold},
          {"score", score_config_to_json(spec.score)}};
}

inline nlohmann::json checkpoint_decision_to_json(const CheckpointDecision& cd) {
  return {{"epoch", cd.epoch},
          {"scored", cd.scored},
          {"decision", decision_name(cd.decision)},
          {"s_F", cd.final_score},
          {"s_Fv", cd.labeled_score},
          {"val_acc", cd.val_accuracy},
          {"gated", cd.gated}};
}

inline nlohmann::json run_summary_to_json(const RunRecord& rec, std::size_t index) {
  nlohmann::json j{{"index", index},
                   {"hidden_dims", rec.spec.arch.hidden_dims},
                   {"init_scale", rec.spec.init_scale},
                   {"init_seed", rec.spec.init_seed},
                   {"schedule_seed", rec.spec.schedule_seed},
                   {"diverged", rec.diverged},
                   {"epochs_trained", rec.epochs_trained}};
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& cd : rec.decisions) cps.push_back(checkpoint_decision_to_json(cd));
  j["checkpoints"] = cps;
  if (rec.diverged) {
    j["final_val_acc"] = nullptr;
    j["final_class"] = nullptr;
  } else {
    j["final_val_acc"] = rec.final_val_accuracy;
    j["final_class"] = outcome_name(rec.final_class);
  }
  return j;
}

inline nlohmann::json confusion_to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}};
}

inline nlohmann::json evals_to_json(const std::vector<CheckpointEval>& evals) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& eval : evals) {
    nlohmann::json spearman_j;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) {
        spearman_j[key] = *v;
      } else {
        spearman_j[key] = nullptr;
      }
    };
    put("s_F", eval.spearman_final_score);
    put("s_Fv", eval.spearman_labeled_score);
    put("val_acc", eval.spearman_val_accuracy);
    out.push_back({{"epoch", eval.epoch},
                   {"spearman", spearman_j},
                   {"confusion",
                    {{"s_F", confusion_to_json(eval.confusion_final_score)},
                     {"s_Fv", confusion_to_json(eval.confusion_labeled_score)},
                     {"val_acc", confusion_to_json(eval.confusion_val_accuracy)}}}});
  }
  return out;
}

inline nlohmann::json campaign_to_json(const CampaignReport& report) {
  nlohmann::json config = spec_to_json(report.base);
  config["runs"] = report.options.num_runs;
  config["campaign_seed"] = report.options.seed;
  config["scale_law"] = "log-uniform";
  config["scale_min"] = report.options.scale_min;
  config["scale_max"] = report.options.scale_max;
  if (report.options.architecture) {
    const auto& s = *report.options.architecture;
    config["architecture_sampler"] = {{"depth_min", s.depth_min},
                                      {"depth_max", s.depth_max},
                                      {"dim_choices", s.dim_choices}};
  }

  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    runs.push_back(run_summary_to_json(report.runs[i], i));
  }

  return {{"format", "spectrain-campaign-v1"},
          {"config", config},
          {"runs", runs},
          {"evaluation",
           {{"num_runs", report.runs.size()},
            {"num_diverged", report.num_diverged},
            {"num_success", report.num_success},
            {"num_failure", report.num_failure},
            {"checkpoints", evals_to_json(report.evals)}}},
          {"timing", {{"total_seconds", report.total_seconds}}}};
}

// Per-run epoch series. Line 1 embeds the configuration as a comment, line 2
// is the fixed header; score columns stay empty before the window is ready.
inline void write_run_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_run_csv: cannot open " + path);
  out << "# config " << spec_to_json(rec.spec).dump() << '\n';
  out << kRunCsvHeader << '\n';
  for (std::size_t e = 0; e < rec.epochs_trained; ++e) {
    out << (e + 1) << ',' << detail::fmt_double(rec.train_accuracy[e]) << ','
        << detail::fmt_double(rec.val_accuracy[e]) << ',';
    if (e < rec.scores.size() && rec.scores[e]) {
      const ScoreSample& sample = *rec.scores[e];
      out << detail::fmt_double(sample.compression) << ','
          << detail::fmt_double(sample.shift) << ','
          << detail::fmt_double(sample.combined) << ','
          << detail::fmt_double(sample.final_score) << ','
          << (sample.labeled_score ? detail::fmt_double(*sample.labeled_score) : "") << ','
          << (sample.gated ? '1' : '0');
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_run_csv: write failed for " + path);
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_json: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_json: write failed for " + path);
}

// Campaign summary plus one epoch-series CSV per run under <dir>/runs/.
inline void emit_report(const CampaignReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "runs", ec);
  if (ec) throw std::runtime_error("emit_report: cannot create " + dir + ": " + ec.message());
  write_json(campaign_to_json(report), (fs::path(dir) / "campaign.json").string());
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03zu.csv", i);
    write_run_csv(report.runs[i], (fs::path(dir) / "runs" / name).string());
  }
}

// Re-derives the per-checkpoint evaluation from a stored campaign summary.
inline nlohmann::json rederive_evaluation(const nlohmann::json& campaign) {
  const auto& config = campaign.at("config");
  const std::vector<std::size_t> checkpoints =
      config.at("checkpoints").get<std::vector<std::size_t>>();
  const double t1 = config.at("score").at("t1").get<double>();
  const double theta = config.at("success_threshold").get<double>();

  std::vector<RunEvalInput> inputs;
  for (const auto& run : campaign.at("runs")) {
    RunEvalInput in;
    in.diverged = run.at("diverged").get<bool>();
    if (!in.diverged) {
      in.final_val_accuracy = run.at("final_val_acc").get<double>();
      in.final_class = run.at("final_class").get<std::string>() == "success"
                           ? Outcome::kSuccess
                           : Outcome::kFailure;
    }
    for (const auto& cd_json : run.at("checkpoints")) {
      CheckpointDecision cd;
      cd.epoch = cd_json.at("epoch").get<std::size_t>();
      cd.scored = cd_json.at("scored").get<bool>();
      cd.final_score = cd_json.at("s_F").get<double>();
      cd.labeled_score = cd_json.at("s_Fv").get<double>();
      cd.val_accuracy = cd_json.at("val_acc").get<double>();
      cd.gated = cd_json.at("gated").get<bool>();
      cd.decision = cd_json.at("decision").get<std::string>() == "continue"
                        ? Decision::kContinue
                        : Decision::kDiscard;
      in.checkpoints.push_back(cd);
    }
    inputs.push_back(std::move(in));
  }

  const auto evals = evaluate_checkpoints(inputs, checkpoints, t1, theta);
  std::size_t diverged = 0, success = 0, failure = 0;
  for (const auto& in : inputs) {
    if (in.diverged) {
      ++diverged;
    } else if (in.final_class == Outcome::kSuccess) {
      ++success;
    } else {
      ++failure;
    }
  }
  return {{"num_runs", inputs.size()},
          {"num_diverged", diverged},
          {"num_success", success},
          {"num_failure", failure},
          {"checkpoints", evals_to_json(evals)}};
}

// Single-run report for the train command.
inline nlohmann::json run_to_json(const RunRecord& rec, RunMode mode) {
  nlohmann::json j = run_summary_to_json(rec, 0);
  j.erase("index");
  j["mode"] = mode == RunMode::kFull ? "full" : "give_up";
  j["config"] = spec_to_json(rec.spec);
  j["format"] = "spectrain-run-v1";
  double seconds = 0.0;
  for (double s : rec.epoch_seconds) seconds += s;
  j["timing"] = {{"total_seconds", seconds}};
  return j;
}

}  // namespace spectrain
