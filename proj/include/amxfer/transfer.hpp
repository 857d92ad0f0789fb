#pragma once

// Parameter-based transfer: fine-tune a source-trained autoencoder on target
// windows with a layer-group schedule, against a scratch baseline.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amxfer/dataset_io.hpp"
#include "amxfer/nn/checkpoint.hpp"
#include "amxfer/scoring.hpp"

namespace amxfer {

using nn::Trainable;

struct Phase {
  Trainable group = Trainable::all;
  int epochs = 0;
};

struct TransferStrategy {
  std::string name;
  std::vector<Phase> phases;

  int total_epochs() const {
    int n = 0;
    for (const auto &p : phases)
      n += p.epochs;
    return n;
  }
};

inline const std::vector<std::string> &strategy_names() {
  static const std::vector<std::string> names = {"retrain_all", "convlstm_then_cnn",
                                                 "cnn_then_convlstm", "scratch_baseline"};
  return names;
}

/// Named schedules; `budget` is the single-phase epoch count and two-phase
/// schedules split it evenly (200 -> 100 + 100).
inline TransferStrategy make_strategy(const std::string &name, int budget = 200) {
  if (budget < 0)
    throw ArgumentError("epoch budget must be >= 0");
  const int half = budget / 2;
  if (name == "retrain_all" || name == "scratch_baseline")
    return {name, {{Trainable::all, budget}}};
  if (name == "convlstm_then_cnn")
    return {name, {{Trainable::convlstm, half}, {Trainable::cnn, budget - half}}};
  if (name == "cnn_then_convlstm")
    return {name, {{Trainable::cnn, half}, {Trainable::convlstm, budget - half}}};
  throw ArgumentError("unknown transfer strategy '" + name + "'");
}

/// Group tags of the reference stack (see nn::tag_groups).
template <class S> std::vector<nn::Group> assign_groups(const nn::Autoencoder<S> &model) {
  std::vector<nn::Group> out;
  for (std::size_t n = 0; n < model.size(); ++n)
    out.push_back(model.layer(n).spec.group);
  return out;
}

struct EarlyStop {
  bool enabled = false;
  /// Stop when mean(train sr) - mean(anomalous sr) has not grown for this many
  /// consecutive epochs.
  int patience = 3;
};

struct TransferConfig {
  nn::TrainConfig train;        // epochs ignored; phases carry their own
  ScoringConfig scoring;
  bool run_scratch = true;
  std::uint64_t scratch_seed = 11;
  EarlyStop early_stop;
};

struct PhaseRecord {
  Phase phase;
  std::vector<double> losses;
  double accuracy_after = 0.0;
  std::string frozen_hash_before, frozen_hash_after;
  bool frozen_unchanged = true;
  bool stopped_early = false;
};

struct BaselineResult {
  std::vector<double> losses;
  double best_loss = 0.0;
  double accuracy_pct = 0.0;
  RegularityReport report;
};

struct TransferRunReport {
  TransferStrategy strategy;
  std::vector<PhaseRecord> phases;
  double pre_accuracy_pct = 0.0;
  double post_accuracy_pct = 0.0;
  std::optional<BaselineResult> scratch;
  double final_loss = 0.0; // last fine-tuning epoch loss
  bool loss_below_scratch = false;
  bool improved = false;
  std::vector<std::string> levels_transferred;
  RegularityReport post_report;
};

/// Hash over the parameters and statistics of the layers outside `trainable`.
template <class S> std::uint64_t frozen_hash(nn::Autoencoder<S> &model, Trainable trainable) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t n = 0; n < model.size(); ++n) {
    auto &l = model.layer(n);
    const bool in_group = trainable == Trainable::all ||
                          (trainable == Trainable::cnn && l.spec.group == nn::Group::cnn) ||
                          (trainable == Trainable::convlstm && l.spec.group == nn::Group::convlstm);
    if (in_group)
      continue;
    for (auto &p : l.params())
      h = nn::fnv1a64(p.value->data.data(), p.value->data.size() * sizeof(S), h);
    for (auto &[name, t] : l.state())
      h = nn::fnv1a64(t->data.data(), t->data.size() * sizeof(S), h);
  }
  return h;
}

/// Feature-space guard: window length and frame shape must match the model.
template <class S>
void check_feature_space(const nn::Autoencoder<S> &model, const std::vector<Concatenation> &cs,
                         const char *what) {
  const auto &a = model.architecture();
  for (const auto &c : cs) {
    const bool ok = c.length() == a.steps && !c.frames.empty() &&
                    c.frames[0].image.height == a.height && c.frames[0].image.width == a.width;
    if (!ok)
      throw ShapeError(std::string(what) + " windows (T=" + std::to_string(c.length()) + ", " +
                       (c.frames.empty() ? std::string("empty")
                                         : std::to_string(c.frames[0].image.height) + "x" +
                                               std::to_string(c.frames[0].image.width)) +
                       ") do not match the model input (T=" + std::to_string(a.steps) + ", " +
                       std::to_string(a.height) + "x" + std::to_string(a.width) +
                       "): feature spaces differ, transductive transfer invalid");
  }
}

namespace detail {

template <class S>
double regularity_gap(nn::Autoencoder<S> &model, const std::vector<Concatenation> &train_set,
                      const std::vector<Concatenation> &test_set, const ScoringConfig &sc) {
  auto rep = score_model(model, train_set, test_set, sc);
  double tr = 0.0, an = 0.0;
  std::size_t na = 0;
  for (double v : rep.train_sr)
    tr += v;
  for (const auto &w : rep.items)
    if (w.label == FrameLabel::anomalous) {
      an += w.sr;
      ++na;
    }
  return tr / rep.train_sr.size() - (na ? an / na : 0.0);
}

template <class S>
std::vector<double> train_phase(nn::Autoencoder<S> &model, const std::vector<Concatenation> &train_set,
                                const std::vector<Concatenation> &test_set, const Phase &phase,
                                const TransferConfig &cfg, const std::string &label, bool &stopped) {
  nn::TrainConfig tc = cfg.train;
  tc.epochs = phase.epochs;
  model.set_trainable(phase.group);
  stopped = false;
  nn::EpochCallback cb;
  double best_gap = -1e300;
  int stale = 0;
  if (cfg.early_stop.enabled)
    cb = [&](int, double) {
      const double gap = regularity_gap(model, train_set, test_set, cfg.scoring);
      if (gap > best_gap) {
        best_gap = gap;
        stale = 0;
      } else if (++stale >= cfg.early_stop.patience) {
        stopped = true;
        return false;
      }
      return true;
    };
  auto losses = nn::train(model, train_set, tc, label, cb);
  model.set_trainable(Trainable::all);
  return losses;
}

} // namespace detail

/// Trains a freshly initialized model on the target data for `epochs`.
template <class S>
BaselineResult train_scratch_baseline(const nn::Architecture &arch,
                                      const std::vector<Concatenation> &train_set,
                                      const std::vector<Concatenation> &test_set, int epochs,
                                      const TransferConfig &cfg) {
  nn::Autoencoder<S> model(arch, cfg.scratch_seed);
  check_feature_space(model, train_set, "target train");
  check_feature_space(model, test_set, "target test");
  bool stopped = false;
  BaselineResult b;
  b.losses = detail::train_phase(model, train_set, test_set, {Trainable::all, epochs}, cfg,
                                 "scratch", stopped);
  b.best_loss = b.losses.empty() ? 0.0 : *std::min_element(b.losses.begin(), b.losses.end());
  b.report = score_model(model, train_set, test_set, cfg.scoring);
  b.accuracy_pct = b.report.evaluation.accuracy_pct;
  return b;
}

/// Runs the schedule on a copy of `source`; the fine-tuned model is returned
/// through `out_model` when given.
template <class S>
TransferRunReport run_transfer(const nn::Autoencoder<S> &source,
                               const std::vector<Concatenation> &target_train,
                               const std::vector<Concatenation> &target_test,
                               const TransferStrategy &strategy, const TransferConfig &cfg,
                               const BaselineResult *baseline = nullptr,
                               nn::Autoencoder<S> *out_model = nullptr) {
  check_feature_space(source, target_train, "target train");
  check_feature_space(source, target_test, "target test");
  nn::require_normal_training_set(target_train);

  TransferRunReport rep;
  rep.strategy = strategy;
  rep.levels_transferred = {"data_representation", "data_structuring", "model_architecture",
                            "model_parameters"};
  nn::Autoencoder<S> model = source;
  rep.pre_accuracy_pct = score_model(model, target_train, target_test, cfg.scoring)
                             .evaluation.accuracy_pct;

  for (std::size_t i = 0; i < strategy.phases.size(); ++i) {
    const Phase &ph = strategy.phases[i];
    PhaseRecord rec;
    rec.phase = ph;
    const auto before = frozen_hash(model, ph.group);
    const std::string label = strategy.name + "/phase" + std::to_string(i + 1) + ":" +
                              std::string(nn::to_string(ph.group));
    rec.losses = detail::train_phase(model, target_train, target_test, ph, cfg, label,
                                     rec.stopped_early);
    const auto after = frozen_hash(model, ph.group);
    rec.frozen_hash_before = nn::hex64(before);
    rec.frozen_hash_after = nn::hex64(after);
    rec.frozen_unchanged = before == after;
    rec.accuracy_after =
        score_model(model, target_train, target_test, cfg.scoring).evaluation.accuracy_pct;
    if (!rec.losses.empty())
      rep.final_loss = rec.losses.back();
    rep.phases.push_back(std::move(rec));
  }
  rep.post_report = score_model(model, target_train, target_test, cfg.scoring);
  rep.post_accuracy_pct = rep.post_report.evaluation.accuracy_pct;

  if (baseline) {
    rep.scratch = *baseline;
  } else if (cfg.run_scratch) {
    rep.scratch = train_scratch_baseline<S>(source.architecture(), target_train, target_test,
                                            strategy.total_epochs(), cfg);
  }
  if (rep.scratch) {
    rep.improved = rep.post_accuracy_pct >= rep.scratch->accuracy_pct;
    rep.loss_below_scratch = !rep.phases.empty() && rep.final_loss < rep.scratch->best_loss;
  }
  if (out_model)
    *out_model = std::move(model);
  return rep;
}

enum class Verdict { positive_transfer, neutral, negative_transfer };

inline std::string_view to_string(Verdict v) {
  switch (v) {
  case Verdict::positive_transfer: return "positive_transfer";
  case Verdict::neutral: return "neutral";
  case Verdict::negative_transfer: return "negative_transfer";
  }
  return "?";
}

inline Verdict verdict_for(double post_accuracy, double scratch_accuracy, double margin = 1.0) {
  if (post_accuracy > scratch_accuracy + margin)
    return Verdict::positive_transfer;
  if (post_accuracy < scratch_accuracy - margin)
    return Verdict::negative_transfer;
  return Verdict::neutral;
}

inline nlohmann::json to_json(const TransferStrategy &s) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto &p : s.phases)
    phases.push_back({{"trainable_group", nn::to_string(p.group)}, {"epochs", p.epochs}});
  return {{"name", s.name}, {"phases", phases}};
}

inline nlohmann::json to_json(const TransferRunReport &r) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto &p : r.phases)
    phases.push_back({{"trainable_group", nn::to_string(p.phase.group)},
                      {"epochs", p.phase.epochs},
                      {"losses", p.losses},
                      {"accuracy_after_pct", p.accuracy_after},
                      {"frozen_hash_before", p.frozen_hash_before},
                      {"frozen_hash_after", p.frozen_hash_after},
                      {"frozen_unchanged", p.frozen_unchanged},
                      {"stopped_early", p.stopped_early}});
  nlohmann::json scratch;
  if (r.scratch)
    scratch = {{"losses", r.scratch->losses},
               {"best_loss", r.scratch->best_loss},
               {"accuracy_pct", r.scratch->accuracy_pct},
               {"threshold", r.scratch->report.threshold}};
  return {{"schema_version", 1},
          {"kind", "amxfer.transfer_run"},
          {"strategy", to_json(r.strategy)},
          {"phases", phases},
          {"pre_accuracy_pct", r.pre_accuracy_pct},
          {"post_accuracy_pct", r.post_accuracy_pct},
          {"final_loss", r.final_loss},
          {"scratch", scratch},
          {"loss_below_scratch", r.loss_below_scratch},
          {"improved", r.improved},
          {"levels_transferred", r.levels_transferred},
          {"threshold", r.post_report.threshold},
          {"threshold_rule", to_string(r.post_report.config.rule)}};
}

/// Compares post-transfer accuracy with the scratch baseline; `margin`
/// accuracy points either side count as neutral.
inline Verdict post_transfer_validate(const TransferRunReport &r, double margin = 1.0) {
  if (!r.scratch)
    throw ArgumentError("post-transfer validation needs a scratch baseline");
  return verdict_for(r.post_accuracy_pct, r.scratch->accuracy_pct, margin);
}

/// Appends {verdict, report} to the knowledge record file (a JSON document
/// with an "entries" array), creating it when missing.
inline void append_knowledge_record(const std::filesystem::path &path, const TransferRunReport &r,
                                    Verdict v, const nlohmann::json &context = nlohmann::json::object()) {
  nlohmann::json doc = {{"schema_version", 1}, {"kind", "amxfer.knowledge_record"},
                        {"entries", nlohmann::json::array()}};
  if (std::filesystem::exists(path))
    doc = read_json_file(path);
  doc["entries"].push_back({{"verdict", to_string(v)}, {"report", to_json(r)}, {"context", context}});
  write_json_file(doc, path);
}

} // namespace amxfer
