#pragma once

// Experiment configuration: one JSON document with a default for every field,
// file values merged over the defaults, then dotted-path overrides.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "amxfer/dataset_io.hpp"
#include "amxfer/experiment.hpp"

namespace amxfer {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char *kVersion = "0.1.0";

struct ExperimentConfig {
  std::uint64_t seed = 1;

  struct Paths {
    std::string source_context = "data/contexts/lpbf_nist.json";
    std::string target_context = "data/contexts/ded_msu.json";
    std::string output_dir = "runs";
  } paths;

  struct Structure {
    int window = 4;
    int stride = 1;
    double inactive_threshold = 0.02;
  } structure;

  nn::Architecture model{32, 32, 4, 8};
  nn::TrainConfig training;

  struct Transfer {
    std::vector<std::string> strategies = {"retrain_all", "convlstm_then_cnn",
                                           "cnn_then_convlstm"};
    int budget = 20;
    bool scratch_baseline = true;
    EarlyStop early_stop;
    double verdict_margin = 1.0;
  } transfer;

  ScoringConfig scoring;

  struct Synth {
    int source_frames = 1100;
    int target_frames = 230;
  } synth;

  std::vector<std::uint64_t> replica_seeds = {1, 2, 3};

  ExperimentConfig() {
    training.epochs = 15;
    training.seed = ReplicaSeeds::from(seed).train;
  }

  ReplicaRecipe recipe() const {
    ReplicaRecipe r;
    r.source_frames = synth.source_frames;
    r.target_frames = synth.target_frames;
    r.inactive_threshold = structure.inactive_threshold;
    r.window = structure.window;
    r.stride = structure.stride;
    r.architecture = model;
    r.train = training;
    r.transfer_budget = transfer.budget;
    r.scoring = scoring;
    r.strategies = transfer.strategies;
    r.seeds = replica_seeds;
    return r;
  }

  TransferConfig transfer_config() const {
    TransferConfig c;
    c.train = training;
    c.scoring = scoring;
    c.run_scratch = transfer.scratch_baseline;
    c.scratch_seed = nn::mix_seed(seed, 404);
    c.early_stop = transfer.early_stop;
    return c;
  }
};

inline nlohmann::json to_json(const ExperimentConfig &c) {
  return {{"schema_version", kConfigSchemaVersion},
          {"seed", c.seed},
          {"paths",
           {{"source_context", c.paths.source_context},
            {"target_context", c.paths.target_context},
            {"output_dir", c.paths.output_dir}}},
          {"structure",
           {{"window", c.structure.window},
            {"stride", c.structure.stride},
            {"inactive_threshold", c.structure.inactive_threshold}}},
          {"model", nn::to_json(c.model)},
          {"training", [&] {
             auto t = nn::to_json(c.training);
             t.erase("seed"); // derived from the experiment seed
             return t;
           }()},
          {"transfer",
           {{"strategies", c.transfer.strategies},
            {"budget", c.transfer.budget},
            {"scratch_baseline", c.transfer.scratch_baseline},
            {"early_stop",
             {{"enabled", c.transfer.early_stop.enabled},
              {"patience", c.transfer.early_stop.patience}}},
            {"verdict_margin", c.transfer.verdict_margin}}},
          {"scoring", to_json(c.scoring)},
          {"synth",
           {{"source_frames", c.synth.source_frames}, {"target_frames", c.synth.target_frames}}},
          {"replica", {{"seeds", c.replica_seeds}}}};
}

namespace detail {

/// Rejects keys the defaults do not know, so typos fail loudly.
inline void check_known_keys(const nlohmann::json &defaults, const nlohmann::json &doc,
                             const std::string &where) {
  if (!doc.is_object())
    return;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!defaults.contains(it.key()))
      throw ValidationError("config: unknown key '" + path + "'");
    if (defaults[it.key()].is_object())
      check_known_keys(defaults[it.key()], it.value(), path);
  }
}

template <class T> T get(const nlohmann::json &j, const char *key, const std::string &where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError("config: " + where + "." + key + ": " + e.what());
  }
}

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json &doc) {
  ExperimentConfig c;
  const nlohmann::json defaults = to_json(c);
  detail::check_known_keys(defaults, doc, "");
  nlohmann::json j = defaults;
  j.merge_patch(doc);
  if (j.value("schema_version", 0) != kConfigSchemaVersion)
    throw ValidationError("config: unsupported schema_version");
  using detail::get;
  c.seed = get<std::uint64_t>(j, "seed", "");
  const auto &p = j["paths"];
  c.paths.source_context = get<std::string>(p, "source_context", "paths");
  c.paths.target_context = get<std::string>(p, "target_context", "paths");
  c.paths.output_dir = get<std::string>(p, "output_dir", "paths");
  const auto &s = j["structure"];
  c.structure.window = get<int>(s, "window", "structure");
  c.structure.stride = get<int>(s, "stride", "structure");
  c.structure.inactive_threshold = get<double>(s, "inactive_threshold", "structure");
  try {
    c.model = nn::architecture_from_json(j["model"]);
    c.training = nn::train_config_from_json(j["training"]);
    c.training.seed = ReplicaSeeds::from(c.seed).train;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("config: model/training: ") + e.what());
  }
  const auto &t = j["transfer"];
  c.transfer.strategies = get<std::vector<std::string>>(t, "strategies", "transfer");
  c.transfer.budget = get<int>(t, "budget", "transfer");
  c.transfer.scratch_baseline = get<bool>(t, "scratch_baseline", "transfer");
  c.transfer.early_stop.enabled = get<bool>(t["early_stop"], "enabled", "transfer.early_stop");
  c.transfer.early_stop.patience = get<int>(t["early_stop"], "patience", "transfer.early_stop");
  c.transfer.verdict_margin = get<double>(t, "verdict_margin", "transfer");
  const auto &sc = j["scoring"];
  c.scoring.residual = parse_residual(get<std::string>(sc, "residual", "scoring"));
  c.scoring.normalization = parse_normalization(get<std::string>(sc, "normalization", "scoring"));
  c.scoring.mode = parse_scoring_mode(get<std::string>(sc, "mode", "scoring"));
  c.scoring.rule = parse_threshold_rule(get<std::string>(sc, "threshold_rule", "scoring"));
  c.scoring.k = get<int>(sc, "k", "scoring");
  c.scoring.percentile = get<double>(sc, "percentile", "scoring");
  c.synth.source_frames = get<int>(j["synth"], "source_frames", "synth");
  c.synth.target_frames = get<int>(j["synth"], "target_frames", "synth");
  c.replica_seeds = get<std::vector<std::uint64_t>>(j["replica"], "seeds", "replica");

  if (c.structure.window < 1 || c.structure.stride < 1)
    throw ValidationError("config: structure.window and structure.stride must be >= 1");
  if (c.model.steps != c.structure.window)
    throw ValidationError("config: model.steps must equal structure.window");
  if (c.transfer.budget < 0 || c.training.epochs < 0)
    throw ValidationError("config: epoch counts must be >= 0");
  for (const auto &name : c.transfer.strategies)
    make_strategy(name, c.transfer.budget);
  return c;
}

/// Applies "a.b.c=value" overrides; values parse as JSON, falling back to a
/// plain string.
inline nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string> &sets) {
  for (const auto &s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("override '" + s + "' is not key=value");
    const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded())
      value = raw;
    nlohmann::json::json_pointer ptr("/" + [&] {
      std::string k = key;
      std::replace(k.begin(), k.end(), '.', '/');
      return k;
    }());
    doc[ptr] = value;
  }
  return doc;
}

inline ExperimentConfig load_config(const std::filesystem::path &path,
                                    const std::vector<std::string> &overrides = {}) {
  nlohmann::json doc = path.empty() ? nlohmann::json::object() : read_json_file(path);
  return config_from_json(apply_overrides(std::move(doc), overrides));
}

inline std::string config_hash(const ExperimentConfig &c) {
  return nn::hex64(nn::fnv1a64(to_json(c).dump()));
}

} // namespace amxfer
