#pragma once

// Desk-scale cross-process replica: synthetic LPBF-like source stream,
// DED-like target stream, source training, three fine-tuning schedules and a
// scratch baseline on the target.

#include <string>
#include <vector>

#include <json.hpp>

#include "amxfer/synth.hpp"
#include "amxfer/transfer.hpp"

namespace amxfer {

struct StructuredSets {
  std::vector<Concatenation> train; // normal windows
  std::vector<Concatenation> test;  // anomalous windows
  std::size_t frames_in = 0, frames_kept = 0;
};

/// Laser-off filtering, windowing and the normal/anomalous split.
inline StructuredSets structure_stream(const BuildDataset &ds, double inactive_threshold,
                                       int window, int stride, const std::string &provenance) {
  StructuredSets s;
  s.frames_in = ds.frames.size();
  const auto kept = filter_inactive(ds.frames, inactive_threshold);
  s.frames_kept = kept.size();
  auto pools = split_normal_anomalous(make_concatenations(kept, window, stride, provenance));
  s.train = std::move(pools.train);
  s.test = std::move(pools.test);
  return s;
}

struct ReplicaRecipe {
  ProcessProfile source_profile = default_profiles().first;
  ProcessProfile target_profile = default_profiles().second;
  int source_frames = 1100;
  int target_frames = 230;
  double inactive_threshold = 0.02;
  int window = 4;
  int stride = 1;
  nn::Architecture architecture{32, 32, 4, 8};
  nn::TrainConfig train; // epochs = source epochs
  int transfer_budget = 20;
  ScoringConfig scoring;
  std::vector<std::string> strategies = {"retrain_all", "convlstm_then_cnn", "cnn_then_convlstm"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  ReplicaRecipe() { train.epochs = 15; }
};

/// Stream and initialization seeds derived from one experiment seed.
struct ReplicaSeeds {
  std::uint64_t source_stream, target_stream, source_init, scratch_init, train;

  static ReplicaSeeds from(std::uint64_t seed) {
    return {nn::mix_seed(seed, 101), nn::mix_seed(seed, 202), nn::mix_seed(seed, 303),
            nn::mix_seed(seed, 404), nn::mix_seed(seed, 505)};
  }
};

struct ReplicaRun {
  std::uint64_t seed = 0;
  std::size_t source_train = 0, source_test = 0, target_train = 0, target_test = 0;
  std::vector<double> source_losses;
  std::string source_checkpoint_hash;
  double source_accuracy_pct = 0.0; // source model on its own anomalous windows
  BaselineResult scratch;
  std::vector<TransferRunReport> runs;
  std::vector<std::string> transferred_checkpoint_hashes;

  bool loss_property() const { // (a)
    for (const auto &r : runs)
      if (!r.loss_below_scratch)
        return false;
    return !runs.empty();
  }
  bool accuracy_property() const { // (b)
    for (const auto &r : runs)
      if (r.post_accuracy_pct < scratch.accuracy_pct)
        return false;
    return !runs.empty();
  }
  bool improved_property() const { // (c)
    for (const auto &r : runs)
      if (!r.improved)
        return false;
    return !runs.empty();
  }
  bool all_properties() const { return loss_property() && accuracy_property() && improved_property(); }
};

inline ReplicaRun run_replica(const ReplicaRecipe &recipe, std::uint64_t seed,
                              std::ostream *log = nullptr) {
  const auto seeds = ReplicaSeeds::from(seed);
  ReplicaRun out;
  out.seed = seed;
  auto src = structure_stream(
      generate_stream(recipe.source_profile, recipe.source_frames, seeds.source_stream),
      recipe.inactive_threshold, recipe.window, recipe.stride, recipe.source_profile.name);
  auto tgt = structure_stream(
      generate_stream(recipe.target_profile, recipe.target_frames, seeds.target_stream),
      recipe.inactive_threshold, recipe.window, recipe.stride, recipe.target_profile.name);
  out.source_train = src.train.size();
  out.source_test = src.test.size();
  out.target_train = tgt.train.size();
  out.target_test = tgt.test.size();
  if (log)
    *log << "seed " << seed << ": source " << src.train.size() << " normal / " << src.test.size()
         << " anomalous windows, target " << tgt.train.size() << " / " << tgt.test.size() << "\n";

  nn::TrainConfig tc = recipe.train;
  tc.seed = seeds.train;
  nn::Autoencoder<float> source(recipe.architecture, seeds.source_init);
  out.source_losses = nn::train(source, src.train, tc, "source");
  out.source_checkpoint_hash = nn::hex64(nn::fnv1a64(nn::checkpoint_bytes(source, tc)));
  out.source_accuracy_pct = score_model(source, src.train, src.test, recipe.scoring).evaluation.accuracy_pct;
  if (log)
    *log << "  source loss " << out.source_losses.front() << " -> " << out.source_losses.back()
         << ", source accuracy " << out.source_accuracy_pct << "\n";

  TransferConfig cfg;
  cfg.train = tc;
  cfg.scoring = recipe.scoring;
  cfg.scratch_seed = seeds.scratch_init;
  out.scratch = train_scratch_baseline<float>(recipe.architecture, tgt.train, tgt.test,
                                              recipe.transfer_budget, cfg);
  if (log)
    *log << "  scratch best loss " << out.scratch.best_loss << ", accuracy "
         << out.scratch.accuracy_pct << "\n";
  for (const auto &name : recipe.strategies) {
    nn::Autoencoder<float> tuned = source;
    auto rep = run_transfer(source, tgt.train, tgt.test, make_strategy(name, recipe.transfer_budget),
                            cfg, &out.scratch, &tuned);
    out.transferred_checkpoint_hashes.push_back(
        nn::hex64(nn::fnv1a64(nn::checkpoint_bytes(tuned, tc))));
    if (log)
      *log << "  " << name << ": final loss " << rep.final_loss << ", accuracy "
           << rep.pre_accuracy_pct << " -> " << rep.post_accuracy_pct
           << (rep.improved ? " improved" : " not improved") << "\n";
    out.runs.push_back(std::move(rep));
  }
  return out;
}

inline nlohmann::json to_json(const ReplicaRun &r) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    auto j = to_json(r.runs[i]);
    j["checkpoint_hash"] = r.transferred_checkpoint_hashes[i];
    runs.push_back(std::move(j));
  }
  return {{"seed", r.seed},
          {"windows",
           {{"source_train", r.source_train},
            {"source_test", r.source_test},
            {"target_train", r.target_train},
            {"target_test", r.target_test}}},
          {"source_losses", r.source_losses},
          {"source_checkpoint_hash", r.source_checkpoint_hash},
          {"source_accuracy_pct", r.source_accuracy_pct},
          {"scratch",
           {{"losses", r.scratch.losses},
            {"best_loss", r.scratch.best_loss},
            {"accuracy_pct", r.scratch.accuracy_pct}}},
          {"runs", runs},
          {"properties",
           {{"loss_below_scratch", r.loss_property()},
            {"accuracy_at_least_scratch", r.accuracy_property()},
            {"all_improved", r.improved_property()}}}};
}

} // namespace amxfer
