#include <gtest/gtest.h>

#include "amxfer/transfer.hpp"
#include "test_util.hpp"

using namespace amxfer;
using namespace amxfer::nn;

namespace {

const Architecture kArch{16, 16, 4, 16};

struct Sets {
  std::vector<Concatenation> train, test;
};

Sets target_sets() {
  Sets s;
  s.train = testutil::random_windows(10, 4, 16, 16, 31, 0.0f, 0.3f);
  s.test = testutil::random_windows(4, 4, 16, 16, 32, 0.0f, 1.0f, FrameLabel::anomalous);
  return s;
}

Autoencoder<float> source_model() {
  Autoencoder<float> m(kArch, 21);
  TrainConfig cfg;
  cfg.epochs = 1;
  train(m, testutil::random_windows(8, 4, 16, 16, 30, 0.0f, 0.5f), cfg, "source");
  return m;
}

TransferConfig quick() {
  TransferConfig c;
  c.run_scratch = false;
  return c;
}

} // namespace

TEST(Strategy, DefaultBudgets) {
  auto a = make_strategy("retrain_all");
  ASSERT_EQ(a.phases.size(), 1u);
  EXPECT_EQ(a.phases[0].group, Trainable::all);
  EXPECT_EQ(a.phases[0].epochs, 200);
  auto b = make_strategy("convlstm_then_cnn");
  ASSERT_EQ(b.phases.size(), 2u);
  EXPECT_EQ(b.phases[0].group, Trainable::convlstm);
  EXPECT_EQ(b.phases[0].epochs, 100);
  EXPECT_EQ(b.phases[1].group, Trainable::cnn);
  EXPECT_EQ(b.phases[1].epochs, 100);
  auto c = make_strategy("cnn_then_convlstm", 40);
  EXPECT_EQ(c.phases[0].group, Trainable::cnn);
  EXPECT_EQ(c.phases[1].group, Trainable::convlstm);
  EXPECT_EQ(c.total_epochs(), 40);
  EXPECT_EQ(make_strategy("convlstm_then_cnn", 21).total_epochs(), 21);
  EXPECT_THROW(make_strategy("freeze_everything"), ArgumentError);
}

TEST(Groups, ReferenceStack) {
  Autoencoder<float> m(Architecture{}, 1);
  auto g = assign_groups(m);
  int lstm = 0, cnn = 0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (m.layer(n).spec.kind == LayerKind::batch_norm)
      continue;
    (g[n] == Group::convlstm ? lstm : cnn)++;
  }
  EXPECT_EQ(lstm, 3);
  EXPECT_EQ(cnn, 5);
  // Batch norm directly after the first ConvLSTM row.
  ASSERT_EQ(m.layer(5).spec.kind, LayerKind::batch_norm);
  EXPECT_EQ(g[5], Group::convlstm);
}

TEST(Transfer, EmptyScheduleLeavesModelUnchanged) {
  auto src = source_model();
  auto sets = target_sets();
  Autoencoder<float> out(kArch, 0);
  auto rep = run_transfer(src, sets.train, sets.test, {"none", {}}, quick(), nullptr, &out);
  EXPECT_EQ(parameter_hash(out), parameter_hash(src));
  EXPECT_EQ(rep.pre_accuracy_pct, rep.post_accuracy_pct);
  EXPECT_FALSE(rep.scratch.has_value());
}

TEST(Transfer, FrozenGroupBitIdenticalPerPhase) {
  auto src = source_model();
  auto sets = target_sets();
  for (const char *name : {"convlstm_then_cnn", "cnn_then_convlstm"}) {
    auto rep = run_transfer(src, sets.train, sets.test, make_strategy(name, 4), quick());
    ASSERT_EQ(rep.phases.size(), 2u);
    for (const auto &ph : rep.phases) {
      EXPECT_TRUE(ph.frozen_unchanged) << name;
      EXPECT_EQ(ph.frozen_hash_before, ph.frozen_hash_after);
      EXPECT_EQ(ph.losses.size(), 2u);
    }
  }
}

TEST(Transfer, PhaseOrderIsObservable) {
  auto src = source_model();
  auto sets = target_sets();
  auto a = run_transfer(src, sets.train, sets.test, make_strategy("convlstm_then_cnn", 4), quick());
  auto b = run_transfer(src, sets.train, sets.test, make_strategy("cnn_then_convlstm", 4), quick());
  EXPECT_NE(a.phases[0].losses, b.phases[0].losses);
}

TEST(Transfer, PhaseComposition) {
  auto src = source_model();
  auto sets = target_sets();
  const auto cfg = quick();
  Autoencoder<float> full(kArch, 0), mid(kArch, 0), resumed(kArch, 0);
  run_transfer(src, sets.train, sets.test, {"both", {{Trainable::cnn, 2}, {Trainable::convlstm, 2}}},
               cfg, nullptr, &full);
  run_transfer(src, sets.train, sets.test, {"first", {{Trainable::cnn, 2}}}, cfg, nullptr, &mid);
  auto dir = testutil::temp_dir("composition");
  save_checkpoint(mid, cfg.train, dir / "mid.ckpt");
  auto loaded = load_checkpoint(dir / "mid.ckpt");
  run_transfer(loaded.model, sets.train, sets.test, {"second", {{Trainable::convlstm, 2}}}, cfg,
               nullptr, &resumed);
  EXPECT_EQ(parameter_hash(full), parameter_hash(resumed));
}

TEST(Transfer, FeatureSpaceGuardBeforeMutation) {
  auto src = source_model();
  const auto before = parameter_hash(src);
  auto sets = target_sets();
  auto wrong = testutil::random_windows(3, 4, 32, 32, 1);
  try {
    run_transfer(src, wrong, sets.test, make_strategy("retrain_all", 2), quick());
    FAIL();
  } catch (const ShapeError &e) {
    EXPECT_NE(std::string(e.what()).find("feature spaces differ"), std::string::npos);
  }
  auto short_windows = testutil::random_windows(3, 3, 16, 16, 1);
  EXPECT_THROW(run_transfer(src, sets.train, short_windows, make_strategy("retrain_all", 2), quick()),
               ShapeError);
  EXPECT_EQ(parameter_hash(src), before);
}

TEST(Transfer, ScratchBaselineAndFlags) {
  auto src = source_model();
  auto sets = target_sets();
  TransferConfig cfg;
  auto rep = run_transfer(src, sets.train, sets.test, make_strategy("retrain_all", 2), cfg);
  ASSERT_TRUE(rep.scratch.has_value());
  EXPECT_EQ(rep.scratch->losses.size(), 2u);
  EXPECT_EQ(rep.improved, rep.post_accuracy_pct >= rep.scratch->accuracy_pct);
  EXPECT_EQ(rep.loss_below_scratch, rep.final_loss < rep.scratch->best_loss);
  auto j = to_json(rep);
  EXPECT_EQ(j["strategy"]["name"], "retrain_all");
  EXPECT_EQ(j["levels_transferred"].size(), 4u);
  EXPECT_EQ(j["threshold_rule"], "kth_min_regularity");
}

TEST(Transfer, Deterministic) {
  auto src = source_model();
  auto sets = target_sets();
  auto a = run_transfer(src, sets.train, sets.test, make_strategy("cnn_then_convlstm", 2), {});
  auto b = run_transfer(src, sets.train, sets.test, make_strategy("cnn_then_convlstm", 2), {});
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Transfer, EarlyStopTruncatesPhase) {
  auto src = source_model();
  auto sets = target_sets();
  auto cfg = quick();
  cfg.early_stop = {true, 1};
  auto rep = run_transfer(src, sets.train, sets.test, make_strategy("retrain_all", 6), cfg);
  const auto &ph = rep.phases[0];
  EXPECT_EQ(ph.stopped_early, ph.losses.size() < 6u);
  EXPECT_GE(ph.losses.size(), 2u);
}

TEST(Validate, Verdicts) {
  EXPECT_EQ(verdict_for(94, 84), Verdict::positive_transfer);
  EXPECT_EQ(verdict_for(84, 84), Verdict::neutral);
  EXPECT_EQ(verdict_for(84.5, 84), Verdict::neutral);
  EXPECT_EQ(verdict_for(70, 84), Verdict::negative_transfer);
  TransferRunReport r;
  EXPECT_THROW(post_transfer_validate(r), ArgumentError);
  r.scratch = BaselineResult{};
  r.scratch->accuracy_pct = 84;
  r.post_accuracy_pct = 94;
  EXPECT_EQ(post_transfer_validate(r), Verdict::positive_transfer);
  EXPECT_EQ(post_transfer_validate(r, 20), Verdict::neutral);
}

TEST(Validate, KnowledgeRecordAppends) {
  auto dir = testutil::temp_dir("record");
  TransferRunReport r;
  r.strategy = make_strategy("retrain_all", 2);
  r.scratch = BaselineResult{};
  append_knowledge_record(dir / "record.json", r, Verdict::neutral, {{"source", "lpbf"}});
  append_knowledge_record(dir / "record.json", r, Verdict::positive_transfer);
  auto doc = read_json_file(dir / "record.json");
  ASSERT_EQ(doc["entries"].size(), 2u);
  EXPECT_EQ(doc["entries"][0]["verdict"], "neutral");
  EXPECT_EQ(doc["entries"][0]["context"]["source"], "lpbf");
  EXPECT_EQ(doc["entries"][1]["verdict"], "positive_transfer");
}
