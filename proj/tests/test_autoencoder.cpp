#include <gtest/gtest.h>

#include "amxfer/nn/checkpoint.hpp"
#include "amxfer/nn/gradcheck.hpp"
#include "amxfer/nn/train.hpp"
#include "test_util.hpp"

using namespace amxfer;
using namespace amxfer::nn;

namespace {

struct Row {
  LayerKind kind;
  int in, out, kernel, stride;
  Activation act;
};

// Reference architecture table, row for row.
const std::vector<Row> kTable = {
    {LayerKind::conv2d, 1, 128, 5, 2, Activation::relu},
    {LayerKind::batch_norm, 128, 128, 0, 1, Activation::none},
    {LayerKind::conv2d, 128, 64, 5, 2, Activation::relu},
    {LayerKind::batch_norm, 64, 64, 0, 1, Activation::none},
    {LayerKind::conv_lstm, 64, 64, 3, 1, Activation::relu},
    {LayerKind::batch_norm, 64, 64, 0, 1, Activation::none},
    {LayerKind::conv_lstm, 64, 32, 3, 1, Activation::relu},
    {LayerKind::conv_lstm, 32, 64, 3, 1, Activation::relu},
    {LayerKind::batch_norm, 64, 64, 0, 1, Activation::none},
    {LayerKind::conv2d_transpose, 64, 64, 5, 2, Activation::relu},
    {LayerKind::batch_norm, 64, 64, 0, 1, Activation::none},
    {LayerKind::conv2d_transpose, 64, 128, 5, 2, Activation::relu},
    {LayerKind::batch_norm, 128, 128, 0, 1, Activation::none},
    {LayerKind::conv2d_transpose, 128, 1, 2, 1, Activation::sigmoid},
};

// Closed-form parameter count; ConvLSTM peepholes cover the h x w state.
std::size_t expected_params(const Row &r, int h, int w) {
  const std::size_t k2 = static_cast<std::size_t>(r.kernel) * r.kernel;
  switch (r.kind) {
  case LayerKind::conv2d:
  case LayerKind::conv2d_transpose: return k2 * r.in * r.out + r.out;
  case LayerKind::batch_norm: return 2 * static_cast<std::size_t>(r.out);
  case LayerKind::conv_lstm:
    return 4 * k2 * r.out * (r.in + r.out) + 4 * static_cast<std::size_t>(r.out) +
           3 * static_cast<std::size_t>(r.out) * h * w;
  }
  return 0;
}

std::vector<Concatenation> constant_windows(std::size_t n, int T, int h, int w, float v) {
  std::vector<Concatenation> cs(n);
  for (auto &c : cs)
    for (int t = 0; t < T; ++t)
      c.frames.push_back(testutil::frame(h, w, v, FrameLabel::normal, t));
  return cs;
}

Architecture small(int divisor = 16, int hw = 16) { return {hw, hw, 4, divisor}; }

} // namespace

TEST(Architecture, MatchesReferenceTableRowForRow) {
  Autoencoder<float> m(Architecture{}, 1);
  ASSERT_EQ(m.size(), kTable.size());
  for (std::size_t n = 0; n < kTable.size(); ++n) {
    const auto s = m.layer(n).spec;
    EXPECT_EQ(s.kind, kTable[n].kind) << n;
    EXPECT_EQ(s.in_channels, kTable[n].in) << n;
    EXPECT_EQ(s.out_channels, kTable[n].out) << n;
    EXPECT_EQ(s.kernel, kTable[n].kernel) << n;
    EXPECT_EQ(s.stride, kTable[n].stride) << n;
    EXPECT_EQ(s.activation, kTable[n].act) << n;
  }
}

TEST(Architecture, ParameterCountsMatchClosedForm) {
  Autoencoder<float> m(Architecture{}, 1);
  EXPECT_EQ(m.layer(0).parameter_count(), 3328u);
  int h = 32, w = 32;
  std::size_t total = 0;
  for (std::size_t n = 0; n < kTable.size(); ++n) {
    if (kTable[n].kind == LayerKind::conv2d) {
      h /= 2;
      w /= 2;
    }
    const std::size_t want = expected_params(kTable[n], h, w);
    EXPECT_EQ(m.layer(n).parameter_count(), want) << n;
    total += want;
    if (kTable[n].kind == LayerKind::conv2d_transpose && kTable[n].stride == 2) {
      h *= 2;
      w *= 2;
    }
  }
  EXPECT_EQ(m.parameter_count(), total);
}

TEST(Architecture, GroupTagging) {
  auto specs = Autoencoder<float>(Architecture{}, 1).specs();
  int lstm = 0, cnn_learnable = 0;
  for (std::size_t n = 0; n < specs.size(); ++n) {
    if (specs[n].kind == LayerKind::conv_lstm) {
      EXPECT_EQ(specs[n].group, Group::convlstm);
      ++lstm;
    } else if (specs[n].kind != LayerKind::batch_norm) {
      EXPECT_EQ(specs[n].group, Group::cnn);
      ++cnn_learnable;
    } else {
      EXPECT_EQ(specs[n].group, specs[n - 1].group) << n;
    }
  }
  EXPECT_EQ(lstm, 3);
  EXPECT_EQ(cnn_learnable, 5);
  std::vector<LayerSpec> bad = {{LayerKind::batch_norm, 1, 1, 0, 1, Activation::none}};
  EXPECT_THROW(tag_groups(bad), TaggingError);
}

TEST(Architecture, IndivisibleSizeIsShapeErrorAtConstruction) {
  EXPECT_THROW(Autoencoder<float>(Architecture{30, 32, 4, 1}, 1), ShapeError);
  EXPECT_THROW(Autoencoder<float>(Architecture{32, 34, 4, 1}, 1), ShapeError);
}

TEST(Forward, ShapeRoundTripAndSigmoidRange) {
  for (int hw : {32, 64, 128}) {
    Autoencoder<float> m({hw, hw, 4, hw == 128 ? 16 : 4}, 2);
    auto cs = testutil::random_windows(2, 4, hw, hw, 3);
    auto x = to_batch<float>(cs);
    auto y = m.forward(x);
    EXPECT_TRUE(y.same_shape(x)) << hw;
    for (float v : y.data) {
      ASSERT_GT(v, 0.0f);
      ASSERT_LT(v, 1.0f);
    }
  }
}

TEST(Forward, FullWidthModelAt64) {
  Autoencoder<float> m({64, 64, 4, 1}, 2);
  auto x = to_batch<float>(testutil::random_windows(1, 4, 64, 64, 4));
  EXPECT_TRUE(m.forward(x).same_shape(x));
}

TEST(Forward, WrongInputShapeIsShapeError) {
  Autoencoder<float> m(small(), 1);
  auto x = to_batch<float>(testutil::random_windows(1, 3, 16, 16, 4));
  EXPECT_THROW(m.forward(x), ShapeError);
}

TEST(Forward, InferenceBatchNormIsDeterministicAffine) {
  BatchNorm<double> bn({LayerKind::batch_norm, 2, 2, 0, 1, Activation::none, Group::cnn, false});
  bn.gamma.data = {1.5, -0.5};
  bn.beta.data = {0.1, 0.2};
  bn.running_mean.data = {0.3, -0.2};
  bn.running_var.data = {2.0, 0.5};
  Batch<double> x(1, 2, 2, 2, 2);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = 0.1 * static_cast<double>(i);
  auto y1 = bn.forward(x, {false, true});
  auto y2 = bn.forward(x, {false, true});
  EXPECT_EQ(y1.data, y2.data);
  for (int b = 0; b < x.frames(); ++b)
    for (int c = 0; c < 2; ++c)
      for (int p = 0; p < 4; ++p) {
        const double v = x.frame(b)[c * 4 + p];
        const double want = bn.gamma.data[c] * (v - bn.running_mean.data[c]) /
                                std::sqrt(bn.running_var.data[c] + 1e-5) +
                            bn.beta.data[c];
        EXPECT_NEAR(y1.frame(b)[c * 4 + p], want, 1e-12);
      }
  EXPECT_EQ(bn.running_mean.data, (std::vector<double>{0.3, -0.2}));
}

TEST(Train, ConstantDatasetLossFallsBelowTenPercent) {
  Autoencoder<float> m(small(8), 5);
  auto cs = constant_windows(8, 4, 16, 16, 0.3f);
  TrainConfig cfg;
  cfg.epochs = 100;
  auto losses = train(m, cs, cfg);
  ASSERT_EQ(losses.size(), 100u);
  EXPECT_LT(losses.back(), 0.1 * losses.front());
  EXPECT_EQ(m.epochs_trained, 100);
  EXPECT_EQ(m.history.size(), 100u);
}

TEST(Train, ZeroEpochsIsNoOp) {
  Autoencoder<float> m(small(), 5);
  const auto before = parameter_hash(m);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_TRUE(train(m, testutil::random_windows(4, 4, 16, 16, 1), cfg).empty());
  EXPECT_EQ(parameter_hash(m), before);
  EXPECT_EQ(m.epochs_trained, 0);
}

TEST(Train, Deterministic) {
  auto cs = testutil::random_windows(12, 4, 16, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  Autoencoder<float> a(small(), 9), b(small(), 9);
  EXPECT_EQ(train(a, cs, cfg), train(b, cs, cfg));
  EXPECT_EQ(parameter_hash(a), parameter_hash(b));
}

TEST(Train, SplitRunMatchesContinuousRun) {
  auto cs = testutil::random_windows(10, 4, 16, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  Autoencoder<float> a(small(), 9), b(small(), 9);
  train(a, cs, cfg);
  train(a, cs, cfg);
  cfg.epochs = 4;
  train(b, cs, cfg);
  // Adam restarts per call, so only the shuffles coincide.
  EXPECT_EQ(a.epochs_trained, b.epochs_trained);
  EXPECT_EQ(a.history.front().loss, b.history.front().loss);
}

TEST(Train, RejectsAnomalousAndEmptySets) {
  Autoencoder<float> m(small(), 1);
  auto cs = testutil::random_windows(3, 4, 16, 16, 1);
  cs[1].label = FrameLabel::anomalous;
  EXPECT_THROW(train(m, cs, {}), ContractError);
  EXPECT_THROW(train(m, {}, {}), ArgumentError);
}

TEST(Train, FrozenLayersBitIdentical) {
  for (auto group : {Trainable::cnn, Trainable::convlstm}) {
    Autoencoder<float> m(small(), 4);
    m.set_trainable(group);
    std::vector<std::vector<float>> frozen_before, live_before;
    for (auto &[n, p] : m.parameters())
      (m.layer(n).spec.frozen ? frozen_before : live_before).push_back(p.value->data);
    std::vector<std::vector<float>> state_before;
    for (std::size_t n = 0; n < m.size(); ++n)
      if (m.layer(n).spec.frozen)
        for (auto &[name, t] : m.layer(n).state())
          state_before.push_back(t->data);
    TrainConfig cfg;
    cfg.epochs = 2;
    train(m, testutil::random_windows(8, 4, 16, 16, 6), cfg);
    std::vector<std::vector<float>> frozen_after, live_after, state_after;
    for (auto &[n, p] : m.parameters())
      (m.layer(n).spec.frozen ? frozen_after : live_after).push_back(p.value->data);
    for (std::size_t n = 0; n < m.size(); ++n)
      if (m.layer(n).spec.frozen)
        for (auto &[name, t] : m.layer(n).state())
          state_after.push_back(t->data);
    EXPECT_EQ(frozen_before, frozen_after);
    EXPECT_EQ(state_before, state_after);
    EXPECT_NE(live_before, live_after);
  }
}

TEST(Train, SetTrainableGroups) {
  Autoencoder<float> m(small(), 1);
  m.set_trainable(Trainable::none);
  for (std::size_t n = 0; n < m.size(); ++n)
    EXPECT_TRUE(m.layer(n).spec.frozen);
  m.set_trainable(Trainable::all);
  for (std::size_t n = 0; n < m.size(); ++n)
    EXPECT_FALSE(m.layer(n).spec.frozen);
  EXPECT_EQ(parse_trainable("convlstm"), Trainable::convlstm);
  EXPECT_THROW(parse_trainable("decoder"), ArgumentError);
}

TEST(GradCheck, ReducedStackAt8x8) {
  Autoencoder<double> m({8, 8, 2, 32}, 3);
  auto x = to_batch<double>(testutil::random_windows(2, 2, 8, 8, 5));
  GradCheckOptions opt;
  opt.max_entries = 4;
  auto r = gradient_check_model(m, x, opt);
  EXPECT_LE(r.max_rel_error, 1e-4) << to_json(r).dump();
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  Autoencoder<float> m(small(), 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  train(m, testutil::random_windows(6, 4, 16, 16, 2), cfg, "source");
  auto dir = testutil::temp_dir("ckpt");
  const auto h1 = save_checkpoint(m, cfg, dir / "m.ckpt");
  auto loaded = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(parameter_hash(loaded.model), parameter_hash(m));
  EXPECT_EQ(loaded.model.specs(), m.specs());
  EXPECT_EQ(loaded.model.architecture(), m.architecture());
  EXPECT_EQ(loaded.training, cfg);
  EXPECT_EQ(loaded.model.epochs_trained, 1);
  ASSERT_EQ(loaded.model.history.size(), 1u);
  EXPECT_EQ(loaded.model.history[0].phase, "source");
  const auto h2 = save_checkpoint(loaded.model, loaded.training, dir / "m2.ckpt");
  EXPECT_EQ(h1, h2);
  auto x = to_batch<float>(testutil::random_windows(2, 4, 16, 16, 8));
  EXPECT_EQ(m.forward(x).data, loaded.model.forward(x).data);
}

TEST(Checkpoint, LayoutHeader) {
  Autoencoder<float> m(small(), 3);
  const std::string bytes = checkpoint_bytes(m, {});
  EXPECT_EQ(bytes.substr(0, 8), "AMXFCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  EXPECT_THROW(checkpoint_from_bytes(corrupt), ValidationError);
  corrupt = bytes;
  corrupt[8] = 2;
  EXPECT_THROW(checkpoint_from_bytes(corrupt), ValidationError);
  EXPECT_THROW(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 4)), ValidationError);
}
