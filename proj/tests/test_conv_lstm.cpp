#include <gtest/gtest.h>

#include <cmath>

#include "amxfer/nn/gradcheck.hpp"

using namespace amxfer;
using namespace amxfer::nn;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ConvLstmCellParams<double> unit_cell(int in, int hid, int k, int h, int w) {
  return ConvLstmCellParams<double>(in, hid, k, h, w);
}

CellStep<double> step(const ConvLstmCellParams<double> &p, const std::vector<double> &x,
                      const std::vector<double> &h, const std::vector<double> &c) {
  return conv_lstm_step<double>(p, x, h, c);
}

} // namespace

TEST(ConvLstmCell, ZeroParametersGiveHalfGates) {
  auto p = unit_cell(2, 3, 3, 4, 4);
  std::vector<double> x(p.input_size(), 0.7), h(p.state_size(), 0.0), c(p.state_size(), 0.0);
  auto s = step(p, x, h, c);
  for (std::size_t e = 0; e < p.state_size(); ++e) {
    EXPECT_DOUBLE_EQ(s.i[e], 0.5);
    EXPECT_DOUBLE_EQ(s.f[e], 0.5);
    EXPECT_DOUBLE_EQ(s.o[e], 0.5);
    EXPECT_DOUBLE_EQ(s.g[e], 0.0);
    EXPECT_DOUBLE_EQ(s.c[e], 0.0);
    EXPECT_DOUBLE_EQ(s.h[e], 0.0);
  }
}

TEST(ConvLstmCell, ScalarBruteForce) {
  auto p = unit_cell(1, 1, 1, 1, 1);
  for (auto *t : {&p.w_x, &p.w_h, &p.w_ci, &p.w_cf, &p.w_co})
    std::fill(t->data.begin(), t->data.end(), 1.0);
  auto s = step(p, {1.0}, {0.0}, {0.0});
  const double i = sig(1), f = sig(1), g = std::tanh(1.0);
  const double c = f * 0.0 + i * g;
  const double o = sig(1 + 1.0 * c);
  EXPECT_NEAR(s.i[0], i, 1e-15);
  EXPECT_NEAR(s.g[0], g, 1e-15);
  EXPECT_NEAR(s.c[0], sig(1) * std::tanh(1.0), 1e-15);
  EXPECT_NEAR(s.o[0], o, 1e-15);
  EXPECT_NEAR(s.h[0], o * std::tanh(c), 1e-15);
}

TEST(ConvLstmCell, ScalarBruteForceWithState) {
  auto p = unit_cell(1, 1, 1, 1, 1);
  const double wx[4] = {0.3, -0.2, 0.5, 0.1}, wh[4] = {-0.4, 0.6, 0.2, -0.3},
               b[4] = {0.05, 1.0, -0.1, 0.2};
  for (int q = 0; q < 4; ++q) {
    p.w_x.data[q] = wx[q];
    p.w_h.data[q] = wh[q];
    p.bias.data[q] = b[q];
  }
  p.w_ci.data[0] = 0.7;
  p.w_cf.data[0] = -0.5;
  p.w_co.data[0] = 0.9;
  const double x = 0.8, hp = -0.3, cp = 0.6;
  auto s = step(p, {x}, {hp}, {cp});
  const double i = sig(wx[0] * x + wh[0] * hp + 0.7 * cp + b[0]);
  const double f = sig(wx[1] * x + wh[1] * hp - 0.5 * cp + b[1]);
  const double g = std::tanh(wx[2] * x + wh[2] * hp + b[2]);
  const double c = f * cp + i * g;
  const double o = sig(wx[3] * x + wh[3] * hp + 0.9 * c + b[3]);
  EXPECT_NEAR(s.c[0], c, 1e-15);
  EXPECT_NEAR(s.o[0], o, 1e-15);
  EXPECT_NEAR(s.h[0], o * std::tanh(c), 1e-15);
}

TEST(ConvLstmCell, ForgetSaturationKeepsState) {
  auto p = unit_cell(1, 2, 3, 3, 3);
  for (int c = 0; c < 2; ++c)
    p.bias.data[2 + c] = 10.0;
  std::vector<double> x(p.input_size(), 0.4), h(p.state_size(), 0.0), cprev(p.state_size());
  for (std::size_t e = 0; e < cprev.size(); ++e)
    cprev[e] = 0.1 * static_cast<double>(e) - 0.5;
  auto s = step(p, x, h, cprev);
  for (std::size_t e = 0; e < cprev.size(); ++e)
    EXPECT_NEAR(s.c[e], cprev[e], 1e-4);
}

TEST(ConvLstmCell, OutputGateSeesNewCellState) {
  auto p = unit_cell(1, 1, 1, 1, 1);
  p.w_co.data[0] = 2.0;
  p.w_x.data[2] = 1.5; // g path
  p.w_x.data[0] = 0.8; // i path
  auto a = step(p, {0.2}, {0.0}, {0.0});
  auto b = step(p, {0.9}, {0.0}, {0.0});
  ASSERT_NE(a.c[0], b.c[0]);
  // o depends on the input only through C_t.
  EXPECT_NEAR(a.o[0], sig(2.0 * a.c[0]), 1e-15);
  EXPECT_NEAR(b.o[0], sig(2.0 * b.c[0]), 1e-15);
  EXPECT_NE(a.o[0], b.o[0]);
  p.w_co.data[0] = 0.0;
  EXPECT_EQ(step(p, {0.2}, {0.0}, {0.0}).o[0], step(p, {0.9}, {0.0}, {0.0}).o[0]);
}

TEST(ConvLstmCell, ShapeErrorsNameTensor) {
  auto p = unit_cell(2, 2, 3, 4, 4);
  std::vector<double> x(p.input_size()), h(p.state_size()), c(p.state_size());
  auto expect_msg = [](auto fn, const std::string &needle) {
    try {
      fn();
      FAIL() << "no throw";
    } catch (const ShapeError &e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_msg([&] { step(p, std::vector<double>(3), h, c); }, "X_t");
  expect_msg([&] { step(p, x, std::vector<double>(3), c); }, "H_prev");
  expect_msg([&] { step(p, x, h, std::vector<double>(3)); }, "C_prev");
  auto bad = p;
  bad.w_co = Tensor<double>({2, 3, 3});
  expect_msg([&] { step(bad, x, h, c); }, "W_co");
}

TEST(ConvLstmCell, SamePaddingPreservesShape) {
  for (int k : {1, 3, 5}) {
    auto p = unit_cell(1, 2, k, 5, 7);
    auto s = step(p, std::vector<double>(p.input_size(), 0.3),
                  std::vector<double>(p.state_size()), std::vector<double>(p.state_size()));
    EXPECT_EQ(s.h.size(), p.state_size());
  }
}

TEST(GradCheck, RandomCellsFiveSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = gradient_check_conv_lstm(seed);
    EXPECT_TRUE(r.pass) << "seed " << seed << " " << to_json(r).dump();
    EXPECT_LE(r.max_rel_error, 1e-5);
    for (const char *name : {"W_x", "W_h", "bias", "W_ci", "W_cf", "W_co", "X"})
      EXPECT_NE(r.find(name), nullptr) << name;
  }
}

TEST(GradCheck, ReluOutputVariant) {
  CellCheckShape shape;
  shape.activation = Activation::relu;
  EXPECT_TRUE(gradient_check_conv_lstm(7, shape).pass);
}

TEST(GradCheck, ZeroInputZeroStateGateJacobians) {
  // Single step from zero state: dH/dz_o = tanh(C) * o(1-o) with o = 0.5.
  LayerSpec spec{LayerKind::conv_lstm, 1, 1, 1, 1, Activation::none, Group::convlstm, false};
  ConvLstm<double> layer(spec, 1, 1);
  Batch<double> x(1, 1, 1, 1, 1);
  auto r = gradient_check_layer(layer, x, {});
  EXPECT_TRUE(r.pass);
  layer.forward(x, {});
  layer.zero_grad();
  Batch<double> dy(1, 1, 1, 1, 1);
  dy.data[0] = 1.0;
  layer.backward(dy, true, true);
  // With every parameter zero, C = i*g = 0.5*tanh(0) = 0 and dH/db_g = o * i = 0.25.
  EXPECT_NEAR(layer.grad.bias.data[2], 0.25, 1e-15);
  EXPECT_NEAR(layer.grad.bias.data[0], 0.0, 1e-15);
  EXPECT_NEAR(layer.grad.bias.data[3], 0.0, 1e-15);
}

TEST(GradCheck, LayersIndividually) {
  std::mt19937_64 rng(3);
  auto uni = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Batch<double> x(2, 2, 2, 8, 8);
  for (auto &v : x.data)
    v = uni();
  Initializer init(5);
  Conv2d<double> conv({LayerKind::conv2d, 2, 3, 5, 2, Activation::relu, Group::cnn, false});
  conv.initialize(init);
  EXPECT_TRUE(gradient_check_layer(conv, x, {}).pass);
  ConvTranspose2d<double> tconv(
      {LayerKind::conv2d_transpose, 2, 3, 5, 2, Activation::sigmoid, Group::cnn, false});
  tconv.initialize(init);
  EXPECT_TRUE(gradient_check_layer(tconv, x, {}).pass);
  BatchNorm<double> bn({LayerKind::batch_norm, 2, 2, 0, 1, Activation::none, Group::cnn, false});
  bn.initialize(init);
  EXPECT_TRUE(gradient_check_layer(bn, x, {}).pass);
}

TEST(GradCheck, EntriesAtReluKinkAreReplaced) {
  Conv2d<double> conv({LayerKind::conv2d, 1, 2, 1, 1, Activation::relu, Group::cnn, false});
  for (auto &p : conv.params())
    p.value->data =
        p.name == "kernel" ? std::vector<double>{1.0, 1.0} : std::vector<double>{0.0, 0.3};
  Batch<double> x(1, 1, 1, 2, 2);
  x.data = {0.5, 1e-8, 0.25, 0.75};
  GradCheckOptions opt;
  const auto r = gradient_check_layer(conv, x, opt);
  EXPECT_TRUE(r.pass);
  const TensorCheck *in = r.find("X");
  ASSERT_NE(in, nullptr);
  EXPECT_EQ(in->skipped, 1u);
  EXPECT_EQ(in->checked, 3u);
  EXPECT_EQ(r.find("bias")->checked, 1u);

  opt.skip_kinks = false;
  EXPECT_FALSE(gradient_check_layer(conv, x, opt).pass);
}
