#pragma once

// Convolutional LSTM with peephole connections:
//
//   i_t = sigmoid(W_xi * X_t + W_hi * H_{t-1} + w_ci . C_{t-1} + b_i)
//   f_t = sigmoid(W_xf * X_t + W_hf * H_{t-1} + w_cf . C_{t-1} + b_f)
//   g_t = tanh   (W_xg * X_t + W_hg * H_{t-1} + b_g)
//   C_t = f_t . C_{t-1} + i_t . g_t
//   o_t = sigmoid(W_xo * X_t + W_ho * H_{t-1} + w_co . C_t + b_o)
//   H_t = o_t . tanh(C_t)
//
// `*` is a same-padded stride-1 convolution, `.` the Hadamard product. The
// peephole weights are shaped like the cell state (channels x H x W). Gate
// blocks are stacked i, f, g, o along the output-channel axis of W_x / W_h.

#include <span>
#include <string>
#include <vector>

#include "amxfer/nn/layers.hpp"

namespace amxfer::nn {

template <class S> struct ConvLstmCellParams {
  int in_channels = 1, hidden_channels = 1, kernel = 3, height = 1, width = 1;
  Tensor<S> w_x;   // (4*hidden, in, k, k)
  Tensor<S> w_h;   // (4*hidden, hidden, k, k)
  Tensor<S> bias;  // (4*hidden)
  Tensor<S> w_ci, w_cf, w_co; // (hidden, H, W)

  ConvLstmCellParams() = default;
  ConvLstmCellParams(int in, int hidden, int k, int h, int w)
      : in_channels(in), hidden_channels(hidden), kernel(k), height(h), width(w),
        w_x({4 * hidden, in, k, k}), w_h({4 * hidden, hidden, k, k}), bias({4 * hidden}),
        w_ci({hidden, h, w}), w_cf({hidden, h, w}), w_co({hidden, h, w}) {}

  std::size_t state_size() const { return static_cast<std::size_t>(hidden_channels) * height * width; }
  std::size_t input_size() const { return static_cast<std::size_t>(in_channels) * height * width; }

  /// Kernel squareness and peephole shapes.
  void validate() const {
    auto expect = [](const Tensor<S> &t, std::vector<int> shape, const char *name) {
      if (t.shape != shape || t.size() != Tensor<S>::count(shape))
        throw ShapeError(std::string("conv_lstm cell: tensor ") + name + " has wrong shape");
    };
    expect(w_x, {4 * hidden_channels, in_channels, kernel, kernel}, "W_x");
    expect(w_h, {4 * hidden_channels, hidden_channels, kernel, kernel}, "W_h");
    expect(bias, {4 * hidden_channels}, "b");
    expect(w_ci, {hidden_channels, height, width}, "W_ci");
    expect(w_cf, {hidden_channels, height, width}, "W_cf");
    expect(w_co, {hidden_channels, height, width}, "W_co");
  }
};

/// Gate activations and states of one time step, each hidden x H x W.
template <class S> struct CellStep {
  std::vector<S> i, f, g, o, c, h;
};

namespace detail {

/// Pre-activations W_x * X + W_h * H + b as a (4*hidden) x (H*W) matrix.
template <class S>
void gate_preactivations(const ConvLstmCellParams<S> &p, const ConvGeometry &geom, const S *x,
                         const S *h_prev, std::vector<S> &col_x, std::vector<S> &col_h,
                         std::vector<S> &z) {
  const int P = geom.col_cols(), G = 4 * p.hidden_channels;
  const int Kx = geom.col_rows(p.in_channels), Kh = geom.col_rows(p.hidden_channels);
  col_x.resize(static_cast<std::size_t>(Kx) * P);
  col_h.resize(static_cast<std::size_t>(Kh) * P);
  z.resize(static_cast<std::size_t>(G) * P);
  im2col(x, p.in_channels, geom, col_x.data());
  im2col(h_prev, p.hidden_channels, geom, col_h.data());
  MapR<S> Z(z.data(), G, P);
  Z.noalias() = CMapR<S>(p.w_x.ptr(), G, Kx) * CMapR<S>(col_x.data(), Kx, P);
  Z.noalias() += CMapR<S>(p.w_h.ptr(), G, Kh) * CMapR<S>(col_h.data(), Kh, P);
  for (int r = 0; r < G; ++r)
    Z.row(r).array() += p.bias.data[r];
}

template <class S>
void cell_pointwise(const ConvLstmCellParams<S> &p, const std::vector<S> &z, const S *c_prev,
                    CellStep<S> &out) {
  const std::size_t n = p.state_size();
  for (auto *v : {&out.i, &out.f, &out.g, &out.o, &out.c, &out.h})
    v->resize(n);
  const S *zi = z.data(), *zf = zi + n, *zg = zf + n, *zo = zg + n;
  for (std::size_t e = 0; e < n; ++e) {
    const S cp = c_prev[e];
    const S i = sigmoid(zi[e] + p.w_ci.data[e] * cp);
    const S f = sigmoid(zf[e] + p.w_cf.data[e] * cp);
    const S g = std::tanh(zg[e]);
    const S c = f * cp + i * g;
    const S o = sigmoid(zo[e] + p.w_co.data[e] * c);
    out.i[e] = i;
    out.f[e] = f;
    out.g[e] = g;
    out.c[e] = c;
    out.o[e] = o;
    out.h[e] = o * std::tanh(c);
  }
}

} // namespace detail

/// One ConvLSTM transition for a single frame: X_t is in x H x W, the states
/// are hidden x H x W.
template <class S>
CellStep<S> conv_lstm_step(const ConvLstmCellParams<S> &p, std::span<const S> x_t,
                           std::span<const S> h_prev, std::span<const S> c_prev) {
  p.validate();
  if (x_t.size() != p.input_size())
    throw ShapeError("conv_lstm_step: X_t has " + std::to_string(x_t.size()) +
                     " elements, expected " + std::to_string(p.input_size()));
  if (h_prev.size() != p.state_size())
    throw ShapeError("conv_lstm_step: H_prev has wrong size");
  if (c_prev.size() != p.state_size())
    throw ShapeError("conv_lstm_step: C_prev has wrong size");
  const auto geom = ConvGeometry::same(p.height, p.width, p.kernel, 1);
  std::vector<S> col_x, col_h, z;
  detail::gate_preactivations(p, geom, x_t.data(), h_prev.data(), col_x, col_h, z);
  CellStep<S> out;
  detail::cell_pointwise(p, z, c_prev.data(), out);
  return out;
}

/// ConvLSTM layer unrolled over the window, emitting act(H_t) at every step
/// (sequence to sequence). The recurrence always carries the raw H_t; the
/// layer activation only shapes what the next layer sees.
template <class S> class ConvLstm final : public Layer<S> {
public:
  ConvLstm(LayerSpec s, int height, int width)
      : Layer<S>(s), cell(s.in_channels, s.out_channels, s.kernel, height, width),
        grad(s.in_channels, s.out_channels, s.kernel, height, width) {
    if (s.stride != 1)
      throw ShapeError("conv_lstm: stride must be 1");
  }

  ConvLstmCellParams<S> cell;
  ConvLstmCellParams<S> grad;

  std::unique_ptr<Layer<S>> clone() const override { return std::make_unique<ConvLstm>(*this); }

  void initialize(Initializer &init) override {
    const int k2 = cell.kernel * cell.kernel, hid = cell.hidden_channels;
    init.glorot(cell.w_x, cell.in_channels * k2, 4 * hid * k2);
    init.glorot(cell.w_h, hid * k2, 4 * hid * k2);
    cell.bias.zero();
    // Unit forget bias.
    for (int c = 0; c < hid; ++c)
      cell.bias.data[hid + c] = S(1);
    cell.w_ci.zero();
    cell.w_cf.zero();
    cell.w_co.zero();
  }

  std::vector<ParamRef<S>> params() override {
    return {{"W_x", &cell.w_x, &grad.w_x},    {"W_h", &cell.w_h, &grad.w_h},
            {"bias", &cell.bias, &grad.bias}, {"W_ci", &cell.w_ci, &grad.w_ci},
            {"W_cf", &cell.w_cf, &grad.w_cf}, {"W_co", &cell.w_co, &grad.w_co}};
  }

  Batch<S> forward(const Batch<S> &x, const ForwardOptions &) override {
    this->check_input(x);
    if (x.height != cell.height || x.width != cell.width)
      throw ShapeError("conv_lstm: input plane " + std::to_string(x.height) + "x" +
                       std::to_string(x.width) + " does not match the cell state plane " +
                       std::to_string(cell.height) + "x" + std::to_string(cell.width));
    input_ = x;
    geom_ = ConvGeometry::same(cell.height, cell.width, cell.kernel, 1);
    const std::size_t n = cell.state_size();
    steps_.assign(static_cast<std::size_t>(x.frames()), {});
    Batch<S> y(x.n, x.steps, cell.hidden_channels, cell.height, cell.width);
    std::vector<S> zeros(n, S(0)), col_x, col_h, z;
    for (int s = 0; s < x.n; ++s)
      for (int t = 0; t < x.steps; ++t) {
        const S *h_prev = t == 0 ? zeros.data() : steps_[s * x.steps + t - 1].h.data();
        const S *c_prev = t == 0 ? zeros.data() : steps_[s * x.steps + t - 1].c.data();
        detail::gate_preactivations(cell, geom_, x.frame(s, t), h_prev, col_x, col_h, z);
        auto &rec = steps_[s * x.steps + t];
        detail::cell_pointwise(cell, z, c_prev, rec);
        S *out = y.frame(s, t);
        for (std::size_t e = 0; e < n; ++e)
          out[e] = activate(this->spec.activation, rec.h[e]);
      }
    return y;
  }

  Batch<S> backward(const Batch<S> &dy, bool param_grads, bool input_grad) override {
    const int hid = cell.hidden_channels;
    const std::size_t n = cell.state_size();
    const int P = geom_.col_cols();
    const int Kx = geom_.col_rows(cell.in_channels), Kh = geom_.col_rows(hid);
    Batch<S> dx;
    if (input_grad)
      dx = Batch<S>(input_.n, input_.steps, cell.in_channels, cell.height, cell.width);
    std::vector<S> zeros(n, S(0)), dh(n), dc(n), dh_next(n), dc_next(n), dz(4 * n);
    std::vector<S> col_x(static_cast<std::size_t>(Kx) * P), col_h(static_cast<std::size_t>(Kh) * P);
    std::vector<S> dcol_x(col_x.size()), dcol_h(col_h.size());
    CMapR<S> Wx(cell.w_x.ptr(), 4 * hid, Kx), Wh(cell.w_h.ptr(), 4 * hid, Kh);

    for (int s = 0; s < input_.n; ++s) {
      std::fill(dh_next.begin(), dh_next.end(), S(0));
      std::fill(dc_next.begin(), dc_next.end(), S(0));
      for (int t = input_.steps - 1; t >= 0; --t) {
        const auto &r = steps_[s * input_.steps + t];
        const S *c_prev = t == 0 ? zeros.data() : steps_[s * input_.steps + t - 1].c.data();
        const S *h_prev = t == 0 ? zeros.data() : steps_[s * input_.steps + t - 1].h.data();
        const S *g_out = dy.frame(s, t);
        S *dzi = dz.data(), *dzf = dzi + n, *dzg = dzf + n, *dzo = dzg + n;
        for (std::size_t e = 0; e < n; ++e) {
          const S y = activate(this->spec.activation, r.h[e]);
          const S dH = g_out[e] * activate_grad_from_output(this->spec.activation, y) + dh_next[e];
          const S tc = std::tanh(r.c[e]);
          const S d_o = dH * tc;
          S dC = dH * r.o[e] * (S(1) - tc * tc) + dc_next[e];
          const S dao = d_o * r.o[e] * (S(1) - r.o[e]);
          dC += dao * cell.w_co.data[e];
          const S dai = dC * r.g[e] * r.i[e] * (S(1) - r.i[e]);
          const S daf = dC * c_prev[e] * r.f[e] * (S(1) - r.f[e]);
          const S dag = dC * r.i[e] * (S(1) - r.g[e] * r.g[e]);
          if (param_grads) {
            grad.w_co.data[e] += dao * r.c[e];
            grad.w_ci.data[e] += dai * c_prev[e];
            grad.w_cf.data[e] += daf * c_prev[e];
          }
          dc_next[e] = dC * r.f[e] + dai * cell.w_ci.data[e] + daf * cell.w_cf.data[e];
          dzi[e] = dai;
          dzf[e] = daf;
          dzg[e] = dag;
          dzo[e] = dao;
        }
        CMapR<S> DZ(dz.data(), 4 * hid, P);
        if (param_grads) {
          im2col(input_.frame(s, t), cell.in_channels, geom_, col_x.data());
          im2col(h_prev, hid, geom_, col_h.data());
          MapR<S>(grad.w_x.ptr(), 4 * hid, Kx).noalias() +=
              DZ * CMapR<S>(col_x.data(), Kx, P).transpose();
          MapR<S>(grad.w_h.ptr(), 4 * hid, Kh).noalias() +=
              DZ * CMapR<S>(col_h.data(), Kh, P).transpose();
          for (int r2 = 0; r2 < 4 * hid; ++r2)
            grad.bias.data[r2] += DZ.row(r2).sum();
        }
        if (input_grad) {
          MapR<S>(dcol_x.data(), Kx, P).noalias() = Wx.transpose() * DZ;
          col2im(dcol_x.data(), cell.in_channels, geom_, dx.frame(s, t));
        }
        std::fill(dh_next.begin(), dh_next.end(), S(0));
        if (t > 0) {
          MapR<S>(dcol_h.data(), Kh, P).noalias() = Wh.transpose() * DZ;
          col2im(dcol_h.data(), hid, geom_, dh_next.data());
        }
      }
    }
    return dx;
  }

  const std::vector<CellStep<S>> &records() const { return steps_; }

private:
  Batch<S> input_;
  ConvGeometry geom_;
  std::vector<CellStep<S>> steps_;
};

} // namespace amxfer::nn
