// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

#include "amxfer/amxfer.hpp"

using namespace amxfer;
using namespace amxfer::nn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string &name, Outcome &o, double secs, double budget) {
  o.check(secs <= budget, "runtime " + std::to_string(secs) + " s over " + std::to_string(budget) + " s");
  failures += !o.pass;
  std::printf("%s criterion %d: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs,
              o.detail.str().c_str());
  std::fflush(stdout);
}

template <class F> void run(int id, const std::string &name, double budget, F body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception &e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  report(id, name, o, seconds_since(t0), budget);
}

// 1 ----------------------------------------------------------------------
void case_study(Outcome &o) {
  const auto dir = std::filesystem::path(AMXFER_DATA_DIR) / "contexts";
  const auto src = load_context_file(dir / "lpbf_nist.json");
  const auto tgt = load_context_file(dir / "ded_msu.json");
  const auto r = pretransfer_score(src, tgt);
  const auto plan = compare(src, tgt);
  std::vector<int> scores;
  for (const auto &cs : r.component_scores)
    scores.push_back(cs.score);
  o.check(scores == std::vector<int>{0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1}, "component scores");
  o.check(r.am_similarity + r.ml_similarity == 8 && r.kc_total == 11, "S = 8/11");
  o.check(std::abs(r.similarity_index - 8.0 / 11.0) < 1e-12, "S value");
  o.check(display2(r.similarity_index) == "0.73", "S display");
  o.check(r.maturity_factor == 1.0 && r.availability_factor == 1, "M = 1, A = 1");
  o.check(display2(r.pre_transfer_score) == "0.73" && std::abs(r.pre_transfer_score - 0.73) <= 0.005,
          "score display");
  o.check(r.significant, "significant");
  o.check(plan.scenario == Scenario::transductive, "scenario");
  o.check(plan.method_family == MethodFamily::parameter_based, "method");
  o.detail << " score " << display2(r.pre_transfer_score) << ", " << to_string(plan.scenario) << "/"
           << to_string(plan.method_family);
}

// 2 ----------------------------------------------------------------------
void gradients(Outcome &o) {
  double worst_cell = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = gradient_check_conv_lstm(seed);
    worst_cell = std::max(worst_cell, r.max_rel_error);
    for (const char *name : {"W_x", "W_h", "bias", "W_ci", "W_cf", "W_co", "X"})
      o.check(r.find(name) != nullptr, std::string("cell tensor ") + name);
  }
  o.check(worst_cell <= 1e-5, "cell error " + std::to_string(worst_cell));

  Autoencoder<double> model(Architecture{8, 8, 4, 1}, 17);
  std::mt19937_64 rng(99);
  Batch<double> x(2, 4, 1, 8, 8);
  for (auto &v : x.data)
    v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  opt.max_entries = 6;
  opt.seed = 5;
  const auto r = gradient_check_model(model, x, opt);
  o.check(model.size() == 14, "full stack has 14 rows");
  o.check(r.max_rel_error <= 1e-4, "stack error " + std::to_string(r.max_rel_error));
  std::size_t skipped = 0;
  for (const auto &t : r.tensors) {
    o.check(t.checked == std::min<std::size_t>(opt.max_entries, t.checked + t.skipped) &&
                t.checked > 0,
            t.name + " checked " + std::to_string(t.checked));
    skipped += t.skipped;
  }
  o.detail << " cells " << worst_cell << ", stack " << r.max_rel_error << " over " << r.tensors.size()
           << " tensors (" << skipped << " kink entries replaced)";
}

// 3 ----------------------------------------------------------------------
struct Row {
  LayerKind kind;
  int in, out, kernel, stride;
  Activation act;
};

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

std::size_t closed_form(const Row &r, std::size_t h, std::size_t w) {
  const std::size_t k2 = static_cast<std::size_t>(r.kernel) * r.kernel;
  switch (r.kind) {
  case LayerKind::conv2d:
  case LayerKind::conv2d_transpose: return k2 * r.in * r.out + r.out;
  case LayerKind::batch_norm: return 2 * static_cast<std::size_t>(r.out);
  case LayerKind::conv_lstm: return 4 * k2 * r.out * (r.in + r.out) + 4 * r.out + 3 * r.out * h * w;
  }
  return 0;
}

void architecture(Outcome &o) {
  for (int hw : {32, 64}) {
    Autoencoder<float> m(Architecture{hw, hw, 4, 1}, 1);
    o.check(m.size() == kTable.size(), "row count");
    std::size_t h = hw, w = hw;
    for (std::size_t n = 0; n < std::min(m.size(), kTable.size()); ++n) {
      const auto &s = m.layer(n).spec;
      const auto &t = kTable[n];
      const bool same = s.kind == t.kind && s.in_channels == t.in && s.out_channels == t.out &&
                        s.kernel == t.kernel && s.stride == t.stride && s.activation == t.act;
      o.check(same, "row " + std::to_string(n));
      if (t.kind == LayerKind::conv2d) {
        h /= 2;
        w /= 2;
      }
      o.check(m.layer(n).parameter_count() == closed_form(t, h, w),
              "parameter count of row " + std::to_string(n) + " at " + std::to_string(hw));
      if (t.kind == LayerKind::conv2d_transpose && t.stride == 2) {
        h *= 2;
        w *= 2;
      }
    }
    std::mt19937_64 rng(hw);
    Batch<float> x(1, 4, 1, hw, hw);
    for (auto &v : x.data)
      v = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    const auto y = m.forward(x);
    o.check(y.same_shape(x), "round trip at " + std::to_string(hw));
    bool in_range = true;
    for (float v : y.data)
      in_range = in_range && v >= 0.0f && v <= 1.0f;
    o.check(in_range, "sigmoid output range");
  }
  o.check(Autoencoder<float>(Architecture{}, 1).layer(0).parameter_count() == 3328, "first row 3328");
}

// 4 ----------------------------------------------------------------------
void scoring_oracle(Outcome &o) {
  std::mt19937_64 rng(2024);
  auto uni = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 2 + inst % 4, T = 1 + inst % 4, H = 1 + inst % 3, W = 2 + inst % 3;
    Batch<double> in(n, T, 1, H, W), out(n, T, 1, H, W);
    for (auto &v : in.data)
      v = uni();
    for (auto &v : out.data)
      v = uni();
    const auto costs = batch_costs(in, out, Residual::squared);
    std::vector<double> r_naive(n);
    for (int s = 0; s < n; ++s)
      for (int t = 0; t < T; ++t) {
        double d = 0.0;
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const double e = in.frame(s, t)[y * W + x] - out.frame(s, t)[y * W + x];
            d += e * e;
          }
        worst = std::max(worst, std::abs(d - costs[s].d[t]));
        r_naive[s] += d;
      }
    double lo = r_naive[0], hi = r_naive[0];
    for (double r : r_naive) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    std::vector<double> train_r;
    for (const auto &c : costs)
      train_r.push_back(c.r);
    const auto norm = Normalizer::fit(train_r, Normalization::max_scaled);
    for (int s = 0; s < n; ++s) {
      worst = std::max(worst, std::abs(r_naive[s] - costs[s].r));
      const double sa = (r_naive[s] - lo) / hi;
      worst = std::max(worst, std::abs(sa - norm.sa(costs[s].r)));
      worst = std::max(worst, std::abs(1.0 - sa - norm.sr(costs[s].r)));
    }
    o.check(std::abs(norm.sr(lo) - 1.0) < 1e-12, "sr = 1 at min cost");
    o.check(std::abs(norm.sa(hi) - (hi - lo) / hi) < 1e-12, "sa at max cost");
  }
  o.check(worst <= 1e-9, "oracle difference " + std::to_string(worst));
  o.detail << " max difference " << worst;
}

// 5 ----------------------------------------------------------------------
std::vector<WindowCost> costs_of(const std::vector<double> &rs) {
  std::vector<WindowCost> out;
  for (double r : rs)
    out.push_back({{r}, r});
  return out;
}

std::vector<Concatenation> labeled(const std::vector<FrameLabel> &labels) {
  std::vector<Concatenation> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Concatenation c;
    c.start_index = i;
    c.label = labels[i];
    out.push_back(c);
  }
  return out;
}

void thresholds(Outcome &o) {
  o.check(select_threshold({0.9, 0.7, 0.95, 0.8, 0.99}, ThresholdRule::kth_min_regularity, 3) == 0.9,
          "3rd minimum");
  o.check(select_threshold({0.9, 0.7, 0.95, 0.8, 0.99}, ThresholdRule::kth_min_regularity, 1) == 0.7,
          "1st minimum");
  std::vector<double> ramp;
  for (int i = 1; i <= 200; ++i)
    ramp.push_back(i);
  o.check(select_threshold(ramp, ThresholdRule::percentile_error, 3, 99.0) == 198.0, "percentile");
  o.check(select_threshold(ramp, ThresholdRule::max_train_error) == 200.0, "max error");

  // Train costs {1,2,3,4,10}: sr = 1 - (r - 1)/10 = {1, .9, .8, .7, .1}; 3rd min = 0.8.
  const auto A = FrameLabel::anomalous, N = FrameLabel::normal;
  const auto rep = regularity_report(costs_of({1, 2, 3, 4, 10}), costs_of({1.5, 5, 9, 2.5}),
                                     labeled({A, A, A, N}), ScoringConfig{});
  o.check(std::abs(rep.threshold - 0.8) < 1e-12, "threshold 0.8");
  o.check(rep.evaluation.anomalies == 3 && rep.evaluation.detected_anomalies == 2, "2 of 3 detected");
  o.check(std::abs(rep.evaluation.accuracy_pct - 200.0 / 3.0) < 1e-9, "accuracy 66.67%");
  o.check(rep.evaluation.false_positive_rate && *rep.evaluation.false_positive_rate == 0.0, "no FP");

  std::vector<ScoredWindow> items(10);
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[i].label = A;
    items[i].sr = i < 7 ? 0.1 : 0.9;
  }
  o.check(evaluate(items, 0.5, ThresholdRule::kth_min_regularity).accuracy_pct == 70.0, "7/10 = 70%");
  bool threw = false;
  std::vector<ScoredWindow> normals(3);
  for (auto &w : normals)
    w.label = N;
  try {
    evaluate(normals, 0.5, ThresholdRule::kth_min_regularity);
  } catch (const ArgumentError &) {
    threw = true;
  }
  o.check(threw, "zero anomalies rejected");
}

// 6-8 --------------------------------------------------------------------
ReplicaRecipe replica_recipe() {
  return load_config(std::filesystem::path(AMXFER_CONFIG_DIR) / "desk_replica.json").recipe();
}

std::vector<ReplicaRun> first_pass;

void replica(Outcome &o) {
  const auto recipe = replica_recipe();
  int holding = 0;
  for (auto seed : recipe.seeds) {
    first_pass.push_back(run_replica(recipe, seed, &std::clog));
    const auto &r = first_pass.back();
    holding += r.all_properties();
    o.detail << " seed " << seed << ": (a)" << r.loss_property() << " (b)" << r.accuracy_property()
             << " (c)" << r.improved_property() << " windows " << r.source_train << "/" << r.target_train
             << ";";
  }
  o.check(recipe.seeds.size() == 3, "three seeds");
  o.check(holding >= 2, std::to_string(holding) + " of 3 seeds hold all properties");
}

void freezing(Outcome &o) {
  o.check(!first_pass.empty(), "replica runs available");
  for (const auto &r : first_pass) {
    const TransferRunReport *lstm_first = nullptr, *cnn_first = nullptr;
    for (const auto &run : r.runs) {
      if (run.strategy.name == "convlstm_then_cnn")
        lstm_first = &run;
      if (run.strategy.name == "cnn_then_convlstm")
        cnn_first = &run;
      if (run.strategy.phases.size() != 2)
        continue;
      o.check(run.phases.size() == 2, run.strategy.name + " phases");
      for (const auto &ph : run.phases)
        o.check(ph.frozen_unchanged && ph.frozen_hash_before == ph.frozen_hash_after,
                run.strategy.name + " frozen group changed (seed " + std::to_string(r.seed) + ")");
    }
    o.check(lstm_first && cnn_first, "both two-phase strategies ran");
    if (lstm_first && cnn_first)
      o.check(lstm_first->phases[0].losses != cnn_first->phases[0].losses &&
                  lstm_first->phases[1].losses != cnn_first->phases[1].losses,
              "phase histories identical (seed " + std::to_string(r.seed) + ")");
  }
}

void determinism(Outcome &o) {
  const auto recipe = replica_recipe();
  o.check(first_pass.size() == recipe.seeds.size(), "first pass complete");
  for (std::size_t i = 0; i < first_pass.size(); ++i) {
    const auto again = run_replica(recipe, recipe.seeds[i], &std::clog);
    const auto &a = first_pass[i];
    const std::string s = " (seed " + std::to_string(a.seed) + ")";
    o.check(again.source_checkpoint_hash == a.source_checkpoint_hash, "source checkpoint" + s);
    o.check(again.transferred_checkpoint_hashes == a.transferred_checkpoint_hashes,
            "transferred checkpoints" + s);
    o.check(to_json(again).dump() == to_json(a).dump(), "reports" + s);
    o.check(nn::fnv1a64(to_json(again).dump()) == nn::fnv1a64(to_json(a).dump()), "report hash" + s);
    for (std::size_t k = 0; k < a.runs.size(); ++k)
      o.check(again.runs[k].post_accuracy_pct == a.runs[k].post_accuracy_pct, "accuracy" + s);
  }
}

} // namespace

int main() {
  run(1, "case-study scoring replica", 1.0, case_study);
  run(2, "ConvLSTM gradient correctness", 120.0, gradients);
  run(3, "architecture fidelity", 10.0, architecture);
  run(4, "scoring oracle equivalence", 30.0, scoring_oracle);
  run(5, "threshold and metric fixtures", 5.0, thresholds);
  run(6, "desk-scale transfer experiment", 1800.0, replica);
  run(7, "freezing contract", 1.0, freezing);
  run(8, "determinism", 1800.0, determinism);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
