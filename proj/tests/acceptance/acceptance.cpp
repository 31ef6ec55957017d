// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is the number of
// failures. Pass criterion numbers as arguments to run a subset.
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "epsnet/evaluation.hpp"
#include "epsnet/event_study.hpp"
#include "epsnet/forecaster.hpp"
#include "epsnet/nn/adam.hpp"
#include "epsnet/nn/gru.hpp"
#include "epsnet/nn/layers.hpp"
#include "epsnet/panel.hpp"
#include "epsnet/rank_tests.hpp"
#include "epsnet/synth.hpp"
#include "epsnet/workflow.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace epsnet;
namespace oracle = epsnet::oracle;
using nn::Index;
using nn::Matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  Outcome done(std::string detail) const {
    if (failures_.empty()) return {true, std::move(detail)};
    std::string msg = detail + "; failed: " + failures_.front();
    if (failures_.size() > 1) msg += " (+" + std::to_string(failures_.size() - 1) + " more)";
    return {false, msg};
  }

 private:
  std::vector<std::string> failures_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double weighted(const Matrix& out, const Matrix& w) { return (out.array() * w.array()).sum(); }

// 1 -------------------------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr double kTol = 1e-4, kH = 1e-5;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(2, 5);
  std::map<std::string, std::pair<int, double>> worst;
  auto record = [&](const std::string& layer, double err) {
    auto& w = worst[layer];
    ++w.first;
    w.second = std::max(w.second, err);
  };

  for (int i = 0; i < 20; ++i) {
    nn::Dense d(dim(rng), dim(rng));
    d.init(rng);
    d.bias = oracle::random_matrix(d.outputs(), 1, rng);
    const Matrix x = oracle::random_matrix(d.inputs(), dim(rng), rng);
    const Matrix w = oracle::random_matrix(d.outputs(), x.cols(), rng);
    d.zero_grad();
    d.forward(x);
    const Matrix dx = d.backward(w);
    nn::ParamList p;
    d.collect(p, "dense");
    record("dense", std::max(oracle::max_param_gradient_error([&] { return weighted(d.forward(x), w); }, p, kH),
                             oracle::max_input_gradient_error(
                                 [&](const Matrix& v) { return weighted(d.forward(v), w); }, x, dx, kH)));
  }
  for (int i = 0; i < 15; ++i) {
    nn::Tanh t;
    const Matrix x = oracle::random_matrix(dim(rng), dim(rng), rng, 1.5);
    const Matrix w = oracle::random_matrix(x.rows(), x.cols(), rng);
    t.forward(x);
    const Matrix dx = t.backward(w);
    record("tanh", oracle::max_input_gradient_error([&](const Matrix& v) { return weighted(t.forward(v), w); }, x,
                                                    dx, kH));
  }
  for (int i = 0; i < 15; ++i) {
    nn::Dropout drop(0.3);
    const Matrix x = oracle::random_matrix(dim(rng), 6, rng);
    const Matrix w = oracle::random_matrix(x.rows(), x.cols(), rng);
    const std::uint64_t seed = rng();
    auto f = [&](const Matrix& v) {
      nn::Rng r(seed);
      return weighted(drop.forward(v, true, r), w);
    };
    f(x);
    const Matrix dx = drop.backward(w);
    record("dropout", oracle::max_input_gradient_error(f, x, dx, kH));
  }
  for (int i = 0; i < 20; ++i) {
    nn::BatchNorm bn(dim(rng));
    bn.gamma = oracle::random_matrix(bn.gamma.rows(), 1, rng);
    bn.beta = oracle::random_matrix(bn.gamma.rows(), 1, rng);
    const Matrix x = oracle::random_matrix(bn.gamma.rows(), 3 + dim(rng), rng, 2.0);
    const Matrix w = oracle::random_matrix(x.rows(), x.cols(), rng);
    bn.zero_grad();
    bn.forward(x, true, false);
    const Matrix dx = bn.backward(w);
    nn::ParamList p;
    bn.collect(p, "bn");
    auto f = [&](const Matrix& v) { return weighted(bn.forward(v, true, false), w); };
    record("batch_norm", std::max(oracle::max_param_gradient_error([&] { return f(x); }, p, kH),
                                  oracle::max_input_gradient_error(f, x, dx, kH)));
  }
  for (int i = 0; i < 20; ++i) {
    nn::Gru g(dim(rng), dim(rng));
    g.init(rng);
    for (Matrix* b : {&g.b_z, &g.b_r, &g.b_h}) *b = oracle::random_matrix(g.hidden(), 1, rng, 0.3);
    const Index steps = dim(rng), B = dim(rng);
    const Matrix x = oracle::random_matrix(g.inputs(), steps * B, rng);
    const Matrix h0 = oracle::random_matrix(g.hidden(), B, rng, 0.5);
    const Matrix w = oracle::random_matrix(g.hidden(), steps * B, rng);
    g.zero_grad();
    g.forward(x, steps, h0);
    const Matrix dx = g.backward(w);
    const Matrix dh0 = g.grad_h0();
    nn::ParamList p;
    g.collect(p, "gru");
    auto f = [&](const Matrix& v) { return weighted(g.forward(v, steps, h0), w); };
    auto fh = [&](const Matrix& v) { return weighted(g.forward(x, steps, v), w); };
    record("gru", std::max({oracle::max_param_gradient_error([&] { return f(x); }, p, kH),
                            oracle::max_input_gradient_error(f, x, dx, kH),
                            oracle::max_input_gradient_error(fh, h0, dh0, kH)}));
  }
  for (int i = 0; i < 10; ++i) {
    const Matrix target = oracle::random_matrix(2, 6, rng);
    Matrix pred = oracle::random_matrix(2, 6, rng);
    for (Index k = 0; k < pred.size(); ++k)
      if (std::abs(pred.data()[k] - target.data()[k]) < 1e-3) pred.data()[k] += 0.01;
    const Matrix grad = nn::mae_loss(pred, target).grad;
    record("mae_loss", oracle::max_input_gradient_error([&](const Matrix& v) { return nn::mae_loss(v, target).value; },
                                                        pred, grad, kH));
  }
  for (int i = 0; i < 10; ++i) {
    NetShape shape;
    shape.gru1 = dim(rng);
    shape.gru2 = dim(rng);
    shape.dense1 = dim(rng);
    shape.dense2 = dim(rng);
    shape.steps = dim(rng);
    ForecastNet net(shape, 0.2);
    net.init(rng());
    WindowBatch batch;
    batch.size = 3 + dim(rng);
    batch.acc = oracle::random_matrix(shape.accounting, shape.steps * batch.size, rng);
    batch.market = oracle::random_matrix(shape.market, batch.size, rng);
    const Matrix w = oracle::random_matrix(shape.outputs, batch.size, rng);
    const std::uint64_t seed = rng();
    auto f = [&] {
      nn::Rng r(seed);
      return weighted(net.forward(batch, {true, true, false}, r), w);
    };
    net.zero_grad();
    f();
    net.backward(w);
    record("forecast_net", oracle::max_param_gradient_error(f, net.params(), kH));
  }

  const double elapsed = seconds_since(t0);
  Checks c;
  int instances = 0;
  std::string detail;
  for (const auto& [layer, w] : worst) {
    instances += w.first;
    c.expect(w.second < kTol, layer + " max rel err " + fmt(w.second));
    detail += layer + "=" + fmt(w.second, 2) + " ";
  }
  c.expect(instances >= 100, "only " + std::to_string(instances) + " instances");
  c.expect(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
  return c.done(std::to_string(instances) + " instances, " + detail + "in " + fmt(elapsed, 3) + " s");
}

// 2 -------------------------------------------------------------------------------------------

Outcome gru_oracle() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  constexpr Index kSteps = 3, kUnits = 2;
  for (int trial = 0; trial < 50; ++trial) {
    const Index inputs = 1 + trial % 4, B = 1 + trial % 3;
    nn::Gru g(inputs, kUnits);
    g.init(rng);
    for (Matrix* b : {&g.b_z, &g.b_r, &g.b_h}) *b = oracle::random_matrix(kUnits, 1, rng, 0.5);
    const Matrix seq = oracle::random_matrix(inputs, kSteps * B, rng, 1.5);
    const Matrix h0 = oracle::random_matrix(kUnits, B, rng, 0.7);
    const Matrix out = g.forward(seq, kSteps, h0);
    std::vector<oracle::Grid> x(kSteps, oracle::Grid(B, std::vector<double>(inputs)));
    for (Index t = 0; t < kSteps; ++t)
      for (Index b = 0; b < B; ++b)
        for (Index i = 0; i < inputs; ++i) x[t][b][i] = seq(i, t * B + b);
    oracle::Grid h(B, std::vector<double>(kUnits));
    for (Index b = 0; b < B; ++b)
      for (Index k = 0; k < kUnits; ++k) h[b][k] = h0(k, b);
    const auto ref = oracle::scalar_gru(g, x, h);
    for (Index t = 0; t < kSteps; ++t)
      for (Index b = 0; b < B; ++b)
        for (Index k = 0; k < kUnits; ++k) worst = std::max(worst, std::abs(out(k, t * B + b) - ref[t][b][k]));
  }
  Checks c;
  c.expect(worst <= 1e-12, "max abs diff " + fmt(worst));
  return c.done("50 instances, max abs diff " + fmt(worst, 3));
}

// 3 -------------------------------------------------------------------------------------------

Outcome adam_recurrence() {
  const nn::AdamConfig cfg;
  Checks c;
  double worst_unrolled = 0.0, worst_first = 0.0;
  for (double g : {1.0, -0.37, 2.5, 1e-3, 100.0}) {
    Matrix v = Matrix::Constant(1, 1, 0.25), grad = Matrix::Constant(1, 1, g);
    nn::ParamList p{{"w", &v, &grad}};
    nn::AdamState state(cfg, p);
    for (int step = 1; step <= 2; ++step) {
      nn::adam_step(state, p);
      const double ref = oracle::adam_unrolled(0.25, g, step, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
      worst_unrolled = std::max(worst_unrolled, std::abs(v(0, 0) - ref));
    }
  }
  c.expect(worst_unrolled <= 1e-12, "two-step deviation " + fmt(worst_unrolled));
  // |g| >= 100 keeps the epsilon term below 1e-10 of the step.
  for (double g : {100.0, -300.0, 1e4}) {
    Matrix v = Matrix::Zero(1, 1), grad = Matrix::Constant(1, 1, g);
    nn::ParamList p{{"w", &v, &grad}};
    nn::AdamState state(cfg, p);
    nn::adam_step(state, p);
    worst_first = std::max(worst_first, std::abs(std::abs(v(0, 0)) / cfg.learning_rate - 1.0));
  }
  c.expect(worst_first <= 1e-9, "first-step relative deviation " + fmt(worst_first));
  Matrix v = Matrix::Zero(1, 1), grad = Matrix::Ones(1, 1);
  nn::ParamList p{{"w", &v, &grad}};
  nn::AdamState state(cfg, p);
  nn::adam_step(state, p);
  const double unit = cfg.learning_rate / (1.0 + cfg.epsilon);
  c.expect(std::abs(-v(0, 0) - unit) <= 1e-15, "unit-gradient first step != lr/(1+eps)");
  return c.done("two-step max abs diff " + fmt(worst_unrolled, 2) + ", first-step rel dev " + fmt(worst_first, 2));
}

// 4 -------------------------------------------------------------------------------------------

Outcome architecture_audit() {
  ForecastNet net;
  const std::size_t expected = oracle::closed_form_parameter_count(6, 76, 38, 10, 19, 8, 2);
  const std::size_t got = net.parameter_count();
  std::size_t summed = 0;
  for (const auto& p : net.params()) summed += static_cast<std::size_t>(p.value->size());
  Checks c;
  c.expect(expected == 33197, "closed form " + std::to_string(expected));
  c.expect(got == expected, "parameter_count " + std::to_string(got));
  c.expect(summed == expected, "summed tensors " + std::to_string(summed));
  return c.done("parameters " + std::to_string(got) + " (closed form " + std::to_string(expected) + ")");
}

// 5 -------------------------------------------------------------------------------------------

std::vector<FeatureWindow> noise_windows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<FeatureWindow> out(n);
  for (auto& w : out) {
    for (Index i = 0; i < w.acc.size(); ++i) w.acc.data()[i] = z(rng);
    for (Index i = 0; i < w.market.size(); ++i) w.market(i) = z(rng);
    w.pad_len = 0;
    w.target_q_eps = z(rng);
    w.target_y_eps = z(rng);
  }
  return out;
}

Outcome early_stopping() {
  const auto train = noise_windows(96, 1), val = noise_windows(32, 2);
  const auto scaling = TargetScaling::fit(train);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 8;
  Checks c;

  std::vector<std::vector<nn::NamedTensor>> snapshots;
  TrainHooks rising;
  rising.validation_score = [](int epoch, ForecastNet&) { return 1.0 + epoch; };
  rising.on_epoch_end = [&](int, const ForecastNet& net) { snapshots.push_back(net.state()); };
  const auto up = train_one(cfg, train, val, scaling, 3, &rising);
  c.expect(up.report.epochs_run == 2, "rising: ran " + std::to_string(up.report.epochs_run) + " epochs");
  c.expect(up.report.stopped_early && up.report.restored_epoch == 1, "rising: did not restore epoch 1");
  bool identical = snapshots.size() == 2;
  const auto restored = up.net.state();
  for (std::size_t i = 0; identical && i < restored.size(); ++i)
    identical = restored[i].value == snapshots[0][i].value;
  c.expect(identical, "rising: parameters differ from the epoch-1 snapshot");
  bool moved = snapshots.size() == 2 && !(snapshots[1][0].value == snapshots[0][0].value);
  c.expect(moved, "rising: epoch 2 did not change parameters");

  TrainHooks falling;
  falling.validation_score = [](int epoch, ForecastNet&) { return 1.0 / epoch; };
  const auto down = train_one(cfg, train, val, scaling, 3, &falling);
  c.expect(down.report.epochs_run == cfg.max_epochs && !down.report.stopped_early, "falling: stopped early");
  c.expect(down.report.restored_epoch == cfg.max_epochs, "falling: restored a non-final epoch");
  return c.done("rising stops after epoch " + std::to_string(up.report.epochs_run) + " restoring epoch " +
                std::to_string(up.report.restored_epoch) + "; falling runs " +
                std::to_string(down.report.epochs_run) + "/" + std::to_string(cfg.max_epochs));
}

// 6 -------------------------------------------------------------------------------------------

Outcome determinism() {
  const auto synth = fixture::small_synth(40, 16, 21);
  TrainConfig cfg;
  cfg.ensemble_size = 2;
  cfg.max_epochs = 3;
  cfg.batch_size = 128;
  cfg.seed = 5;
  fixture::TempDir dir;
  std::vector<std::vector<Prediction>> preds;
  std::vector<std::string> forecasts;
  for (int run = 0; run < 2; ++run) {
    const auto panel = generate_panel(synth);
    const MarketIndex market(panel.market);
    const auto data = prepare_data(panel.quarters, market);
    const auto bundle = train_models(data, cfg);
    bundle.save(dir.str("bundle" + std::to_string(run)));
    const auto test = apply_transforms(data.raw_test, bundle.ensemble.stats);
    preds.push_back(predict(bundle.ensemble, test));
    std::ostringstream s;
    build_forecast_set(data, market, bundle).write_csv(s);
    forecasts.push_back(s.str());
  }
  Checks c;
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path() / "bundle0")) {
    const auto other = dir.path() / "bundle1" / entry.path().filename();
    c.expect(fixture::read_file(entry.path()) == fixture::read_file(other),
             entry.path().filename().string() + " differs");
    ++files;
  }
  c.expect(files >= 5, "bundle has only " + std::to_string(files) + " files");
  bool same = preds[0].size() == preds[1].size() && !preds[0].empty();
  for (std::size_t i = 0; same && i < preds[0].size(); ++i)
    same = std::memcmp(&preds[0][i], &preds[1][i], sizeof(Prediction)) == 0;
  c.expect(same, "predictions differ bitwise");
  c.expect(forecasts[0] == forecasts[1], "forecast CSV differs");
  return c.done(std::to_string(files) + " bundle files and " + std::to_string(preds[0].size()) +
                " predictions bit-identical");
}

// 7 -------------------------------------------------------------------------------------------

Outcome statistics_oracles() {
  Checks c;
  const std::vector<double> six{0.5, 1.2, 2.0, 3.1, 4.4, 5.9};
  const double w6 = wilcoxon_signed_rank(six).p_value;
  c.expect(std::abs(w6 - 0.03125) <= 1e-12, "wilcoxon n=6 p=" + fmt(w6, 10));
  const std::vector<double> lo{1, 2, 3}, hi{4, 5, 6};
  const double mw = mann_whitney_u(lo, hi).p_value;
  c.expect(std::abs(mw - 0.1) <= 1e-12, "mann-whitney p=" + fmt(mw, 10));

  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  double worst_w = 0, worst_mw = 0, worst_enum = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(20), a(10), b(10);
    for (double& x : d) x = z(rng) + 0.1 * trial;
    for (double& x : a) x = z(rng);
    for (double& x : b) x = z(rng) + 0.08 * trial;
    const double we = wilcoxon_signed_rank(d, PValueMethod::Exact).p_value;
    worst_w = std::max(worst_w, std::abs(wilcoxon_signed_rank(d, PValueMethod::Normal).p_value - we));
    const double me = mann_whitney_u(a, b, PValueMethod::Exact).p_value;
    worst_mw = std::max(worst_mw, std::abs(mann_whitney_u(a, b, PValueMethod::Normal).p_value - me));
    if (trial % 5 == 0) {
      worst_enum = std::max(worst_enum, std::abs(we - oracle::wilcoxon_enumerated_p(d)));
      worst_enum = std::max(worst_enum, std::abs(me - oracle::mann_whitney_enumerated_p(a, b)));
    }
  }
  c.expect(worst_w <= 0.01, "wilcoxon normal vs exact " + fmt(worst_w));
  c.expect(worst_mw <= 0.01, "mann-whitney normal vs exact " + fmt(worst_mw));
  c.expect(worst_enum <= 1e-12, "exact vs enumeration " + fmt(worst_enum));

  double worst_m = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> act(5 + trial), pred(act.size());
    for (std::size_t i = 0; i < act.size(); ++i) {
      act[i] = 1.0 + z(rng);
      pred[i] = act[i] * (1.0 + 0.2 * z(rng));
    }
    const auto s = summarize_errors(act, pred);
    const auto pd = oracle::brute_percentage_differences(act, pred);
    std::vector<double> ad;
    for (double x : pd) ad.push_back(std::abs(x));
    worst_m = std::max({worst_m, std::abs(s.mapd - oracle::brute_median(ad)), std::abs(s.mpd - oracle::brute_median(pd))});
  }
  c.expect(worst_m <= 1e-12, "MAPD/MPD deviation " + fmt(worst_m));
  return c.done("normal-vs-exact at n=20: W " + fmt(worst_w, 3) + ", U " + fmt(worst_mw, 3) + "; MAPD/MPD dev " +
                fmt(worst_m, 2));
}

// 8 -------------------------------------------------------------------------------------------

Outcome sign_metrics() {
  const Confusion m{{{5, 1, 0}, {1, 5, 1}, {0, 1, 6}}};
  const auto r = macro_metrics(m);
  const double macro = 101.0 / 126.0, accuracy = 52.0 / 60.0;
  Checks c;
  c.expect(std::abs(r.average_accuracy - accuracy) <= 1e-12, "average accuracy " + fmt(r.average_accuracy, 15));
  c.expect(std::abs(r.macro_precision - macro) <= 1e-12, "macro precision " + fmt(r.macro_precision, 15));
  c.expect(std::abs(r.macro_recall - macro) <= 1e-12, "macro recall " + fmt(r.macro_recall, 15));
  c.expect(std::abs(r.macro_f1 - macro) <= 1e-12, "macro F1 " + fmt(r.macro_f1, 15));
  return c.done("accuracy 52/60, precision = recall = F1 = 101/126");
}

// 9 -------------------------------------------------------------------------------------------

std::vector<SurpriseObservation> planted_sample(const SynthConfig& cfg) {
  const auto panel = generate_panel(cfg);
  auto obs = planted_surprises(panel);
  attach_abnormal_returns(obs, MarketIndex(panel.market));
  return obs;
}

Outcome erc_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  SynthConfig big;
  big.firms = 320;
  big.quarters = 32;
  big.seed = 909;
  const auto obs = planted_sample(big);
  const auto fit = erc_regression(obs, Horizon::Quarterly);
  const double b0 = fit["surprise"].estimate;
  c.expect(obs.size() >= 10000, "only " + std::to_string(obs.size()) + " events");
  c.expect(std::abs(b0 - big.erc) <= 0.01, "beta0 " + fmt(b0));

  int covered = 0;
  constexpr int kReplicates = 200;
  for (int rep = 0; rep < kReplicates; ++rep) {
    SynthConfig small;
    small.firms = 40;
    small.quarters = 12;
    small.seed = 5000 + static_cast<std::uint64_t>(rep);
    const auto r = erc_regression(planted_sample(small), Horizon::Quarterly);
    const auto& s = r["surprise"];
    const boost::math::students_t t(static_cast<double>(r.clusters - 1));
    const double half = boost::math::quantile(boost::math::complement(t, 0.025)) * s.std_error;
    if (std::abs(s.estimate - small.erc) <= half) ++covered;
  }
  const double coverage = static_cast<double>(covered) / kReplicates;
  c.expect(coverage >= 0.90 && coverage <= 0.98, "coverage " + fmt(coverage));
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 600.0, "runtime " + fmt(elapsed) + " s");
  return c.done(std::to_string(obs.size()) + " events, beta0 " + fmt(b0) + " (se " + fmt(fit["surprise"].std_error, 3) +
                "), 95% CI coverage " + fmt(coverage, 3) + " over " + std::to_string(kReplicates) + " panels, " +
                fmt(elapsed, 3) + " s");
}

// 10 ------------------------------------------------------------------------------------------

SynthConfig end_to_end_synth() {
  SynthConfig cfg;
  cfg.firms = 700;
  cfg.seed = 7;
  return cfg;
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthConfig synth = end_to_end_synth();
  const auto panel = generate_panel(synth);
  const MarketIndex market(panel.market);
  const auto data = prepare_data(panel.quarters, market);
  const std::size_t windows = data.raw_train.size() + data.raw_validation.size() + data.raw_test.size();
  TrainConfig cfg;
  cfg.seed = synth.seed;
  const auto bundle = train_models(data, cfg);
  const auto forecasts = build_forecast_set(data, market, bundle);
  SampleFilterConfig filter;
  filter.horizon = Horizon::Annual;
  const auto sample = apply_sample_filters(forecasts.rows, filter).rows;

  std::map<ModelTag, ErrorSummary> by_model;
  for (ModelTag m : kAllModels) {
    std::vector<double> a, p;
    for (const auto& r : sample) {
      a.push_back(r.actual_y);
      p.push_back(r.prediction(m, Horizon::Annual));
    }
    by_model[m] = summarize_errors(a, p);
  }
  std::array<double, 4> quarter_mapd{};
  for (int q = 1; q <= 4; ++q) {
    std::vector<double> a, p;
    for (const auto& r : sample)
      if (r.fiscal_quarter == q) {
        a.push_back(r.actual_y);
        p.push_back(r.prediction(ModelTag::Rnn, Horizon::Annual));
      }
    quarter_mapd[static_cast<std::size_t>(q - 1)] = summarize_errors(a, p).mapd;
  }
  const double elapsed = seconds_since(t0);

  const double rnn = by_model[ModelTag::Rnn].mapd, rw = by_model[ModelTag::RandomWalk].mapd;
  const double reg = by_model[ModelTag::Regression].mapd, analyst_mpd = by_model[ModelTag::Analyst].mpd;
  Checks c;
  c.expect(windows >= 20000, "only " + std::to_string(windows) + " windows");
  c.expect(rnn < rw, "RNN MAPD " + fmt(100 * rnn) + "% not below random walk " + fmt(100 * rw) + "%");
  c.expect(rnn < reg, "RNN MAPD " + fmt(100 * rnn) + "% not below regression " + fmt(100 * reg) + "%");
  c.expect(std::abs(analyst_mpd - synth.analyst_bias) <= 0.02, "analyst MPD " + fmt(100 * analyst_mpd) + "%");
  for (std::size_t q = 1; q < 4; ++q)
    c.expect(quarter_mapd[q] < quarter_mapd[q - 1], "Q" + std::to_string(q + 1) + " MAPD not below Q" +
                                                        std::to_string(q));
  c.expect(elapsed < 900.0, "runtime " + fmt(elapsed) + " s");
  std::string quarters;
  for (double m : quarter_mapd) quarters += fmt(100 * m, 3) + "% ";
  return c.done(std::to_string(windows) + " windows; annual MAPD rnn " + fmt(100 * rnn, 3) + "%, regression " +
                fmt(100 * reg, 3) + "%, random walk " + fmt(100 * rw, 3) + "%; analyst MPD " +
                fmt(100 * analyst_mpd, 3) + "%; rnn Q1..Q4 " + quarters + "in " + fmt(elapsed, 3) + " s");
}

// 11 ------------------------------------------------------------------------------------------

Outcome pipeline_invariants() {
  Checks c;
  const auto synth = fixture::small_synth(80, 20, 31);
  auto panel = generate_panel(synth);
  panel.quarters[5].eps = kMissing;
  panel.quarters[17].total_assets = kMissing;
  panel.quarters.push_back(panel.quarters[40]);
  const auto once = clean_panel(panel.quarters);
  const auto twice = clean_panel(once.records);
  c.expect(twice.records == once.records && twice.log.survivors == once.log.survivors, "clean_panel not idempotent");

  const MarketIndex market(panel.market);
  const auto data = prepare_data(panel.quarters, market);
  std::size_t windows = 0;
  for (const auto* part : {&data.raw_train, &data.raw_validation, &data.raw_test})
    for (const auto& w : *part) {
      ++windows;
      c.expect(w.meta.max_input_date < w.meta.report_date, "lookahead in window of " + w.meta.firm_id);
    }

  TrainConfig cfg;
  cfg.ensemble_size = 1;
  cfg.max_epochs = 1;
  cfg.batch_size = 256;
  const auto bundle = train_models(data, cfg);
  const auto forecasts = build_forecast_set(data, market, bundle);

  for (Horizon h : {Horizon::Annual, Horizon::Quarterly}) {
    SampleFilterConfig f;
    f.horizon = h;
    f.models = {ModelTag::Rnn, ModelTag::Regression, ModelTag::RandomWalk};
    const auto res = apply_sample_filters(forecasts.rows, f);
    const std::size_t screened = res.log.input - res.log.missing_model - res.log.zero_actual - res.log.penny;
    const auto k = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(screened)));
    c.expect(res.log.trimmed_low == k && res.log.trimmed_high == k && res.rows.size() == screened - 2 * k,
             "trim count mismatch");
    for (auto key : {PartitionKey::Quarter, PartitionKey::SizeDecile, PartitionKey::Industry, PartitionKey::Year,
                     PartitionKey::Covid, PartitionKey::Coverage}) {
      PartitionConfig pc;
      pc.models = f.models;
      std::map<ModelTag, std::size_t> total;
      for (const auto& r : partition_evaluate(res.rows, key, h, pc)) total[r.model] += r.n;
      for (ModelTag m : f.models)
        c.expect(total[m] == res.rows.size(), std::string(partition_name(key)) + " cells do not sum to total");
    }

    std::vector<ForecastRow> cov, unc;
    for (const auto& r : res.rows) (r.covered ? cov : unc).push_back(r);
    const double limit = 0.05;
    const auto pairs = match_similar_firms(cov, unc, limit);
    double ma = 0, mq = 0;
    const double n = static_cast<double>(res.rows.size());
    for (const auto& r : res.rows) ma += r.total_assets / n, mq += r.tobins_q / n;
    double va = 0, vq = 0;
    for (const auto& r : res.rows) va += std::pow(r.total_assets - ma, 2) / n, vq += std::pow(r.tobins_q - mq, 2) / n;
    auto dist = [&](const ForecastRow& a, const ForecastRow& b) {
      return std::hypot((a.total_assets - b.total_assets) / std::sqrt(va), (a.tobins_q - b.tobins_q) / std::sqrt(vq));
    };
    std::set<std::size_t> matched;
    for (const auto& p : pairs) {
      matched.insert(p.uncovered);
      c.expect(unc[p.uncovered].industry == cov[p.covered].industry, "matched across industries");
      c.expect(p.distance < limit, "matched beyond the distance limit");
      c.expect(std::abs(p.distance - dist(unc[p.uncovered], cov[p.covered])) < 1e-9, "distance mismatch");
    }
    for (std::size_t u = 0; u < unc.size(); ++u)
      for (const auto& cv : cov)
        if (cv.industry == unc[u].industry && dist(unc[u], cv) < limit)
          c.expect(matched.count(u) == 1, "eligible uncovered row left unmatched");
    if (h == Horizon::Annual) c.expect(!pairs.empty(), "no matched pairs");
  }
  return c.done(std::to_string(once.records.size()) + " cleaned rows, " + std::to_string(windows) + " windows, " +
                std::to_string(forecasts.rows.size()) + " forecast rows checked");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "GRU oracle equivalence", gru_oracle},
      {3, "Adam unit recurrence", adam_recurrence},
      {4, "architecture audit", architecture_audit},
      {5, "early stopping", early_stopping},
      {6, "determinism", determinism},
      {7, "statistics oracles", statistics_oracles},
      {8, "sign metrics", sign_metrics},
      {9, "ERC recovery", erc_recovery},
      {10, "end-to-end directional reproduction", end_to_end},
      {11, "pipeline invariants", pipeline_invariants},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && !only.count(cr.id)) continue;
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-36s %s  %s\n", cr.id, cr.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
