// SPDX-License-Identifier: Apache-2.0
#include "epsnet/forecaster.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "epsnet/error.hpp"

namespace epsnet {

using nn::Index;
using nn::Matrix;
using json = nlohmann::json;

namespace {

std::pair<double, double> mean_std(std::span<const FeatureWindow> w, bool annual) {
  double mean = 0.0;
  std::size_t k = 0;
  for (const auto& x : w) {
    const double v = annual ? x.target_y_eps : x.target_q_eps;
    ++k;
    mean += (v - mean) / static_cast<double>(k);
  }
  double ss = 0.0;
  for (const auto& x : w) {
    const double d = (annual ? x.target_y_eps : x.target_q_eps) - mean;
    ss += d * d;
  }
  const double sd = w.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(w.size()));
  return {mean, sd > 0.0 && std::isfinite(sd) ? sd : 1.0};
}

nn::Rng stream_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return nn::Rng(seq);
}

}  // namespace

TargetScaling TargetScaling::fit(std::span<const FeatureWindow> windows) {
  if (windows.empty()) throw DataError("cannot fit target scaling on zero windows");
  TargetScaling s;
  std::tie(s.q_mean, s.q_std) = mean_std(windows, false);
  std::tie(s.y_mean, s.y_std) = mean_std(windows, true);
  return s;
}

WindowBatch make_batch(std::span<const FeatureWindow> windows, std::span<const std::size_t> rows,
                       const TargetScaling& scaling, Index steps) {
  if (steps < 1 || steps > kWindowLength) throw ShapeError("window length mismatch");
  const Index skip = kWindowLength - steps;
  const auto b = static_cast<Index>(rows.size());
  WindowBatch batch;
  batch.size = b;
  batch.acc.resize(kAccountingFeatures, steps * b);
  batch.market.resize(kMarketFeatures, b);
  batch.target.resize(2, b);
  for (Index j = 0; j < b; ++j) {
    const auto& w = windows[rows[static_cast<std::size_t>(j)]];
    for (Index t = 0; t < steps; ++t) batch.acc.col(t * b + j) = w.acc.row(skip + t).transpose();
    batch.market.col(j) = w.market;
    batch.target(0, j) = (w.target_q_eps - scaling.q_mean) / scaling.q_std;
    batch.target(1, j) = (w.target_y_eps - scaling.y_mean) / scaling.y_std;
  }
  return batch;
}

WindowBatch make_batch(std::span<const FeatureWindow> windows, const TargetScaling& scaling, Index steps) {
  std::vector<std::size_t> rows(windows.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return make_batch(windows, rows, scaling, steps);
}

ForecastNet::ForecastNet(NetShape shape, double dropout)
    : gru1(shape.accounting, shape.gru1),
      gru2(shape.gru1, shape.gru2),
      dense1(shape.merged(), shape.dense1),
      dense2(shape.dense1, shape.dense2),
      head(shape.dense2, shape.outputs),
      bn1(shape.dense1),
      bn2(shape.dense2),
      shape_(shape),
      drop_gru1_(dropout),
      drop_gru2_(dropout),
      drop_dense1_(dropout),
      drop_dense2_(dropout) {}

void ForecastNet::init(std::uint64_t seed) {
  nn::Rng rng = stream_rng(seed, 1);
  gru1.init(rng);
  gru2.init(rng);
  dense1.init(rng);
  dense2.init(rng);
  head.init(rng);
  bn1 = nn::BatchNorm(shape_.dense1);
  bn2 = nn::BatchNorm(shape_.dense2);
}

Matrix ForecastNet::forward(const WindowBatch& batch, ForwardMode mode, nn::Rng& rng) {
  const Index b = batch.size;
  const Index steps = shape_.steps;
  if (batch.acc.rows() != shape_.accounting || batch.acc.cols() != steps * b ||
      batch.market.rows() != shape_.market || batch.market.cols() != b)
    throw ShapeError("batch does not match network shape");
  batch_ = b;

  Matrix s1 = gru1.forward(batch.acc, steps, Matrix::Zero(shape_.gru1, b));
  s1 = drop_gru1_.forward(s1, mode.dropout, rng);
  Matrix s2 = gru2.forward(s1, steps, Matrix::Zero(shape_.gru2, b));
  Matrix last = drop_gru2_.forward(s2.rightCols(b), mode.dropout, rng);

  Matrix merged(shape_.merged(), b);
  merged.topRows(shape_.gru2) = last;
  merged.bottomRows(shape_.market) = batch.market;

  Matrix h = dense1.forward(merged);
  h = bn1.forward(h, mode.batch_stats, mode.update_running);
  h = act1_.forward(h);
  h = drop_dense1_.forward(h, mode.dropout, rng);
  h = dense2.forward(h);
  h = bn2.forward(h, mode.batch_stats, mode.update_running);
  h = act2_.forward(h);
  h = drop_dense2_.forward(h, mode.dropout, rng);
  return head.forward(h);
}

Matrix ForecastNet::forward(const WindowBatch& batch) {
  nn::Rng unused(0);
  return forward(batch, ForwardMode::infer(), unused);
}

void ForecastNet::backward(const Matrix& d_out) {
  const Index b = batch_;
  Matrix d = head.backward(d_out);
  d = drop_dense2_.backward(d);
  d = act2_.backward(d);
  d = bn2.backward(d);
  d = dense2.backward(d);
  d = drop_dense1_.backward(d);
  d = act1_.backward(d);
  d = bn1.backward(d);
  d = dense1.backward(d);

  Matrix d_s2 = Matrix::Zero(shape_.gru2, shape_.steps * b);
  d_s2.rightCols(b) = drop_gru2_.backward(d.topRows(shape_.gru2));
  Matrix d_s1 = gru2.backward(d_s2);
  gru1.backward(drop_gru1_.backward(d_s1));
}

void ForecastNet::zero_grad() {
  gru1.zero_grad();
  gru2.zero_grad();
  dense1.zero_grad();
  dense2.zero_grad();
  head.zero_grad();
  bn1.zero_grad();
  bn2.zero_grad();
}

nn::ParamList ForecastNet::params() {
  nn::ParamList out;
  gru1.collect(out, "gru1");
  gru2.collect(out, "gru2");
  dense1.collect(out, "dense1");
  bn1.collect(out, "bn1");
  dense2.collect(out, "dense2");
  bn2.collect(out, "bn2");
  head.collect(out, "head");
  return out;
}

std::size_t ForecastNet::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += static_cast<std::size_t>(p.value->size());
  return n;
}

std::vector<nn::NamedTensor> ForecastNet::state() const {
  std::vector<nn::NamedTensor> out;
  for (const auto& p : const_cast<ForecastNet*>(this)->params()) out.push_back({p.name, *p.value});
  out.push_back({"bn1.running_mean", bn1.running_mean});
  out.push_back({"bn1.running_var", bn1.running_var});
  out.push_back({"bn2.running_mean", bn2.running_mean});
  out.push_back({"bn2.running_var", bn2.running_var});
  return out;
}

void ForecastNet::load_state(std::span<const nn::NamedTensor> tensors) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  auto assign = [&](const std::string& name, Matrix& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint is missing tensor " + name);
    if (it->second->rows() != dst.rows() || it->second->cols() != dst.cols())
      throw ShapeError("checkpoint tensor " + name + " has the wrong shape");
    dst = *it->second;
  };
  for (const auto& p : params()) assign(p.name, *p.value);
  assign("bn1.running_mean", bn1.running_mean);
  assign("bn1.running_var", bn1.running_var);
  assign("bn2.running_mean", bn2.running_mean);
  assign("bn2.running_var", bn2.running_var);
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw DataError("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw DataError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw DataError("Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw DataError("epsilon must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout must be in [0, 1)");
  if (!(ema_lambda > 0.0 && ema_lambda <= 1.0)) throw DataError("ema_lambda must be in (0, 1]");
  if (ensemble_size < 1) throw DataError("ensemble_size must be at least 1");
  if (max_epochs < 1) throw DataError("max_epochs must be at least 1");
}

EmaEarlyStopping::EmaEarlyStopping(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DataError("ema lambda must be in (0, 1]");
}

bool EmaEarlyStopping::update(double score) {
  if (ema_.empty()) {
    ema_.push_back(score);
    return false;
  }
  const double prev = ema_.back();
  ema_.push_back(lambda_ * score + (1.0 - lambda_) * prev);
  return ema_.back() > prev;
}

double validation_mae(ForecastNet& net, std::span<const FeatureWindow> windows, const TargetScaling& scaling) {
  if (windows.empty()) throw DataError("validation set is empty");
  constexpr std::size_t kChunk = 4096;
  double sum_q = 0.0;
  double sum_y = 0.0;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const auto part = windows.subspan(start, std::min(kChunk, windows.size() - start));
    const WindowBatch batch = make_batch(part, scaling, net.shape().steps);
    const Matrix out = net.forward(batch);
    sum_q += (out.row(0) - batch.target.row(0)).cwiseAbs().sum();
    sum_y += (out.row(1) - batch.target.row(1)).cwiseAbs().sum();
  }
  const auto n = static_cast<double>(windows.size());
  return sum_q / n + sum_y / n;
}

TrainedMember train_one(const TrainConfig& config, std::span<const FeatureWindow> train,
                        std::span<const FeatureWindow> validation, const TargetScaling& scaling, std::uint64_t seed,
                        const TrainHooks* hooks, NetShape shape) {
  config.validate();
  if (train.size() < 2) throw DataError("need at least two training windows");
  const bool custom_score = hooks && hooks->validation_score;
  if (!custom_score && validation.empty()) throw DataError("validation set is empty");

  TrainedMember result{ForecastNet(shape, config.dropout), {}};
  ForecastNet& net = result.net;
  StopReport& report = result.report;
  report.seed = seed;
  net.init(seed);

  nn::Rng shuffle_rng = stream_rng(seed, 2);
  nn::Rng dropout_rng = stream_rng(seed, 3);

  const std::size_t fixed_n = std::min(config.batch_size, train.size());
  const WindowBatch fixed = make_batch(train.first(fixed_n), scaling, shape.steps);
  const ForwardMode fixed_mode{false, true, false};
  auto fixed_loss = [&] {
    nn::Rng unused(0);
    return 2.0 * nn::mae_loss(net.forward(fixed, fixed_mode, unused), fixed.target).value;
  };
  report.fixed_batch_loss_before = fixed_loss();

  const nn::ParamList params = net.params();
  nn::AdamState adam({config.learning_rate, config.beta1, config.beta2, config.epsilon}, params);
  EmaEarlyStopping stopper(config.ema_lambda);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<nn::NamedTensor> previous;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t size = std::min(config.batch_size, order.size() - start);
      if (size < 2) continue;
      const WindowBatch batch = make_batch(train, std::span(order).subspan(start, size), scaling, shape.steps);
      net.zero_grad();
      const Matrix out = net.forward(batch, ForwardMode::train(), dropout_rng);
      nn::Loss loss = nn::mae_loss(out, batch.target);
      const double value = 2.0 * loss.value;
      if (!std::isfinite(value)) throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      net.backward(2.0 * loss.grad);
      nn::adam_step(adam, params);
      loss_sum += value;
      ++batches;
    }
    report.train_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    if (epoch == 1) report.fixed_batch_loss_after_epoch1 = fixed_loss();

    const double score = custom_score ? hooks->validation_score(epoch, net) : validation_mae(net, validation, scaling);
    if (!std::isfinite(score)) throw TrainingError("non-finite validation score at epoch " + std::to_string(epoch));
    report.validation_scores.push_back(score);
    report.epochs_run = epoch;
    const bool stop = stopper.update(score);
    if (hooks && hooks->on_epoch_end) hooks->on_epoch_end(epoch, net);
    if (stop) {
      net.load_state(previous);
      report.stopped_early = true;
      report.restored_epoch = epoch - 1;
      break;
    }
    previous = net.state();
    report.restored_epoch = epoch;
  }
  report.ema = stopper.ema();
  return result;
}

Prediction forward(ForecastNet& net, const FeatureWindow& window, ForwardMode mode, nn::Rng& rng,
                   const TargetScaling& scaling) {
  const WindowBatch batch = make_batch(std::span(&window, 1), scaling, net.shape().steps);
  const Matrix out = net.forward(batch, mode, rng);
  return {scaling.q_mean + scaling.q_std * out(0, 0), scaling.y_mean + scaling.y_std * out(1, 0)};
}

double order_free_mean(std::vector<double> values) {
  if (values.empty()) throw DataError("mean of zero values");
  std::sort(values.begin(), values.end());
  double m = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    ++k;
    m += (v - m) / static_cast<double>(k);
  }
  return m;
}

unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("QC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

EnsembleModel train_ensemble(const TrainConfig& config, std::span<const FeatureWindow> train,
                             std::span<const FeatureWindow> validation, const FeatureStats& stats, NetShape shape) {
  config.validate();
  const std::string id = stats.id();
  for (auto set : {train, validation})
    for (const auto& w : set)
      if (w.stats_id != id) throw DataError("training window was not standardized with the supplied stats");

  EnsembleModel model;
  model.stats = stats;
  model.stats_id = id;
  model.scaling = TargetScaling::fit(train);
  model.config = config;
  model.shape = shape;

  const auto members = static_cast<std::size_t>(config.ensemble_size);
  std::vector<std::optional<TrainedMember>> trained(members);
  std::vector<std::exception_ptr> errors(members);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < members; k = next++) {
      try {
        trained[k] = train_one(config, train, validation, model.scaling, config.seed + k, nullptr, shape);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(worker_threads(), static_cast<unsigned>(members));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (auto& t : trained) {
    model.members.push_back(std::move(t->net));
    model.reports.push_back(std::move(t->report));
  }
  return model;
}

std::vector<Prediction> predict(const EnsembleModel& model, std::span<const FeatureWindow> windows) {
  if (model.members.empty()) throw DataError("model has no members");
  for (const auto& w : windows)
    if (w.stats_id != model.stats_id)
      throw DataError("window for " + w.meta.firm_id + " was standardized with different feature stats");

  const std::size_t m = model.members.size();
  std::vector<std::vector<double>> q(windows.size()), y(windows.size());
  constexpr std::size_t kChunk = 4096;
  for (std::size_t k = 0; k < m; ++k) {
    ForecastNet net = model.members[k];
    for (std::size_t start = 0; start < windows.size(); start += kChunk) {
      const std::size_t len = std::min(kChunk, windows.size() - start);
      const Matrix out = net.forward(make_batch(windows.subspan(start, len), model.scaling, net.shape().steps));
      for (std::size_t j = 0; j < len; ++j) {
        q[start + j].push_back(model.scaling.q_mean + model.scaling.q_std * out(0, static_cast<Index>(j)));
        y[start + j].push_back(model.scaling.y_mean + model.scaling.y_std * out(1, static_cast<Index>(j)));
      }
    }
  }
  std::vector<Prediction> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i)
    out[i] = {order_free_mean(std::move(q[i])), order_free_mean(std::move(y[i]))};
  return out;
}

namespace {

json shape_json(const NetShape& s) {
  return {{"accounting", s.accounting}, {"gru1", s.gru1}, {"gru2", s.gru2}, {"market", s.market},
          {"dense1", s.dense1}, {"dense2", s.dense2}, {"outputs", s.outputs}, {"steps", s.steps}};
}

NetShape shape_from(const json& j) {
  NetShape s;
  s.accounting = j.at("accounting").get<Index>();
  s.gru1 = j.at("gru1").get<Index>();
  s.gru2 = j.at("gru2").get<Index>();
  s.market = j.at("market").get<Index>();
  s.dense1 = j.at("dense1").get<Index>();
  s.dense2 = j.at("dense2").get<Index>();
  s.outputs = j.at("outputs").get<Index>();
  s.steps = j.at("steps").get<Index>();
  return s;
}

json config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2}, {"epsilon", c.epsilon}, {"dropout", c.dropout},
          {"ema_lambda", c.ema_lambda}, {"ensemble_size", c.ensemble_size},
          {"max_epochs", c.max_epochs}, {"seed", c.seed}};
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.ema_lambda = j.at("ema_lambda").get<double>();
  c.ensemble_size = j.at("ensemble_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string member_file(std::size_t k) { return "member_" + std::to_string(k) + ".ckpt"; }

}  // namespace

void EnsembleModel::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json members_json = json::array();
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto tensors = members[k].state();
    nn::save_checkpoint((fs::path(dir) / member_file(k)).string(), tensors);
    json r = {{"file", member_file(k)}};
    if (k < reports.size()) {
      const auto& rep = reports[k];
      r["seed"] = rep.seed;
      r["epochs_run"] = rep.epochs_run;
      r["restored_epoch"] = rep.restored_epoch;
      r["stopped_early"] = rep.stopped_early;
      r["validation_scores"] = rep.validation_scores;
      r["ema"] = rep.ema;
    }
    members_json.push_back(r);
  }
  stats.save((fs::path(dir) / "feature_stats.json").string());
  json manifest = {{"format", "epsnet.model_bundle"},
                   {"version", kFormatVersion},
                   {"shape", shape_json(shape)},
                   {"config", config_json(config)},
                   {"dropout", members.empty() ? config.dropout : members.front().dropout_rate()},
                   {"target_scaling",
                    {{"q_mean", scaling.q_mean}, {"q_std", scaling.q_std}, {"y_mean", scaling.y_mean}, {"y_std", scaling.y_std}}},
                   {"stats_id", stats_id},
                   {"members", members_json}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw Error("cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

EnsembleModel EnsembleModel::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw FileError((fs::path(dir) / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
  try {
    if (manifest.at("format") != "epsnet.model_bundle") throw SchemaError("not a model bundle manifest");
    if (manifest.at("version").get<int>() != kFormatVersion)
      throw SchemaError("unsupported model bundle version " + manifest.at("version").dump());
    EnsembleModel model;
    model.shape = shape_from(manifest.at("shape"));
    model.config = config_from(manifest.at("config"));
    const auto& ts = manifest.at("target_scaling");
    model.scaling = {ts.at("q_mean").get<double>(), ts.at("q_std").get<double>(), ts.at("y_mean").get<double>(),
                     ts.at("y_std").get<double>()};
    model.stats_id = manifest.at("stats_id").get<std::string>();
    model.stats = FeatureStats::load((fs::path(dir) / "feature_stats.json").string());
    if (model.stats.id() != model.stats_id) throw SchemaError("feature_stats.json does not match the manifest");
    const double dropout = manifest.at("dropout").get<double>();
    for (const auto& m : manifest.at("members")) {
      ForecastNet net(model.shape, dropout);
      net.load_state(nn::load_checkpoint((fs::path(dir) / m.at("file").get<std::string>()).string()));
      model.members.push_back(std::move(net));
      StopReport rep;
      if (m.contains("seed")) {
        rep.seed = m.at("seed").get<std::uint64_t>();
        rep.epochs_run = m.at("epochs_run").get<int>();
        rep.restored_epoch = m.at("restored_epoch").get<int>();
        rep.stopped_early = m.at("stopped_early").get<bool>();
        rep.validation_scores = m.at("validation_scores").get<std::vector<double>>();
        rep.ema = m.at("ema").get<std::vector<double>>();
      }
      model.reports.push_back(std::move(rep));
    }
    if (model.members.empty()) throw SchemaError("model bundle has no members");
    return model;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace epsnet
