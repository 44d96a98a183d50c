// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "snnfuse/config.hpp"
#include "snnfuse/dataset.hpp"
#include "snnfuse/encoding.hpp"
#include "snnfuse/loss.hpp"
#include "snnfuse/net.hpp"
#include "snnfuse/pipeline.hpp"

namespace snnfuse {

enum class ExecEngine { serial, fused, pipeline };

inline const char* to_string(ExecEngine e) {
  switch (e) {
    case ExecEngine::serial: return "serial";
    case ExecEngine::fused: return "fused";
    case ExecEngine::pipeline: return "pipeline";
  }
  return "?";
}

inline ExecEngine parse_engine(const std::string& s) {
  if (s == "serial") return ExecEngine::serial;
  if (s == "fused") return ExecEngine::fused;
  if (s == "pipeline") return ExecEngine::pipeline;
  throw std::invalid_argument("snnfuse: unknown engine '" + s + "'");
}

struct TrainConfig {
  float learning_rate = 1e-3f;
  std::size_t t_len = 32;
  std::size_t batch = 25;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;

  std::size_t hidden = 128;
  ExecEngine engine = ExecEngine::fused;
  /// Pipeline worker count; used only with ExecEngine::pipeline.
  std::size_t workers = 2;
  LifParams lif{};

  // Synthetic blob task, used when no dataset files are given.
  std::size_t width = 16;
  std::size_t classes = 2;
  std::size_t train_samples = 400;
  std::size_t test_samples = 100;
  double blob_spread = 0.15;
  std::string train_data;
  std::string test_data;

  void validate() const {
    if (!(learning_rate > 0.0f) || !std::isfinite(learning_rate)) {
      throw ConfigError(0, "learning_rate must be > 0");
    }
    if (t_len == 0 || batch == 0 || hidden == 0 || workers == 0 || width == 0 || classes < 2 ||
        train_samples == 0 || test_samples == 0) {
      throw ConfigError(0, "t_len, batch, hidden, workers, width, train/test samples must be >= 1 "
                           "and classes >= 2");
    }
    if (engine == ExecEngine::pipeline && workers > t_len) {
      throw ConfigError(0, "workers must not exceed t_len");
    }
    lif.validate();
  }
};

inline TrainConfig parse_train_config(const KeyValueConfig& kv) {
  static const std::set<std::string> known = {
      "learning_rate", "t_len",  "batch",   "epochs",        "seed",         "hidden",
      "engine",        "workers", "v_rest", "k_tau",         "tau",          "v_th",
      "alpha",         "surrogate", "width", "classes",      "train_samples", "test_samples",
      "blob_spread",   "train_data", "test_data"};
  for (const auto& [key, entry] : kv.entries()) {
    if (!known.count(key)) throw ConfigError(entry.line, "unknown key '" + key + "'");
  }
  auto line_of = [&](const std::string& k) {
    return kv.has(k) ? kv.entries().at(k).line : std::size_t{0};
  };
  TrainConfig c;
  c.learning_rate = kv.get("learning_rate", c.learning_rate);
  c.t_len = kv.get("t_len", c.t_len);
  c.batch = kv.get("batch", c.batch);
  c.epochs = kv.get("epochs", c.epochs);
  c.seed = kv.get("seed", c.seed);
  c.hidden = kv.get("hidden", c.hidden);
  if (kv.has("engine")) {
    try {
      c.engine = parse_engine(kv.get<std::string>("engine", ""));
    } catch (const std::invalid_argument&) {
      throw ConfigError(line_of("engine"), "engine must be serial, fused or pipeline");
    }
  }
  c.workers = kv.get("workers", c.workers);
  if (kv.has("tau") && kv.has("k_tau")) {
    throw ConfigError(line_of("tau"), "give either tau or k_tau, not both");
  }
  if (kv.has("tau")) {
    const double tau = kv.get("tau", 0.0);
    if (!(tau > 1.0)) throw ConfigError(line_of("tau"), "tau must be > 1");
    c.lif.k_tau = static_cast<float>(1.0 - 1.0 / tau);
  }
  c.lif.k_tau = kv.get("k_tau", c.lif.k_tau);
  c.lif.v_rest = kv.get("v_rest", c.lif.v_rest);
  c.lif.v_th = kv.get("v_th", c.lif.v_th);
  c.lif.alpha = kv.get("alpha", c.lif.alpha);
  if (kv.has("surrogate")) {
    const auto s = kv.get<std::string>("surrogate", "");
    if (s == "centered") c.lif.surrogate_arg = SurrogateArg::centered;
    else if (s == "literal") c.lif.surrogate_arg = SurrogateArg::literal;
    else throw ConfigError(line_of("surrogate"), "surrogate must be centered or literal");
  }
  c.width = kv.get("width", c.width);
  c.classes = kv.get("classes", c.classes);
  c.train_samples = kv.get("train_samples", c.train_samples);
  c.test_samples = kv.get("test_samples", c.test_samples);
  c.blob_spread = kv.get("blob_spread", c.blob_spread);
  c.train_data = kv.get<std::string>("train_data", "");
  c.test_data = kv.get<std::string>("test_data", "");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, e.what());
  }
  return c;
}

/// Runs the network on `x` with the chosen engine. Values never depend on it.
inline ForwardTrace run_forward(const SpikingNet& net, const TimeMajorTensor& x, ExecEngine engine,
                                std::size_t workers = 1) {
  switch (engine) {
    case ExecEngine::serial: return forward_pass(net, x, LifEngine::serial);
    case ExecEngine::fused: return forward_pass(net, x, LifEngine::fused);
    case ExecEngine::pipeline:
      return pipeline_forward(net, x, PipelinePlan::even(x.t_len(), std::min(workers, x.t_len())))
          .trace;
  }
  throw std::logic_error("snnfuse: bad engine");
}

inline NetGrads run_backward(const SpikingNet& net, const ForwardTrace& tr,
                             const TimeMajorTensor& g_y, ExecEngine engine,
                             std::size_t workers = 1) {
  switch (engine) {
    case ExecEngine::serial: return backward_pass(net, tr, g_y, LifEngine::serial);
    case ExecEngine::fused: return backward_pass(net, tr, g_y, LifEngine::fused);
    case ExecEngine::pipeline:
      return pipeline_backward(net, tr, g_y,
                               PipelinePlan::even(g_y.t_len(), std::min(workers, g_y.t_len())))
          .grads;
  }
  throw std::logic_error("snnfuse: bad engine");
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  /// Wall time of the epoch (training plus evaluation).
  double wall_s = 0.0;

  /// Equality of everything but the timing.
  bool same_values(const EpochMetrics& o) const {
    return epoch == o.epoch && train_loss == o.train_loss && train_acc == o.train_acc &&
           test_acc == o.test_acc;
  }
};

struct TrainSummary {
  double best_acc = 0.0;
  double train_time_s = 0.0;
  double test_time_s = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  TrainSummary summary;
  /// Test accuracy of the untrained network.
  double initial_test_acc = 0.0;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::size_t count_correct(const std::vector<std::uint32_t>& pred,
                                 const std::vector<std::uint32_t>& labels) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) n += pred[i] == labels[i] ? 1 : 0;
  return n;
}

// Stream tags for derive_seed.
constexpr std::uint64_t kShuffleStream = 0x5f0f;
constexpr std::uint64_t kTrainSpikeStream = 0x7a1e;
constexpr std::uint64_t kTestSpikeStream = 0x7e57;

}  // namespace detail

/// One pass over `data` in a seeded random order with one Adam step per
/// mini-batch (the last batch may be short). Input spikes are re-drawn every
/// epoch from per-sample streams.
inline EpochStats train_epoch(SpikingNet& net, const Dataset& data, const TrainConfig& cfg,
                              std::size_t epoch) {
  std::vector<std::uint64_t> order(data.size());
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  Rng shuffle(derive_seed(cfg.seed, {detail::kShuffleStream, epoch}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

  const std::uint64_t spike_seed = derive_seed(cfg.seed, {detail::kTrainSpikeStream, epoch});
  const AdamConfig adam{cfg.learning_rate};
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch) {
    const std::size_t hi = std::min(order.size(), lo + cfg.batch);
    const std::span<const std::uint64_t> ids(order.data() + lo, hi - lo);
    const auto x = poisson_encode_samples(data.gather(ids), data.width, ids, cfg.t_len, spike_seed);
    const auto labels = data.gather_labels(ids);
    const auto tr = run_forward(net, x, cfg.engine, cfg.workers);
    const auto loss = rate_cross_entropy(tr.output(), labels);
    loss_sum += loss.loss * static_cast<double>(ids.size());
    correct += detail::count_correct(rate_predictions(tr.output()), labels);
    apply_adam(net, run_backward(net, tr, loss.g_y, cfg.engine, cfg.workers), adam);
  }
  const double n = static_cast<double>(data.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

/// Fraction of correctly classified samples; spikes come from a fixed stream.
inline double evaluate(const SpikingNet& net, const Dataset& data, const TrainConfig& cfg) {
  const std::uint64_t spike_seed = derive_seed(cfg.seed, {detail::kTestSpikeStream});
  std::size_t correct = 0;
  std::vector<std::uint64_t> ids;
  for (std::size_t lo = 0; lo < data.size(); lo += cfg.batch) {
    const std::size_t hi = std::min(data.size(), lo + cfg.batch);
    ids.resize(hi - lo);
    std::iota(ids.begin(), ids.end(), std::uint64_t{lo});
    const auto x = poisson_encode_samples(data.gather(ids), data.width, ids, cfg.t_len, spike_seed);
    const auto tr = run_forward(net, x, cfg.engine, cfg.workers);
    correct += detail::count_correct(rate_predictions(tr.output()), data.gather_labels(ids));
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Datasets named by the config, or the synthetic blob task.
inline std::pair<Dataset, Dataset> load_task(const TrainConfig& cfg) {
  if (!cfg.train_data.empty() || !cfg.test_data.empty()) {
    if (cfg.train_data.empty() || cfg.test_data.empty()) {
      throw ConfigError(0, "train_data and test_data must be given together");
    }
    auto train = load_dataset(cfg.train_data);
    auto test = load_dataset(cfg.test_data);
    if (train.width != test.width || train.classes != test.classes) {
      throw std::invalid_argument("snnfuse: train and test datasets disagree on width or classes");
    }
    return {std::move(train), std::move(test)};
  }
  const BlobSpec train{cfg.train_samples, cfg.width, cfg.classes, cfg.blob_spread};
  const BlobSpec test{cfg.test_samples, cfg.width, cfg.classes, cfg.blob_spread};
  return {make_blobs(train, cfg.seed, derive_seed(cfg.seed, {1})),
          make_blobs(test, cfg.seed, derive_seed(cfg.seed, {2}))};
}

/// Reference network for a task: input -> hidden LIF -> classes LIF.
inline SpikingNet reference_mlp(const TrainConfig& cfg, std::size_t width, std::size_t classes) {
  return SpikingNet::mlp({width, cfg.hidden, classes}, cfg.lif, cfg.seed);
}

/// Full run. `on_epoch` sees each record as soon as it exists. With
/// epochs == 0 only the untrained network is evaluated.
inline TrainReport run_training(const TrainConfig& cfg,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  const auto [train, test] = load_task(cfg);
  SpikingNet net = reference_mlp(cfg, train.width, train.classes);

  TrainReport report;
  auto t0 = std::chrono::steady_clock::now();
  report.initial_test_acc = evaluate(net, test, cfg);
  report.summary.test_time_s += detail::seconds_since(t0);
  report.summary.best_acc = cfg.epochs == 0 ? report.initial_test_acc : 0.0;

  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const auto stats = train_epoch(net, train, cfg, e);
    const double train_s = detail::seconds_since(epoch_start);
    const auto test_start = std::chrono::steady_clock::now();
    const double acc = evaluate(net, test, cfg);
    const double test_s = detail::seconds_since(test_start);
    report.summary.train_time_s += train_s;
    report.summary.test_time_s += test_s;
    report.summary.best_acc = std::max(report.summary.best_acc, acc);
    EpochMetrics m{e, stats.loss, stats.accuracy, acc, detail::seconds_since(epoch_start)};
    report.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return report;
}

}  // namespace snnfuse
