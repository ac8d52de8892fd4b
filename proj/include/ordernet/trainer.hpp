#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ordernet/dataset.hpp"
#include "ordernet/model.hpp"
#include "ordernet/optim.hpp"
#include "ordernet/rng.hpp"
#include "ordernet/tensor.hpp"

// Supervised teacher-forced training. Examples are grouped by set size so
// every batch is a dense [B,n,d] tensor; each step feeds the gold prefix,
// scores all n timesteps in parallel, and averages cross-entropy over the
// (batch, timestep) grid.

namespace ordernet {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int epochs = 10;
  std::uint64_t seed = 0;
  double clip_norm = 0;  // 0 disables gradient clipping

  void validate() const {
    if (epochs < 1) detail::fail("TrainConfig: epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1)
      detail::fail("TrainConfig: batch_size must be >= 1, got " + std::to_string(batch_size));
    if (!(learning_rate > 0)) detail::fail("TrainConfig: learning_rate must be positive");
    if (clip_norm < 0) detail::fail("TrainConfig: clip_norm must be >= 0");
  }
};

template <typename S>
struct Batch {
  Tensor<S> X;                            // [B, n, d]
  std::vector<std::vector<int>> targets;  // B gold orderings, each length n
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  double tf_accuracy = 0;
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double total_seconds = 0;
};

// Batches grouped by set size (ascending), shuffled within each group by a
// size-specific derived seed, partial tails kept.
template <typename S>
std::vector<Batch<S>> make_batches(const std::vector<OrderingExample>& data, int batch_size,
                                   std::uint64_t seed) {
  if (batch_size < 1) detail::fail("make_batches: batch_size must be >= 1");
  if (data.empty()) detail::fail("make_batches: empty dataset");
  const std::size_t d = data[0].x[0].size();
  std::map<int, std::vector<std::size_t>> by_size;
  for (std::size_t r = 0; r < data.size(); ++r) {
    validate_example(data[r], r);
    if (data[r].x[0].size() != d)
      detail::fail("make_batches: record " + std::to_string(r) + " has feature dimension " +
                   std::to_string(data[r].x[0].size()) + ", expected " + std::to_string(d));
    by_size[static_cast<int>(data[r].x.size())].push_back(r);
  }
  std::vector<Batch<S>> out;
  for (auto& [n, indices] : by_size) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
    rng.shuffle(indices);
    for (std::size_t off = 0; off < indices.size(); off += static_cast<std::size_t>(batch_size)) {
      const std::size_t B =
          std::min<std::size_t>(static_cast<std::size_t>(batch_size), indices.size() - off);
      std::vector<S> flat;
      flat.reserve(B * static_cast<std::size_t>(n) * d);
      Batch<S> batch;
      for (std::size_t b = 0; b < B; ++b) {
        const auto& ex = data[indices[off + b]];
        for (const auto& row : ex.x)
          for (double v : row) flat.push_back(static_cast<S>(v));
        batch.targets.push_back(ex.y);
      }
      batch.X = Tensor<S>::from_data({static_cast<int>(B), n, static_cast<int>(d)},
                                     std::move(flat));
      out.push_back(std::move(batch));
    }
  }
  return out;
}

struct StepStats {
  double loss = 0;
  long long correct = 0;
  long long total = 0;
};

template <typename S>
StepStats train_step(OrderNet<S>& model, const Batch<S>& batch, Adam<S>& opt,
                     double clip_norm = 0) {
  const int B = batch.X.dim(0), n = batch.X.dim(1);
  std::vector<std::vector<int>> prefixes;
  std::vector<int> flat_targets;
  prefixes.reserve(batch.targets.size());
  flat_targets.reserve(static_cast<std::size_t>(B) * n);
  for (const auto& y : batch.targets) {
    prefixes.emplace_back(y.begin(), y.end() - 1);
    flat_targets.insert(flat_targets.end(), y.begin(), y.end());
  }
  auto logits = model.forward_logits(batch.X, prefixes, true);  // [B, n, n]
  StepStats stats;
  const S* l = logits.data().data();
  for (int row = 0; row < B * n; ++row) {
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (l[static_cast<std::size_t>(row) * n + i] > l[static_cast<std::size_t>(row) * n + arg])
        arg = i;
    stats.correct += arg == flat_targets[static_cast<std::size_t>(row)];
  }
  stats.total = static_cast<long long>(B) * n;
  auto loss = masked_softmax_cross_entropy(logits, flat_targets);
  stats.loss = static_cast<double>(loss.item());
  if (!std::isfinite(stats.loss))
    detail::fail("train_step: non-finite loss " + std::to_string(stats.loss) + " at step " +
                 std::to_string(opt.step_count() + 1));
  backward(loss);
  if (clip_norm > 0) clip_grad_norm(model.params(), clip_norm);
  opt.step(model.params());
  return stats;
}

template <typename S>
TrainReport train(OrderNet<S>& model, const std::vector<OrderingExample>& data,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  Adam<S> opt(model.params(),
              AdamConfig<S>{static_cast<S>(cfg.learning_rate), static_cast<S>(cfg.beta1),
                            static_cast<S>(cfg.beta2), static_cast<S>(cfg.epsilon)});
  TrainReport report;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    auto batches =
        make_batches<S>(data, cfg.batch_size, derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0;
    long long correct = 0, total = 0;
    for (const auto& batch : batches) {
      auto stats = train_step(model, batch, opt, cfg.clip_norm);
      loss_sum += stats.loss * static_cast<double>(stats.total);
      correct += stats.correct;
      total += stats.total;
    }
    EpochStats es;
    es.epoch = epoch;
    es.mean_loss = loss_sum / static_cast<double>(total);
    es.tf_accuracy = static_cast<double>(correct) / static_cast<double>(total);
    es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(es);
    report.total_seconds += es.seconds;
    if (on_epoch) on_epoch(es);
  }
  return report;
}

inline std::string metrics_csv_header() { return "epoch,mean_loss,tf_accuracy,seconds\n"; }

inline std::string metrics_csv_row(const EpochStats& es) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.3f\n", es.epoch, es.mean_loss, es.tf_accuracy,
                es.seconds);
  return buf;
}

inline std::string metrics_csv(const TrainReport& report) {
  std::string out = metrics_csv_header();
  for (const auto& es : report.epochs) out += metrics_csv_row(es);
  return out;
}

}  // namespace ordernet
