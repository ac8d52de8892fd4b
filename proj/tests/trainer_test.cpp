#include "ordernet/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ordernet/checkpoint.hpp"
#include "ordernet/rng.hpp"
#include "ordernet/tsp.hpp"

using namespace ordernet;

namespace {

OrderingExample tsp_example(int n, std::uint64_t seed) {
  auto inst = tsp::generate_instance(n, seed);
  OrderingExample ex;
  for (const auto& p : inst.points) ex.x.push_back({p.x, p.y});
  auto tour = tsp::held_karp(inst);
  ex.y = tsp::canonicalize_tour(inst, tour.order);
  ex.meta = {{"seed", static_cast<std::int64_t>(seed)}, {"solver", "held-karp"}};
  return ex;
}

std::vector<OrderingExample> mixed_dataset() {
  std::vector<OrderingExample> data;
  for (std::uint64_t s = 0; s < 10; ++s) data.push_back(tsp_example(5, 100 + s));
  for (std::uint64_t s = 0; s < 7; ++s) data.push_back(tsp_example(6, 200 + s));
  return data;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.encoder_blocks = 2;
  cfg.encoder_layer1_depth = 32;
  cfg.encoder_layer2_depth = 8;
  cfg.decoder_blocks = 2;
  cfg.decoder_depth = 8;
  return cfg;
}

}  // namespace

TEST(MakeBatches, GroupsBySizeWithPartialTails) {
  auto batches = make_batches<float>(mixed_dataset(), 4, 1);
  ASSERT_EQ(batches.size(), 5u);
  EXPECT_EQ(batches[0].X.shape(), (std::vector<int>{4, 5, 2}));
  EXPECT_EQ(batches[1].X.shape(), (std::vector<int>{4, 5, 2}));
  EXPECT_EQ(batches[2].X.shape(), (std::vector<int>{2, 5, 2}));
  EXPECT_EQ(batches[3].X.shape(), (std::vector<int>{4, 6, 2}));
  EXPECT_EQ(batches[4].X.shape(), (std::vector<int>{3, 6, 2}));
}

TEST(MakeBatches, EveryRecordAppearsExactlyOnce) {
  auto data = mixed_dataset();
  auto batches = make_batches<float>(data, 4, 7);
  std::multiset<std::int64_t> seen;
  for (const auto& b : batches) {
    const int n = b.X.dim(1);
    for (std::size_t r = 0; r < b.targets.size(); ++r) {
      // recover the record by matching its first feature row
      const float x0 = b.X.data()[r * static_cast<std::size_t>(n) * 2];
      for (const auto& ex : data)
        if (static_cast<int>(ex.x.size()) == n && static_cast<float>(ex.x[0][0]) == x0)
          seen.insert(ex.meta.at("seed").get<std::int64_t>());
    }
  }
  EXPECT_EQ(seen.size(), data.size());
  for (const auto& ex : data)
    EXPECT_EQ(seen.count(ex.meta.at("seed").get<std::int64_t>()), 1u);
}

TEST(MakeBatches, SeedControlsComposition) {
  auto data = mixed_dataset();
  auto a = make_batches<float>(data, 4, 42);
  auto b = make_batches<float>(data, 4, 42);
  auto c = make_batches<float>(data, 4, 43);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].X.data(), b[i].X.data());
    EXPECT_EQ(a[i].targets, b[i].targets);
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].targets != c[i].targets) differs = true;
  EXPECT_TRUE(differs);
}

TEST(MakeBatches, RejectsMixedFeatureDimensions) {
  auto data = mixed_dataset();
  data.push_back(data[0]);
  data.back().x[0] = {0.1, 0.2, 0.3};
  data.back().x[1].resize(3, 0.0);
  data.back().x[2].resize(3, 0.0);
  data.back().x[3].resize(3, 0.0);
  data.back().x[4].resize(3, 0.0);
  EXPECT_THROW(make_batches<float>(data, 4, 1), ContractError);
}

TEST(TrainStep, InitialLossNearUniformEntropy) {
  OrderNet<float> model(small_config(), 11);
  std::vector<OrderingExample> data;
  for (std::uint64_t s = 0; s < 16; ++s) data.push_back(tsp_example(6, 300 + s));
  auto batches = make_batches<float>(data, 16, 1);
  Adam<float> opt(model.params());
  auto stats = train_step(model, batches[0], opt);
  EXPECT_NEAR(stats.loss, std::log(6.0), 0.2);
}

TEST(TrainStep, MemorizesTenInstances) {
  OrderNet<float> model(small_config(), 21);
  std::vector<OrderingExample> data;
  for (std::uint64_t s = 0; s < 10; ++s) data.push_back(tsp_example(5, 400 + s));
  auto batches = make_batches<float>(data, 10, 1);
  ASSERT_EQ(batches.size(), 1u);
  Adam<float> opt(model.params());
  StepStats last;
  for (int step = 0; step < 300; ++step) last = train_step(model, batches[0], opt);
  EXPECT_EQ(last.correct, last.total) << "teacher-forced accuracy "
                                      << static_cast<double>(last.correct) / last.total
                                      << " after 300 steps, loss " << last.loss;
}

TEST(TrainStep, DeterministicLossTrajectory) {
  std::vector<OrderingExample> data;
  for (std::uint64_t s = 0; s < 8; ++s) data.push_back(tsp_example(5, 500 + s));
  std::vector<double> curve_a, curve_b;
  for (auto* curve : {&curve_a, &curve_b}) {
    OrderNet<float> model(small_config(), 31);
    auto batches = make_batches<float>(data, 8, 2);
    Adam<float> opt(model.params());
    for (int step = 0; step < 5; ++step)
      curve->push_back(train_step(model, batches[0], opt).loss);
  }
  EXPECT_EQ(curve_a, curve_b);
}

TEST(TrainStep, GoldChoicesAfterTDoNotAffectLossAtT) {
  // teacher forcing must not leak: swapping the tail of the gold ordering
  // leaves train-mode logits at earlier timesteps bit-identical
  OrderNet<float> model(small_config(), 41);
  auto ex = tsp_example(6, 600);
  std::vector<std::vector<int>> pre_a{{ex.y.begin(), ex.y.end() - 1}};
  auto y2 = ex.y;
  std::swap(y2[4], y2[5]);  // differs only at positions 4 and 5
  std::vector<std::vector<int>> pre_b{{y2.begin(), y2.end() - 1}};
  std::vector<float> flat;
  for (const auto& row : ex.x)
    for (double v : row) flat.push_back(static_cast<float>(v));
  auto X = Tensor<float>::from_data({1, 6, 2}, flat);
  NoGradGuard ng;
  auto la = model.forward_logits(X, pre_a, true);
  auto lb = model.forward_logits(X, pre_b, true);
  for (int t = 0; t <= 4; ++t)
    for (int i = 0; i < 6; ++i)
      ASSERT_EQ(la.data()[t * 6 + i], lb.data()[t * 6 + i]) << "t=" << t << " i=" << i;
}

TEST(TrainStep, AbortsOnNonFiniteLoss) {
  OrderNet<float> model(small_config(), 51);
  model.params().at("head.bias").data()[0] = std::numeric_limits<float>::quiet_NaN();
  std::vector<OrderingExample> data{tsp_example(5, 700), tsp_example(5, 701)};
  auto batches = make_batches<float>(data, 2, 1);
  Adam<float> opt(model.params());
  EXPECT_THROW(train_step(model, batches[0], opt), ContractError);
}

TEST(Train, LossFallsAndReportIsComplete) {
  OrderNet<float> model(small_config(), 61);
  std::vector<OrderingExample> data;
  for (std::uint64_t s = 0; s < 48; ++s) data.push_back(tsp_example(5, 800 + s));
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 6;
  cfg.seed = 9;
  auto report = train(model, data, cfg);
  ASSERT_EQ(report.epochs.size(), 6u);
  for (const auto& es : report.epochs) {
    EXPECT_TRUE(std::isfinite(es.mean_loss));
    EXPECT_GE(es.mean_loss, 0.0);
    EXPECT_GE(es.tf_accuracy, 0.0);
    EXPECT_LE(es.tf_accuracy, 1.0);
  }
  EXPECT_LT(report.epochs.back().mean_loss, report.epochs.front().mean_loss);
  auto csv = metrics_csv(report);
  EXPECT_EQ(csv.rfind("epoch,mean_loss,tf_accuracy,seconds\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Train, CheckpointRoundTripKeepsEvalLoss) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ordernet_trainer_ckpt.onet").string();
  OrderNet<float> model(small_config(), 71);
  std::vector<OrderingExample> data;
  for (std::uint64_t s = 0; s < 16; ++s) data.push_back(tsp_example(5, 900 + s));
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  train(model, data, cfg);
  save_checkpoint(path, model);
  auto loaded = load_checkpoint<float>(path);

  auto batches = make_batches<float>(data, 16, 3);
  auto eval_loss = [&](OrderNet<float>& m) {
    NoGradGuard ng;
    const auto& b = batches[0];
    std::vector<std::vector<int>> prefixes;
    std::vector<int> targets;
    for (const auto& y : b.targets) {
      prefixes.emplace_back(y.begin(), y.end() - 1);
      targets.insert(targets.end(), y.begin(), y.end());
    }
    return masked_softmax_cross_entropy(m.forward_logits(b.X, prefixes, false), targets).item();
  };
  EXPECT_EQ(eval_loss(model), eval_loss(loaded));
  std::filesystem::remove(path);
}
