#include "ordernet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ordernet/model.hpp"
#include "ordernet/rng.hpp"

using namespace ordernet;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.encoder_blocks = 1;
  cfg.encoder_layer1_depth = 6;
  cfg.encoder_layer2_depth = 3;
  cfg.decoder_blocks = 1;
  cfg.decoder_depth = 3;
  return cfg;
}

Tensor<float> random_instance(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<float> flat(static_cast<std::size_t>(n) * 2);
  for (auto& v : flat) v = static_cast<float>(rng.next_double());
  return Tensor<float>::from_data({1, n, 2}, std::move(flat));
}

bool is_permutation_of_n(const std::vector<int>& order, int n) {
  if (static_cast<int>(order.size()) != n) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int idx : order) {
    if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)]) return false;
    seen[static_cast<std::size_t>(idx)] = 1;
  }
  return true;
}

}  // namespace

TEST(BeamSearch, ExhaustiveOracleOnFiveElements) {
  OrderNet<float> model(tiny_config(), 314);
  auto X = random_instance(5, 315);
  // a beam wider than 5! explores every permutation, so the result must be
  // the global argmax of the model's sequence log probability
  auto beamed = beam_search(model, X, 200);
  std::vector<int> perm(5);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best;
  double best_score = -1e300;
  do {
    const double s = score_sequence(model, X, perm);
    if (s > best_score + 1e-12 || (std::abs(s - best_score) <= 1e-12 && perm < best)) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(beamed.order, best);
  EXPECT_NEAR(beamed.log_prob, best_score, 1e-9);
}

TEST(BeamSearch, BeamOneEqualsGreedy) {
  OrderNet<float> model(tiny_config(), 41);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto X = random_instance(4 + static_cast<int>(seed % 4), 100 + seed);
    auto g = greedy_decode(model, X);
    auto b = beam_search(model, X, 1);
    EXPECT_EQ(g.order, b.order);
    EXPECT_NEAR(g.log_prob, b.log_prob, 1e-12);
  }
}

TEST(BeamSearch, WiderBeamNeverScoresWorse) {
  OrderNet<float> model(tiny_config(), 51);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto X = random_instance(6, 200 + seed);
    auto b1 = beam_search(model, X, 1);
    auto b5 = beam_search(model, X, 5);
    EXPECT_GE(b5.log_prob, b1.log_prob - 1e-12);
  }
}

TEST(BeamSearch, RejectsNonPositiveBeam) {
  OrderNet<float> model(tiny_config(), 3);
  auto X = random_instance(4, 4);
  EXPECT_THROW(beam_search(model, X, 0), ContractError);
}

TEST(Decode, AlwaysAValidPermutation) {
  OrderNet<float> model(tiny_config(), 61);
  for (int n : {2, 3, 17, 50, 100}) {
    auto X = random_instance(n, static_cast<std::uint64_t>(n) * 7919);
    auto g = greedy_decode(model, X);
    EXPECT_TRUE(is_permutation_of_n(g.order, n)) << "greedy n=" << n;
    EXPECT_LE(g.log_prob, 1e-12);
    if (n <= 17) {
      auto b = beam_search(model, X, 3);
      EXPECT_TRUE(is_permutation_of_n(b.order, n)) << "beam n=" << n;
    }
  }
}

TEST(Decode, ReportedLogProbMatchesRescoring) {
  OrderNet<float> model(tiny_config(), 71);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto X = random_instance(7, 300 + seed);
    auto g = greedy_decode(model, X);
    EXPECT_NEAR(score_sequence(model, X, g.order), g.log_prob, 1e-5);
    auto b = beam_search(model, X, 4);
    EXPECT_NEAR(score_sequence(model, X, b.order), b.log_prob, 1e-5);
  }
}

TEST(Decode, DeterministicAcrossCalls) {
  OrderNet<float> model(tiny_config(), 81);
  auto X = random_instance(8, 82);
  auto a = beam_search(model, X, 5);
  auto b = beam_search(model, X, 5);
  EXPECT_EQ(a.order, b.order);
  EXPECT_EQ(a.log_prob, b.log_prob);
}

TEST(Decode, IdenticalElementsFallBackToIndexOrder) {
  OrderNet<float> model(tiny_config(), 91);
  std::vector<float> flat;
  for (int i = 0; i < 5; ++i) {
    flat.push_back(0.3f);
    flat.push_back(0.7f);
  }
  auto X = Tensor<float>::from_data({1, 5, 2}, flat);
  // all elements identical -> every unvisited logit ties -> lowest index wins
  auto g = greedy_decode(model, X);
  EXPECT_EQ(g.order, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Decode, TwoElementSets) {
  OrderNet<float> model(tiny_config(), 95);
  auto X = random_instance(2, 96);
  auto g = greedy_decode(model, X);
  EXPECT_TRUE(is_permutation_of_n(g.order, 2));
  auto b = beam_search(model, X, 2);
  EXPECT_GE(b.log_prob, g.log_prob - 1e-12);
}

TEST(Decode, RequiresSingleInstanceBatch) {
  OrderNet<float> model(tiny_config(), 97);
  EXPECT_THROW(greedy_decode(model, Tensor<float>::zeros({2, 4, 2})), ContractError);
  EXPECT_THROW(score_sequence(model, Tensor<float>::zeros({1, 4, 2}), {0, 1}), ContractError);
}
