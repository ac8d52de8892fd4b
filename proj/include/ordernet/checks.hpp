#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ordernet/model.hpp"
#include "ordernet/rng.hpp"
#include "ordernet/tensor.hpp"
#include "ordernet/tsp.hpp"

// Self-contained property suites over throwaway models and instances.
// Shared between the `check` CLI subcommand and the acceptance runner so
// both report the same numbers.

namespace ordernet::checks {

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_deviation = 0;
  std::string detail;
};

inline std::string format_deviation(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// held_karp against the factorial enumeration oracle
inline CheckResult check_oracles(std::uint64_t seed, int instances = 200) {
  SplitMix64 rng(derive_seed(seed, 0xACE));
  CheckResult result{"oracles", true, 0, ""};
  for (int i = 0; i < instances; ++i) {
    const int n = 4 + static_cast<int>(rng.next_below(6));  // 4..9
    auto inst = tsp::generate_instance(n, rng.next_u64());
    const double exact = tsp::brute_force(inst).length;
    const double dp = tsp::held_karp(inst).length;
    result.max_deviation = std::max(result.max_deviation, std::abs(dp - exact));
  }
  result.pass = result.max_deviation <= 1e-9;
  result.detail = std::to_string(instances) + " instances n in [4,9], max |held_karp - brute_force| = " +
                  format_deviation(result.max_deviation);
  return result;
}

// approximation ratio of christofides against the exact optimum
inline CheckResult check_christofides(std::uint64_t seed, int instances = 100) {
  SplitMix64 rng(derive_seed(seed, 0xC4F));
  CheckResult result{"christofides", true, 0, ""};
  double min_ratio = 1e300, max_ratio = 0;
  for (int i = 0; i < instances; ++i) {
    const int n = 5 + static_cast<int>(rng.next_below(8));  // 5..12
    auto inst = tsp::generate_instance(n, rng.next_u64());
    const double exact = tsp::held_karp(inst).length;
    const double heur = tsp::christofides(inst).length;
    const double ratio = heur / exact;
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
  }
  result.max_deviation = max_ratio;
  result.pass = min_ratio >= 1.0 - 1e-9 && max_ratio <= 1.5 + 1e-9;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d instances n in [5,12], ratio range [%.6f, %.6f] within [1.0, 1.5]",
                instances, min_ratio, max_ratio);
  result.detail = buf;
  return result;
}

namespace detail {

inline ordernet::Tensor<float> random_set(int n, SplitMix64& rng, int d = 2) {
  std::vector<float> flat(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
  for (auto& v : flat) v = static_cast<float>(rng.next_double());
  return ordernet::Tensor<float>::from_data({1, n, d}, std::move(flat));
}

}  // namespace detail

// encoder and end-to-end logits commute with input permutations
inline CheckResult check_equivariance(std::uint64_t seed, int trials = 50) {
  OrderNet<float> model(ModelConfig::tsp_default(), derive_seed(seed, 0xE9));
  SplitMix64 rng(derive_seed(seed, 0xE10));
  CheckResult result{"equivariance", true, 0, ""};
  NoGradGuard frozen;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_below(8));  // 3..10
    auto X = detail::random_set(n, rng);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);  // element i moves to position perm[i]
    std::vector<float> permuted(X.numel());
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c)
        permuted[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 2 + c] =
            X.data()[static_cast<std::size_t>(i) * 2 + c];
    auto Xp = Tensor<float>::from_data({1, n, 2}, std::move(permuted));

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<int> prefix(order.begin(), order.end() - 1);
    std::vector<int> relabeled(prefix.size());
    for (std::size_t q = 0; q < prefix.size(); ++q)
      relabeled[q] = perm[static_cast<std::size_t>(prefix[q])];

    const bool train = trial % 2 == 0;
    auto enc = model.encode(X, train);
    auto encp = model.encode(Xp, train);
    const int dp = model.config().encoded_dim();
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < dp; ++c) {
        const double a = enc.data()[static_cast<std::size_t>(i) * dp + c];
        const double b =
            encp.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * dp + c];
        result.max_deviation = std::max(result.max_deviation, std::abs(a - b));
      }
    auto lg = model.decode_logits(model.build_source_target(enc, {prefix}), train);
    auto lgp = model.decode_logits(model.build_source_target(encp, {relabeled}), train);
    for (int t = 0; t < n; ++t)
      for (int i = 0; i < n; ++i) {
        const double a = lg.data()[static_cast<std::size_t>(t) * n + i];
        const double b = lgp.data()[static_cast<std::size_t>(t) * n +
                                    perm[static_cast<std::size_t>(i)]];
        result.max_deviation = std::max(result.max_deviation, std::abs(a - b));
      }
  }
  result.pass = result.max_deviation <= 1e-5;
  result.detail = std::to_string(trials) + " permutations n in [3,10], train+eval modes, max deviation = " +
                  format_deviation(result.max_deviation) + " (tolerance 1e-5)";
  return result;
}

// logits at step t are bit-identical when anything at later columns changes:
// both under direct corruption of later source-target columns and under
// swapped gold choices after t
inline CheckResult check_causality(std::uint64_t seed, int trials = 50) {
  OrderNet<float> model(ModelConfig::tsp_default(), derive_seed(seed, 0xCA));
  SplitMix64 rng(derive_seed(seed, 0xCB));
  CheckResult result{"causality", true, 0, ""};
  NoGradGuard frozen;
  long long mismatches = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 4 + static_cast<int>(rng.next_below(7));  // 4..10
    auto X = detail::random_set(n, rng);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<int> prefix(order.begin(), order.end() - 1);
    const bool train = trial % 2 == 0;
    const int t0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - 1)));

    auto enc = model.encode(X, train);
    auto st = model.build_source_target(enc, {prefix});
    auto base = model.decode_logits(st, train);

    auto corrupted = st;
    corrupted.tensor = Tensor<float>::from_data(st.tensor.shape(), st.tensor.data());
    const int C = 2 * model.config().encoded_dim();
    for (int i = 0; i < n; ++i)
      for (int t = t0 + 1; t < n; ++t)
        for (int c = 0; c < C; ++c)
          corrupted.tensor.data()[((static_cast<std::size_t>(i)) * n + t) * C + c] +=
              static_cast<float>(rng.next_double()) + 0.25f;
    auto poked = model.decode_logits(corrupted, train);

    auto swapped = prefix;
    if (t0 + 1 < static_cast<int>(prefix.size()))
      std::swap(swapped[static_cast<std::size_t>(t0)],
                swapped[static_cast<std::size_t>(t0) + 1]);
    else
      std::swap(swapped[static_cast<std::size_t>(t0)], order[static_cast<std::size_t>(n - 1)]);
    auto regold = model.decode_logits(model.build_source_target(enc, {swapped}), train);

    for (int t = 0; t <= t0; ++t)
      for (int i = 0; i < n; ++i) {
        const float a = base.data()[static_cast<std::size_t>(t) * n + i];
        mismatches += a != poked.data()[static_cast<std::size_t>(t) * n + i];
        mismatches += a != regold.data()[static_cast<std::size_t>(t) * n + i];
      }
  }
  result.max_deviation = static_cast<double>(mismatches);
  result.pass = mismatches == 0;
  result.detail = std::to_string(trials) + " trials, " + std::to_string(mismatches) +
                  " non-identical logit bits at steps <= t under perturbation after t";
  return result;
}

// full-model finite-difference gradient check in 64-bit
inline CheckResult check_gradcheck(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.encoder_blocks = 1;
  cfg.encoder_layer1_depth = 128;
  cfg.encoder_layer2_depth = 16;
  cfg.decoder_blocks = 1;
  cfg.decoder_depth = 16;
  OrderNet<double> model(cfg, derive_seed(seed, 0x6C));
  SplitMix64 rng(derive_seed(seed, 0x6D));
  // Jitter every parameter off its initial value. Fresh biases are exactly
  // zero, and masked decoder cells whose whole receptive field is masked get
  // preactivation == bias, which would park them on the ReLU corner where
  // central differences and the one-sided backward slope legitimately differ.
  for (auto& [name, t] : model.params().items())
    for (auto& w : t.data()) w += 0.05 * rng.next_gaussian();
  std::vector<double> flat(8);
  for (auto& v : flat) v = rng.next_double();
  auto X = Tensor<double>::from_data({1, 4, 2}, std::move(flat));
  std::vector<int> order{2, 0, 3, 1};
  std::vector<std::vector<int>> prefixes{{2, 0, 3}};

  auto loss_fn = [&] {
    auto logits = model.forward_logits(X, prefixes, true);
    return masked_softmax_cross_entropy(logits, order);
  };
  auto loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> grads;
  for (auto& [name, t] : model.params().items()) {
    grads.push_back(t.grad());
    t.node()->grad.clear();
  }

  CheckResult result{"gradcheck", true, 0, ""};
  const double h = 1e-5;
  NoGradGuard frozen;
  long long params_checked = 0;
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    auto& tensor = model.params().items()[p].second;
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      double& w = tensor.data()[i];
      const double keep = w;
      w = keep + h;
      const double up = loss_fn().item();
      w = keep - h;
      const double down = loss_fn().item();
      w = keep;
      const double fd = (up - down) / (2 * h);
      const double an = grads[p][i];
      // near-zero pairs (a parameter the loss barely sees) sit at the 64-bit
      // noise floor of the difference quotient; absolute agreement covers them
      if (std::abs(an - fd) <= 1e-8) {
        ++params_checked;
        continue;
      }
      const double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
      result.max_deviation = std::max(result.max_deviation, rel);
      ++params_checked;
    }
  }
  result.pass = result.max_deviation <= 1e-4;
  result.detail = std::to_string(params_checked) +
                  " parameters on a 4-element set, max relative error = " +
                  format_deviation(result.max_deviation) + " (tolerance 1e-4)";
  return result;
}

// closed-form counts against the published model sizes
inline CheckResult check_params() {
  const long long tsp = parameter_count(ModelConfig::tsp_default());
  const long long word = parameter_count(ModelConfig::word_order_default());
  OrderNet<float> tsp_model(ModelConfig::tsp_default(), 1);
  const bool store_matches =
      static_cast<long long>(tsp_model.params().total_scalars()) == tsp;
  const double tsp_dev = std::abs(static_cast<double>(tsp) - 73000.0) / 73000.0;
  const double word_dev = std::abs(static_cast<double>(word) - 1400000.0) / 1400000.0;
  CheckResult result{"params", true, std::max(tsp_dev, word_dev), ""};
  result.pass = store_matches && tsp_dev <= 0.03 && word_dev <= 0.03;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "tour config %lld (%.2f%% from 73000), word config %lld (%.2f%% from 1400000), tolerance 3%%",
                tsp, 100 * tsp_dev, word, 100 * word_dev);
  result.detail = buf;
  return result;
}

}  // namespace ordernet::checks
