#include "ordernet/model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ordernet/rng.hpp"
#include "test_support.hpp"

using namespace ordernet;

namespace {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Plain-loop reference forward. Deliberately written as direct nested loops
// against the layer definitions, sharing no code with the engine, so the
// two paths can check each other.
// ---------------------------------------------------------------------------

Vec param(OrderNet<double>& m, const std::string& name) { return m.params().at(name).data(); }

// channels-last batch norm over every leading position, one statistic per
// trailing-group element; group_size is the number of trailing elements that
// keep distinct statistics (C for per-channel, T*C for per-(t,c)).
void ref_bn(Vec& a, int group_size, const Vec& scale, const Vec& shift) {
  const int C = static_cast<int>(scale.size());
  const int rows = static_cast<int>(a.size()) / group_size;
  for (int g = 0; g < group_size; ++g) {
    double s = 0, ss = 0;
    for (int r = 0; r < rows; ++r) {
      const double v = a[static_cast<std::size_t>(r) * group_size + g];
      s += v;
      ss += v * v;
    }
    const double mean = s / rows;
    double var = ss / rows - mean * mean;
    if (var < 0) var = 0;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int r = 0; r < rows; ++r) {
      double& v = a[static_cast<std::size_t>(r) * group_size + g];
      v = scale[static_cast<std::size_t>(g % C)] * (v - mean) * inv +
          shift[static_cast<std::size_t>(g % C)];
    }
  }
}

// X: [B][n][d]; returns [B][n][encoded_dim]
std::vector<std::vector<Vec>> ref_encode(const ModelConfig& cfg, OrderNet<double>& m,
                                         std::vector<std::vector<Vec>> cur) {
  const int B = static_cast<int>(cur.size());
  const int n = static_cast<int>(cur[0].size());
  for (int k = 0; k < cfg.encoder_blocks; ++k) {
    const std::string p = "encoder.block" + std::to_string(k) + ".";
    const int D = static_cast<int>(cur[0][0].size());
    const int L1 = cfg.encoder_layer1_depth, L2 = cfg.encoder_layer2_depth;
    const Vec w1 = param(m, p + "conv1.weight"), b1 = param(m, p + "conv1.bias");
    const Vec s1 = param(m, p + "bn1.scale"), h1 = param(m, p + "bn1.shift");
    const Vec w2 = param(m, p + "conv2.weight"), b2 = param(m, p + "conv2.bias");
    const Vec s2 = param(m, p + "bn2.scale"), h2 = param(m, p + "bn2.shift");

    Vec a1(static_cast<std::size_t>(B) * n * n * L1);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int c = 0; c < L1; ++c) {
            double acc = b1[static_cast<std::size_t>(c)];
            for (int t = 0; t < D; ++t)
              acc += cur[b][i][t] * w1[static_cast<std::size_t>(t) * L1 + c];
            for (int t = 0; t < D; ++t)
              acc += cur[b][j][t] * w1[static_cast<std::size_t>(D + t) * L1 + c];
            a1[((static_cast<std::size_t>(b) * n + i) * n + j) * L1 + c] = std::max(acc, 0.0);
          }
    ref_bn(a1, L1, s1, h1);

    Vec a2(static_cast<std::size_t>(B) * n * n * L2);
    for (std::size_t cell = 0; cell < a2.size() / L2; ++cell)
      for (int c = 0; c < L2; ++c) {
        double acc = b2[static_cast<std::size_t>(c)];
        for (int t = 0; t < L1; ++t)
          acc += a1[cell * L1 + t] * w2[static_cast<std::size_t>(t) * L2 + c];
        a2[cell * L2 + c] = std::max(acc, 0.0);
      }
    ref_bn(a2, L2, s2, h2);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < L2; ++c)
          a2[((static_cast<std::size_t>(b) * n + i) * n + i) * L2 + c] = 0;

    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < L2; ++c) {
          double pooled;
          if (cfg.encoder_pool == PoolKind::Max) {
            pooled = a2[((static_cast<std::size_t>(b) * n + i) * n + 0) * L2 + c];
            for (int j = 1; j < n; ++j)
              pooled = std::max(pooled, a2[((static_cast<std::size_t>(b) * n + i) * n + j) * L2 + c]);
          } else {
            double s = 0;
            for (int j = 0; j < n; ++j)
              if (j != i) s += a2[((static_cast<std::size_t>(b) * n + i) * n + j) * L2 + c];
            pooled = s / (n - 1);
          }
          cur[b][i].push_back(pooled);
        }
  }
  return cur;
}

// logits [B][T][n] for teacher forcing with the given prefixes
std::vector<std::vector<Vec>> ref_logits(const ModelConfig& cfg, OrderNet<double>& m,
                                         const std::vector<std::vector<Vec>>& enc,
                                         const std::vector<std::vector<int>>& prefixes) {
  const int B = static_cast<int>(enc.size());
  const int n = static_cast<int>(enc[0].size());
  const int dp = cfg.encoded_dim();
  const int T = static_cast<int>(prefixes[0].size()) + 1;
  const Vec start = param(m, "start_token");

  // source-target tensor with consumed cells zeroed
  Vec st(static_cast<std::size_t>(B) * n * T * 2 * dp, 0.0);
  for (int b = 0; b < B; ++b) {
    std::vector<Vec> targets{start};
    for (int idx : prefixes[b]) targets.push_back(enc[b][static_cast<std::size_t>(idx)]);
    for (int t = 0; t < T; ++t) {
      std::vector<char> consumed(static_cast<std::size_t>(n), 0);
      for (int q = 0; q < t; ++q) consumed[static_cast<std::size_t>(prefixes[b][q])] = 1;
      for (int i = 0; i < n; ++i) {
        if (consumed[static_cast<std::size_t>(i)]) continue;  // stays zero
        const std::size_t base = ((static_cast<std::size_t>(b) * n + i) * T + t) * 2 * dp;
        for (int c = 0; c < dp; ++c) {
          st[base + c] = enc[b][static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
          st[base + dp + c] = targets[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
        }
      }
    }
  }

  Vec cur = std::move(st);
  int C = 2 * dp;
  const int dd = cfg.decoder_depth;
  for (int j = 0; j < cfg.decoder_blocks; ++j) {
    const std::string p = "decoder.block" + std::to_string(j) + ".";
    const Vec ker = param(m, p + "conv.kernel"), bias = param(m, p + "conv.bias");
    const Vec s = param(m, p + "bn.scale"), h = param(m, p + "bn.shift");
    Vec conv(static_cast<std::size_t>(B) * n * T * dd);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t)
          for (int c = 0; c < dd; ++c) {
            double acc = bias[static_cast<std::size_t>(c)];
            for (int tap = 0; tap < 3; ++tap) {
              const int src = t - 2 + tap;
              if (src < 0) continue;
              for (int ch = 0; ch < C; ++ch)
                acc += cur[((static_cast<std::size_t>(b) * n + i) * T + src) * C + ch] *
                       ker[(static_cast<std::size_t>(tap) * C + ch) * dd + c];
            }
            conv[((static_cast<std::size_t>(b) * n + i) * T + t) * dd + c] = std::max(acc, 0.0);
          }
    // statistics per (t, channel) over batch and sources; the [b,i,t,c]
    // layout already has (t,c) as the trailing group
    ref_bn(conv, T * dd, s, h);
    Vec pooled(static_cast<std::size_t>(B) * T * dd);
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < dd; ++c) {
          double mx = conv[((static_cast<std::size_t>(b) * n + 0) * T + t) * dd + c];
          for (int i = 1; i < n; ++i)
            mx = std::max(mx, conv[((static_cast<std::size_t>(b) * n + i) * T + t) * dd + c]);
          pooled[(static_cast<std::size_t>(b) * T + t) * dd + c] = mx;
        }
    Vec next(static_cast<std::size_t>(B) * n * T * (C + 2 * dd));
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t) {
          const std::size_t cell = (static_cast<std::size_t>(b) * n + i) * T + t;
          double* dst = next.data() + cell * (C + 2 * dd);
          for (int c = 0; c < C; ++c) dst[c] = cur[cell * C + c];
          for (int c = 0; c < dd; ++c) dst[C + c] = conv[cell * dd + c];
          for (int c = 0; c < dd; ++c)
            dst[C + dd + c] = pooled[(static_cast<std::size_t>(b) * T + t) * dd + c];
        }
    cur = std::move(next);
    C += 2 * dd;
  }
  const Vec hw = param(m, "head.weight");
  const Vec hb = param(m, "head.bias");
  std::vector<std::vector<Vec>> logits(
      static_cast<std::size_t>(B), std::vector<Vec>(static_cast<std::size_t>(T),
                                                    Vec(static_cast<std::size_t>(n), 0.0)));
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < T; ++t) {
        double acc = hb[0];
        const std::size_t cell = (static_cast<std::size_t>(b) * n + i) * T + t;
        for (int c = 0; c < C; ++c) acc += cur[cell * C + c] * hw[static_cast<std::size_t>(c)];
        logits[b][t][i] = acc;
      }
  return logits;
}

Tensor<double> tensor_from(const std::vector<std::vector<Vec>>& X) {
  const int B = static_cast<int>(X.size());
  const int n = static_cast<int>(X[0].size());
  const int d = static_cast<int>(X[0][0].size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(B) * n * d);
  for (const auto& row : X)
    for (const auto& el : row) flat.insert(flat.end(), el.begin(), el.end());
  return Tensor<double>::from_data({B, n, d}, std::move(flat));
}

std::vector<std::vector<Vec>> random_set(int B, int n, int d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::vector<Vec>> X(static_cast<std::size_t>(B),
                                  std::vector<Vec>(static_cast<std::size_t>(n),
                                                   Vec(static_cast<std::size_t>(d))));
  for (auto& row : X)
    for (auto& el : row)
      for (auto& v : el) v = rng.next_gaussian();
  return X;
}

ModelConfig tiny_config(PoolKind pool) {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.encoder_blocks = 2;
  cfg.encoder_layer1_depth = 5;
  cfg.encoder_layer2_depth = 3;
  cfg.encoder_pool = pool;
  cfg.decoder_blocks = 2;
  cfg.decoder_depth = 3;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// parameter counting
// ---------------------------------------------------------------------------

TEST(ParameterCount, ClosedFormMatchesConstructedStore) {
  for (auto cfg : {ModelConfig::tsp_default(), ModelConfig::word_order_default(),
                   tiny_config(PoolKind::Max)}) {
    OrderNet<float> m(cfg, 1);
    EXPECT_EQ(static_cast<long long>(m.params().total_scalars()), parameter_count(cfg));
  }
}

TEST(ParameterCount, FrozenReferenceValues) {
  EXPECT_EQ(parameter_count(ModelConfig::tsp_default()), 71623);
  EXPECT_EQ(parameter_count(ModelConfig::word_order_default()), 1380247);
}

TEST(ModelConfig, EncodedDimFormula) {
  EXPECT_EQ(ModelConfig::tsp_default().encoded_dim(), 2 + 4 * 16);
  EXPECT_EQ(ModelConfig::word_order_default().encoded_dim(), 50 + 8 * 32);
}

TEST(ModelConfig, ValidateRejectsNonPositive) {
  ModelConfig cfg;
  cfg.encoder_blocks = 0;
  EXPECT_THROW(cfg.validate(), ContractError);
}

// ---------------------------------------------------------------------------
// reference forward agreement
// ---------------------------------------------------------------------------

TEST(ReferenceForward, EncodeMatchesMaxPool) {
  auto cfg = tiny_config(PoolKind::Max);
  OrderNet<double> m(cfg, 42);
  auto X = random_set(3, 5, 2, 7);
  auto got = m.encode(tensor_from(X), true);
  auto want = ref_encode(cfg, m, X);
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 5; ++i)
      for (int c = 0; c < cfg.encoded_dim(); ++c)
        ASSERT_NEAR(got.data()[(b * 5 + i) * cfg.encoded_dim() + c], want[b][i][c], 1e-9)
            << b << "," << i << "," << c;
}

TEST(ReferenceForward, EncodeMatchesAvgPool) {
  auto cfg = tiny_config(PoolKind::Avg);
  OrderNet<double> m(cfg, 43);
  auto X = random_set(2, 4, 2, 8);
  auto got = m.encode(tensor_from(X), true);
  auto want = ref_encode(cfg, m, X);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < cfg.encoded_dim(); ++c)
        ASSERT_NEAR(got.data()[(b * 4 + i) * cfg.encoded_dim() + c], want[b][i][c], 1e-9);
}

TEST(ReferenceForward, FullLogitsMatch) {
  auto cfg = tiny_config(PoolKind::Max);
  OrderNet<double> m(cfg, 44);
  auto X = random_set(2, 4, 2, 9);
  std::vector<std::vector<int>> prefixes{{2, 0, 3}, {1, 3, 0}};
  auto got = m.forward_logits(tensor_from(X), prefixes, true);
  auto enc = ref_encode(cfg, m, X);
  auto want = ref_logits(cfg, m, enc, prefixes);
  ASSERT_EQ(got.shape(), (std::vector<int>{2, 4, 4}));
  for (int b = 0; b < 2; ++b)
    for (int t = 0; t < 4; ++t)
      for (int i = 0; i < 4; ++i)
        ASSERT_NEAR(got.data()[(b * 4 + t) * 4 + i], want[b][t][i], 1e-9)
            << b << "," << t << "," << i;
}

// ---------------------------------------------------------------------------
// structural invariants
// ---------------------------------------------------------------------------

TEST(Encode, FirstChannelsAreRawInput) {
  OrderNet<float> m(ModelConfig::tsp_default(), 3);
  SplitMix64 rng(10);
  std::vector<float> flat(4 * 9 * 2);
  for (auto& v : flat) v = static_cast<float>(rng.next_double());
  auto X = Tensor<float>::from_data({4, 9, 2}, flat);
  auto enc = m.encode(X, true);
  ASSERT_EQ(enc.shape(), (std::vector<int>{4, 9, 66}));
  for (int b = 0; b < 4; ++b)
    for (int i = 0; i < 9; ++i)
      for (int c = 0; c < 2; ++c)
        EXPECT_EQ(enc.data()[(b * 9 + i) * 66 + c], flat[(b * 9 + i) * 2 + c]);
}

TEST(Encode, RejectsWrongShapes) {
  OrderNet<float> m(ModelConfig::tsp_default(), 3);
  EXPECT_THROW(m.encode(Tensor<float>::zeros({2, 5, 3}), true), ContractError);
  EXPECT_THROW(m.encode(Tensor<float>::zeros({2, 1, 2}), true), ContractError);
}

TEST(Encode, DuplicateElementsEncodeIdentically) {
  for (auto pool : {PoolKind::Max, PoolKind::Avg}) {
    auto cfg = tiny_config(pool);
    OrderNet<double> m(cfg, 11);
    auto X = random_set(1, 5, 2, 12);
    X[0][3] = X[0][1];  // duplicate element
    auto enc = m.encode(tensor_from(X), true);
    const int dp = cfg.encoded_dim();
    for (int c = 0; c < dp; ++c)
      EXPECT_NEAR(enc.data()[(0 * 5 + 1) * dp + c], enc.data()[(0 * 5 + 3) * dp + c], 1e-9);
  }
}

TEST(Equivariance, EncoderAndDecoderCommuteWithPermutation) {
  const ModelConfig cfg = ModelConfig::tsp_default();
  OrderNet<float> m(cfg, 21);
  SplitMix64 rng(22);
  for (bool train : {true, false}) {
    for (int trial = 0; trial < 6; ++trial) {
      const int n = 4 + static_cast<int>(rng.next_below(5));
      std::vector<float> flat(static_cast<std::size_t>(n) * 2);
      for (auto& v : flat) v = static_cast<float>(rng.next_double());
      auto X = Tensor<float>::from_data({1, n, 2}, flat);
      std::vector<int> perm(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
      rng.shuffle(perm);  // element i moves to position perm[i]
      std::vector<float> permuted(flat.size());
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c)
          permuted[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 2 + c] =
              flat[static_cast<std::size_t>(i) * 2 + c];
      auto Xp = Tensor<float>::from_data({1, n, 2}, permuted);

      const int L = n - 1;
      std::vector<int> base(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) base[static_cast<std::size_t>(i)] = i;
      rng.shuffle(base);
      std::vector<int> prefix(base.begin(), base.begin() + L);
      std::vector<int> relabeled(prefix.size());
      for (std::size_t q = 0; q < prefix.size(); ++q)
        relabeled[q] = perm[static_cast<std::size_t>(prefix[q])];

      NoGradGuard ng;
      auto lg = m.forward_logits(X, {prefix}, train);
      auto lgp = m.forward_logits(Xp, {relabeled}, train);
      for (int t = 0; t < n; ++t)
        for (int i = 0; i < n; ++i) {
          const float a = lg.data()[t * n + i];
          const float b = lgp.data()[t * n + perm[static_cast<std::size_t>(i)]];
          ASSERT_NEAR(a, b, 1e-5) << "train=" << train << " t=" << t << " i=" << i;
        }
    }
  }
}

TEST(Causality, FutureColumnsNeverLeakBackward) {
  const ModelConfig cfg = ModelConfig::tsp_default();
  OrderNet<float> m(cfg, 31);
  SplitMix64 rng(32);
  for (bool train : {true, false}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 4 + static_cast<int>(rng.next_below(5));
      std::vector<float> flat(static_cast<std::size_t>(n) * 2);
      for (auto& v : flat) v = static_cast<float>(rng.next_double());
      auto X = Tensor<float>::from_data({1, n, 2}, flat);
      std::vector<int> order(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      rng.shuffle(order);
      std::vector<int> prefix(order.begin(), order.end() - 1);

      NoGradGuard ng;
      auto st = m.build_source_target(m.encode(X, train), {prefix});
      auto base = m.decode_logits(st, train);
      const int t0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - 1)));
      // corrupt every source-target cell at columns strictly after t0
      auto st2 = st;
      st2.tensor = Tensor<float>::from_data(st.tensor.shape(), st.tensor.data());
      const int dp2 = 2 * cfg.encoded_dim();
      for (int i = 0; i < n; ++i)
        for (int t = t0 + 1; t < n; ++t)
          for (int c = 0; c < dp2; ++c)
            st2.tensor.data()[((0 * n + i) * n + t) * dp2 + c] +=
                static_cast<float>(rng.next_double()) + 0.5f;
      auto poked = m.decode_logits(st2, train);
      for (int t = 0; t <= t0; ++t)
        for (int i = 0; i < n; ++i)
          ASSERT_EQ(base.data()[t * n + i], poked.data()[t * n + i])
              << "train=" << train << " t=" << t << " t0=" << t0;
    }
  }
}

TEST(SourceTarget, ValidityFollowsConsumedPrefix) {
  auto cfg = tiny_config(PoolKind::Max);
  OrderNet<float> m(cfg, 41);
  auto X = Tensor<float>::zeros({1, 6, 2});
  for (std::size_t i = 0; i < X.numel(); ++i) X.data()[i] = static_cast<float>(i) * 0.01f;
  NoGradGuard ng;
  auto enc = m.encode(X, false);
  std::vector<int> prefix{0, 2, 1, 3, 4};
  auto st = m.build_source_target(enc, {prefix});
  ASSERT_EQ(st.steps, 6);
  // column t admits exactly the elements not consumed before step t
  const std::vector<std::vector<int>> expect_valid{
      {1, 1, 1, 1, 1, 1}, {0, 1, 1, 1, 1, 1}, {0, 1, 0, 1, 1, 1},
      {0, 0, 0, 1, 1, 1}, {0, 0, 0, 0, 1, 1}, {0, 0, 0, 0, 0, 1}};
  const int C = 2 * cfg.encoded_dim();
  for (int i = 0; i < 6; ++i)
    for (int t = 0; t < 6; ++t) {
      EXPECT_EQ(st.valid[(0 * 6 + i) * 6 + t], expect_valid[t][i]) << i << "," << t;
      if (!expect_valid[t][i])
        for (int c = 0; c < C; ++c)
          ASSERT_EQ(st.tensor.data()[((0 * 6 + i) * 6 + t) * C + c], 0.f);
    }
}

TEST(SourceTarget, StartTokenFillsColumnZero) {
  auto cfg = tiny_config(PoolKind::Max);
  OrderNet<float> m(cfg, 51);
  auto X = Tensor<float>::zeros({2, 4, 2});
  for (std::size_t i = 0; i < X.numel(); ++i) X.data()[i] = 0.1f * static_cast<float>(i % 7);
  NoGradGuard ng;
  auto enc = m.encode(X, false);
  auto st = m.build_source_target(enc, {{}, {}});
  ASSERT_EQ(st.steps, 1);
  const auto& start = m.params().at("start_token").data();
  const int dp = cfg.encoded_dim();
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < dp; ++c)
        EXPECT_EQ(st.tensor.data()[((b * 4 + i) * 1 + 0) * 2 * dp + dp + c], start[c]);
}

TEST(SourceTarget, RejectsBadPrefixes) {
  auto cfg = tiny_config(PoolKind::Max);
  OrderNet<float> m(cfg, 61);
  auto X = Tensor<float>::zeros({1, 4, 2});
  NoGradGuard ng;
  auto enc = m.encode(X, false);
  EXPECT_THROW(m.build_source_target(enc, {{1, 1}}), ContractError);
  EXPECT_THROW(m.build_source_target(enc, {{4}}), ContractError);
  EXPECT_THROW(m.build_source_target(enc, {{0, 1, 2, 3}}), ContractError);
  EXPECT_THROW(m.build_source_target(enc, {{0}, {1}}), ContractError);  // batch mismatch
}

TEST(Model, DeterministicConstructionAndForward) {
  const ModelConfig cfg = tiny_config(PoolKind::Max);
  OrderNet<float> a(cfg, 1234), b(cfg, 1234), c(cfg, 1235);
  for (std::size_t p = 0; p < a.params().size(); ++p)
    EXPECT_EQ(a.params().items()[p].second.data(), b.params().items()[p].second.data());
  bool differs = false;
  for (std::size_t p = 0; p < a.params().size(); ++p)
    if (a.params().items()[p].second.data() != c.params().items()[p].second.data()) differs = true;
  EXPECT_TRUE(differs);
  auto X = tensor_from(random_set(2, 5, 2, 99));
  std::vector<std::vector<int>> pre{{3, 1}, {0, 4}};
  NoGradGuard ng;
  auto fa = a.forward_logits(Tensor<float>::from_data({2, 5, 2}, std::vector<float>(
                                 X.data().begin(), X.data().end())), pre, true);
  auto fb = b.forward_logits(Tensor<float>::from_data({2, 5, 2}, std::vector<float>(
                                 X.data().begin(), X.data().end())), pre, true);
  EXPECT_EQ(fa.data(), fb.data());
}

TEST(Model, HeadInitKeepsInitialSoftmaxNearUniform) {
  OrderNet<float> m(ModelConfig::tsp_default(), 77);
  auto X = Tensor<float>::zeros({8, 6, 2});
  SplitMix64 rng(78);
  for (auto& v : X.data()) v = static_cast<float>(rng.next_double());
  std::vector<std::vector<int>> pre(8);
  for (int b = 0; b < 8; ++b)
    for (int q = 0; q < 5; ++q) pre[static_cast<std::size_t>(b)].push_back((b + q) % 6);
  std::vector<int> targets;
  for (int b = 0; b < 8; ++b) {
    for (int q = 0; q < 5; ++q) targets.push_back(pre[static_cast<std::size_t>(b)][q]);
    targets.push_back((b + 5) % 6);
  }
  auto logits = m.forward_logits(X, pre, true);
  auto loss = masked_softmax_cross_entropy(logits, targets);
  EXPECT_NEAR(loss.item(), std::log(6.0), 0.15);
}

// ---------------------------------------------------------------------------
// end-to-end gradient check (small double model)
// ---------------------------------------------------------------------------

TEST(ModelGradcheck, TinyModelAllParameters) {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.encoder_blocks = 1;
  cfg.encoder_layer1_depth = 4;
  cfg.encoder_layer2_depth = 3;
  cfg.encoder_pool = PoolKind::Max;
  cfg.decoder_blocks = 1;
  cfg.decoder_depth = 3;
  OrderNet<double> m(cfg, 5150);
  auto X = tensor_from(random_set(2, 3, 2, 5151));
  std::vector<std::vector<int>> pre{{2, 0}, {1, 2}};
  std::vector<int> targets{2, 0, 1, 1, 2, 0};
  std::vector<Tensor<double>> leaves;
  for (auto& [name, t] : m.params().items()) leaves.push_back(t);
  ordernet::testing::gradcheck(leaves, [&] {
    auto logits = m.forward_logits(X, pre, true);
    return masked_softmax_cross_entropy(logits, targets);
  }, 1e-5, 2e-4, 1e-8);
}
