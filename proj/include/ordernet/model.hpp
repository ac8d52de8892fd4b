#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ordernet/optim.hpp"
#include "ordernet/rng.hpp"
#include "ordernet/tensor.hpp"

// Permutation-equivariant ordering model. The encoder embeds each set element
// through stacked pairwise-interaction blocks: a block expands its input
// [B,n,D] into the pair tensor [B,n,n,2D] (cell (i,j) holds [x_i || x_j]),
// runs two 1x1 conv layers (each conv -> ReLU -> batch norm), zeroes the
// diagonal, pools over j, and concatenates the pooled features back onto the
// block input. The decoder scores "source element i is emitted at step t"
// over a source-target tensor [B,n,T,2d'] whose cell (i,t) pairs element i
// with the step-t decoder input (start token, then the already-emitted
// elements); cells of already-consumed elements are zeroed. Decoder blocks
// are causal width-3 convs along t (conv -> ReLU -> batch norm) plus a
// max-pool branch over sources, densely concatenated; a final 1x1 projection
// yields logits [B,T,n].

namespace ordernet {

struct ModelConfig {
  int input_dim = 2;
  int encoder_blocks = 4;
  int encoder_layer1_depth = 128;
  int encoder_layer2_depth = 16;
  PoolKind encoder_pool = PoolKind::Max;
  int decoder_blocks = 4;
  int decoder_depth = 16;

  // channels per encoded element: block k appends layer2_depth channels
  int encoded_dim() const { return input_dim + encoder_blocks * encoder_layer2_depth; }

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) detail::fail(std::string("ModelConfig: ") + name + " must be >= 1, got " +
                              std::to_string(v));
    };
    positive(input_dim, "input_dim");
    positive(encoder_blocks, "encoder_blocks");
    positive(encoder_layer1_depth, "encoder_layer1_depth");
    positive(encoder_layer2_depth, "encoder_layer2_depth");
    positive(decoder_blocks, "decoder_blocks");
    positive(decoder_depth, "decoder_depth");
  }

  static ModelConfig tsp_default() { return ModelConfig{}; }

  static ModelConfig word_order_default(int input_dim = 50) {
    ModelConfig cfg;
    cfg.input_dim = input_dim;
    cfg.encoder_blocks = 8;
    cfg.encoder_layer1_depth = 256;
    cfg.encoder_layer2_depth = 32;
    cfg.encoder_pool = PoolKind::Avg;
    cfg.decoder_blocks = 8;
    cfg.decoder_depth = 32;
    return cfg;
  }
};

// Exact number of learnable scalars (running statistics excluded), as a pure
// function of the configuration.
inline long long parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  long long total = 0;
  const long long L1 = cfg.encoder_layer1_depth, L2 = cfg.encoder_layer2_depth;
  for (int k = 0; k < cfg.encoder_blocks; ++k) {
    const long long Dk = cfg.input_dim + static_cast<long long>(k) * L2;
    total += 2 * Dk * L1 + L1;  // conv1
    total += 2 * L1;            // bn1
    total += L1 * L2 + L2;      // conv2
    total += 2 * L2;            // bn2
  }
  const long long dp = cfg.encoded_dim();
  const long long dd = cfg.decoder_depth;
  for (int j = 0; j < cfg.decoder_blocks; ++j) {
    const long long Ej = 2 * dp + 2 * static_cast<long long>(j) * dd;
    total += 3 * Ej * dd + dd;  // causal conv
    total += 2 * dd;            // bn
  }
  total += (2 * dp + 2 * static_cast<long long>(cfg.decoder_blocks) * dd) + 1;  // head
  total += dp;  // start token
  return total;
}

// The decoder input for one batch: cell (i, t) is zeroed once element i has
// been consumed by the prefix before step t. `valid` is the [B, n, T] keep
// mask behind that zeroing.
template <typename S>
struct SourceTargetTensor {
  Tensor<S> tensor;  // [B, n, T, 2 * encoded_dim]
  std::vector<std::uint8_t> valid;
  int batch = 0, n = 0, steps = 0;
};

template <typename S>
class OrderNet {
 public:
  OrderNet(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const int L1 = cfg_.encoder_layer1_depth, L2 = cfg_.encoder_layer2_depth;
    const int dp = cfg_.encoded_dim(), dd = cfg_.decoder_depth;
    for (int k = 0; k < cfg_.encoder_blocks; ++k) {
      const int Dk = cfg_.input_dim + k * L2;
      const std::string p = "encoder.block" + std::to_string(k) + ".";
      EncoderBlock blk;
      blk.w1 = params_.add(p + "conv1.weight", Tensor<S>::zeros({2 * Dk, L1}));
      blk.b1 = params_.add(p + "conv1.bias", Tensor<S>::zeros({L1}));
      blk.s1 = params_.add(p + "bn1.scale", Tensor<S>::zeros({L1}));
      blk.h1 = params_.add(p + "bn1.shift", Tensor<S>::zeros({L1}));
      blk.w2 = params_.add(p + "conv2.weight", Tensor<S>::zeros({L1, L2}));
      blk.b2 = params_.add(p + "conv2.bias", Tensor<S>::zeros({L2}));
      blk.s2 = params_.add(p + "bn2.scale", Tensor<S>::zeros({L2}));
      blk.h2 = params_.add(p + "bn2.shift", Tensor<S>::zeros({L2}));
      enc_.push_back(blk);
      enc_bn1_.push_back({std::vector<S>(static_cast<std::size_t>(L1), S(0)),
                          std::vector<S>(static_cast<std::size_t>(L1), S(1))});
      enc_bn2_.push_back({std::vector<S>(static_cast<std::size_t>(L2), S(0)),
                          std::vector<S>(static_cast<std::size_t>(L2), S(1))});
    }
    for (int j = 0; j < cfg_.decoder_blocks; ++j) {
      const int Ej = 2 * dp + 2 * j * dd;
      const std::string p = "decoder.block" + std::to_string(j) + ".";
      DecoderBlock blk;
      blk.k = params_.add(p + "conv.kernel", Tensor<S>::zeros({3, Ej, dd}));
      blk.b = params_.add(p + "conv.bias", Tensor<S>::zeros({dd}));
      blk.s = params_.add(p + "bn.scale", Tensor<S>::zeros({dd}));
      blk.h = params_.add(p + "bn.shift", Tensor<S>::zeros({dd}));
      dec_.push_back(blk);
      dec_bn_.push_back({std::vector<S>(static_cast<std::size_t>(dd), S(0)),
                         std::vector<S>(static_cast<std::size_t>(dd), S(1))});
    }
    const int Eh = 2 * dp + 2 * cfg_.decoder_blocks * dd;
    head_w_ = params_.add("head.weight", Tensor<S>::zeros({Eh, 1}));
    head_b_ = params_.add("head.bias", Tensor<S>::zeros({1}));
    start_ = params_.add("start_token", Tensor<S>::zeros({dp}));
    init_weights(init_seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // Running batch-norm statistics, in the same canonical order as the
  // parameters they accompany.
  std::vector<std::pair<std::string, std::vector<S>*>> named_buffers() {
    std::vector<std::pair<std::string, std::vector<S>*>> out;
    for (int k = 0; k < cfg_.encoder_blocks; ++k) {
      const std::string p = "encoder.block" + std::to_string(k) + ".";
      out.push_back({p + "bn1.running_mean", &enc_bn1_[static_cast<std::size_t>(k)].mean});
      out.push_back({p + "bn1.running_var", &enc_bn1_[static_cast<std::size_t>(k)].var});
      out.push_back({p + "bn2.running_mean", &enc_bn2_[static_cast<std::size_t>(k)].mean});
      out.push_back({p + "bn2.running_var", &enc_bn2_[static_cast<std::size_t>(k)].var});
    }
    for (int j = 0; j < cfg_.decoder_blocks; ++j) {
      const std::string p = "decoder.block" + std::to_string(j) + ".";
      out.push_back({p + "bn.running_mean", &dec_bn_[static_cast<std::size_t>(j)].mean});
      out.push_back({p + "bn.running_var", &dec_bn_[static_cast<std::size_t>(j)].var});
    }
    return out;
  }

  // [B, n, input_dim] -> [B, n, encoded_dim]; the first input_dim channels of
  // the result are the raw input (dense concatenation).
  Tensor<S> encode(const Tensor<S>& X, bool train) {
    if (X.rank() != 3 || X.dim(2) != cfg_.input_dim)
      detail::fail("encode: expected [B,n," + std::to_string(cfg_.input_dim) + "], got " +
                   detail::shape_str(X.shape()));
    const int B = X.dim(0), n = X.dim(1);
    if (n < 2) detail::fail("encode: need at least 2 set elements, got " + std::to_string(n));
    Tensor<S> cur = X;
    for (std::size_t k = 0; k < enc_.size(); ++k) {
      auto& blk = enc_[k];
      auto xi = broadcast_over_axis(cur, 2, n);  // [B,n,n,D], cell (i,j) = x_i
      auto xj = broadcast_over_axis(cur, 1, n);  // [B,n,n,D], cell (i,j) = x_j
      auto pair = concat_last_axis<S>({xi, xj});
      auto h1 = batch_norm(relu(pointwise_linear(pair, blk.w1, blk.b1)), blk.s1, blk.h1,
                           enc_bn1_[k].mean, enc_bn1_[k].var, 3, train);
      auto h2 = batch_norm(relu(pointwise_linear(h1, blk.w2, blk.b2)), blk.s2, blk.h2,
                           enc_bn2_[k].mean, enc_bn2_[k].var, 3, train);
      auto zeroed = zero_diagonal(h2);
      Tensor<S> pooled;
      if (cfg_.encoder_pool == PoolKind::Max) {
        pooled = pool_over_axis(zeroed, 2, PoolKind::Max);
      } else {
        // the diagonal is excluded from the average, not just zeroed
        const int L2 = cfg_.encoder_layer2_depth;
        std::vector<std::uint8_t> excl(zeroed.numel(), 0);
        for (int b = 0; b < B; ++b)
          for (int i = 0; i < n; ++i) {
            const std::size_t base =
                ((static_cast<std::size_t>(b) * n + i) * n + i) * static_cast<std::size_t>(L2);
            for (int c = 0; c < L2; ++c) excl[base + c] = 1;
          }
        pooled = pool_over_axis(zeroed, 2, PoolKind::Avg, &excl);
      }
      cur = concat_last_axis<S>({cur, pooled});
    }
    return cur;
  }

  // Assembles the decoder input for teacher forcing or stepwise inference.
  // prefixes[b] lists the elements already emitted (distinct, in range,
  // length < n, same length for the whole batch); the tensor gets
  // prefix_len + 1 step columns.
  SourceTargetTensor<S> build_source_target(const Tensor<S>& encoded,
                                            const std::vector<std::vector<int>>& prefixes) {
    const int dp = cfg_.encoded_dim();
    if (encoded.rank() != 3 || encoded.dim(2) != dp)
      detail::fail("build_source_target: expected [B,n," + std::to_string(dp) + "], got " +
                   detail::shape_str(encoded.shape()));
    const int B = encoded.dim(0), n = encoded.dim(1);
    if (static_cast<int>(prefixes.size()) != B)
      detail::fail("build_source_target: " + std::to_string(prefixes.size()) +
                   " prefixes for batch " + std::to_string(B));
    const std::size_t L = prefixes.empty() ? 0 : prefixes[0].size();
    for (const auto& pre : prefixes) {
      if (pre.size() != L) detail::fail("build_source_target: ragged prefix lengths");
      if (static_cast<int>(pre.size()) >= n)
        detail::fail("build_source_target: prefix of length " + std::to_string(pre.size()) +
                     " leaves nothing to emit for n=" + std::to_string(n));
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      for (int idx : pre) {
        if (idx < 0 || idx >= n)
          detail::fail("build_source_target: prefix index " + std::to_string(idx) +
                       " out of range for n=" + std::to_string(n));
        if (seen[static_cast<std::size_t>(idx)])
          detail::fail("build_source_target: prefix repeats index " + std::to_string(idx));
        seen[static_cast<std::size_t>(idx)] = 1;
      }
    }
    const int T = static_cast<int>(L) + 1;

    auto start_row = reshape(broadcast_over_axis(start_, 0, B), {B, 1, dp});
    Tensor<S> ytgt;
    if (L == 0) {
      ytgt = start_row;
    } else {
      auto gathered = gather_rows(encoded, prefixes);  // [B, L, dp]
      std::vector<Tensor<S>> parts{start_row, gathered};
      ytgt = concat_axis(std::span<const Tensor<S>>(parts), 1);  // [B, T, dp]
    }
    auto xpart = broadcast_over_axis(encoded, 2, T);  // [B,n,T,dp]
    auto ypart = broadcast_over_axis(ytgt, 1, n);     // [B,n,T,dp]
    auto st = concat_last_axis<S>({xpart, ypart});    // [B,n,T,2dp]

    SourceTargetTensor<S> out;
    out.batch = B;
    out.n = n;
    out.steps = T;
    out.valid.assign(static_cast<std::size_t>(B) * n * T, 1);
    for (int b = 0; b < B; ++b) {
      std::vector<char> consumed(static_cast<std::size_t>(n), 0);
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i)
          if (consumed[static_cast<std::size_t>(i)])
            out.valid[(static_cast<std::size_t>(b) * n + i) * T + t] = 0;
        if (t < static_cast<int>(L)) consumed[static_cast<std::size_t>(prefixes[b][t])] = 1;
      }
    }
    std::vector<std::uint8_t> full(st.numel());
    const std::size_t C = static_cast<std::size_t>(2 * dp);
    for (std::size_t cell = 0; cell < out.valid.size(); ++cell)
      std::fill_n(full.begin() + static_cast<std::ptrdiff_t>(cell * C), C, out.valid[cell]);
    out.tensor = apply_mask(st, full);
    return out;
  }

  // [B, n, T, 2d'] -> logits [B, T, n]; position t only sees columns <= t.
  Tensor<S> decode_logits(const SourceTargetTensor<S>& st, bool train) {
    Tensor<S> cur = st.tensor;
    const int B = st.batch, n = st.n, T = st.steps;
    for (std::size_t j = 0; j < dec_.size(); ++j) {
      auto& blk = dec_[j];
      auto conv = batch_norm(relu(causal_conv_1x3(cur, blk.k, blk.b)), blk.s, blk.h,
                             dec_bn_[j].mean, dec_bn_[j].var, 2, train);
      auto pooled = broadcast_over_axis(pool_over_axis(conv, 1, PoolKind::Max), 1, n);
      cur = concat_last_axis<S>({cur, conv, pooled});
    }
    auto head = pointwise_linear(cur, head_w_, head_b_);  // [B,n,T,1]
    return permute_axes(reshape(head, {B, n, T}), {0, 2, 1});
  }

  Tensor<S> forward_logits(const Tensor<S>& X, const std::vector<std::vector<int>>& prefixes,
                           bool train) {
    return decode_logits(build_source_target(encode(X, train), prefixes), train);
  }

 private:
  struct EncoderBlock {
    Tensor<S> w1, b1, s1, h1, w2, b2, s2, h2;
  };
  struct DecoderBlock {
    Tensor<S> k, b, s, h;
  };
  struct BnState {
    std::vector<S> mean, var;
  };

  // He fan-in normals for conv weights, zero biases, scale 1 / shift 0 for
  // batch norm. The head is initialized at a tenth of its He scale so the
  // initial softmax is near uniform; the start token gets sd 0.1.
  void init_weights(std::uint64_t seed) {
    SplitMix64 rng(seed);
    auto he_fill = [&rng](Tensor<S>& t, int fan_in, double factor) {
      const double sd = std::sqrt(2.0 / fan_in) * factor;
      for (S& v : t.data()) v = static_cast<S>(rng.next_gaussian() * sd);
    };
    for (auto& [name, t] : params_.items()) {
      const auto& shape = t.shape();
      if (name.ends_with("conv1.weight") || name.ends_with("conv2.weight")) {
        he_fill(t, shape[0], 1.0);
      } else if (name.ends_with("conv.kernel")) {
        he_fill(t, 3 * shape[1], 1.0);
      } else if (name == "head.weight") {
        he_fill(t, shape[0], 0.1);
      } else if (name == "start_token") {
        for (S& v : t.data()) v = static_cast<S>(rng.next_gaussian() * 0.1);
      } else if (name.ends_with(".scale")) {
        for (S& v : t.data()) v = S(1);
      }
      // biases and shifts stay zero
    }
  }

  ModelConfig cfg_;
  ParamStore<S> params_;
  std::vector<EncoderBlock> enc_;
  std::vector<DecoderBlock> dec_;
  std::vector<BnState> enc_bn1_, enc_bn2_, dec_bn_;
  Tensor<S> head_w_, head_b_, start_;
};

}  // namespace ordernet
