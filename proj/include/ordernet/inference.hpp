#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ordernet/model.hpp"
#include "ordernet/tensor.hpp"

// Autoregressive decoding over a frozen model (eval-mode batch norm, no
// tape). Scores are per-step log probabilities of a softmax restricted to
// the unvisited elements, summed without length normalization; every
// decode therefore returns a full permutation of 0..n-1.

namespace ordernet {

struct Decoded {
  std::vector<int> order;
  double log_prob = 0;
};

namespace detail {

// masked log-softmax in 64-bit over the unvisited entries of one logits row
template <typename S>
std::vector<double> masked_log_softmax_row(const S* row, int n, const std::vector<char>& visited) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (!visited[static_cast<std::size_t>(i)]) mx = std::max(mx, static_cast<double>(row[i]));
  double denom = 0;
  for (int i = 0; i < n; ++i)
    if (!visited[static_cast<std::size_t>(i)]) denom += std::exp(static_cast<double>(row[i]) - mx);
  const double log_denom = mx + std::log(denom);
  std::vector<double> out(static_cast<std::size_t>(n),
                          -std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i)
    if (!visited[static_cast<std::size_t>(i)])
      out[static_cast<std::size_t>(i)] = static_cast<double>(row[i]) - log_denom;
  return out;
}

template <typename S>
void require_single_instance(const Tensor<S>& X) {
  if (X.rank() != 3 || X.dim(0) != 1)
    fail("decode: expected a single instance [1,n,d], got " + shape_str(X.shape()));
}

// encoded rows of one instance replicated into a batch of identical sets
template <typename S>
Tensor<S> replicate_encoded(const Tensor<S>& encoded, int copies) {
  const auto& src = encoded.data();
  std::vector<S> data;
  data.reserve(src.size() * static_cast<std::size_t>(copies));
  for (int c = 0; c < copies; ++c) data.insert(data.end(), src.begin(), src.end());
  return Tensor<S>::from_data({copies, encoded.dim(1), encoded.dim(2)}, std::move(data));
}

}  // namespace detail

template <typename S>
Decoded greedy_decode(OrderNet<S>& model, const Tensor<S>& X) {
  detail::require_single_instance(X);
  const int n = X.dim(1);
  NoGradGuard frozen;
  auto encoded = model.encode(X, false);
  Decoded out;
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < n; ++t) {
    auto st = model.build_source_target(encoded, {out.order});
    auto logits = model.decode_logits(st, false);  // [1, t+1, n]
    const S* row = logits.data().data() + static_cast<std::size_t>(t) * n;
    auto lp = detail::masked_log_softmax_row(row, n, visited);
    int best = -1;
    for (int i = 0; i < n; ++i)
      if (!visited[static_cast<std::size_t>(i)] &&
          (best < 0 || lp[static_cast<std::size_t>(i)] > lp[static_cast<std::size_t>(best)]))
        best = i;  // strict > keeps the lowest index on ties
    out.order.push_back(best);
    out.log_prob += lp[static_cast<std::size_t>(best)];
    visited[static_cast<std::size_t>(best)] = 1;
  }
  return out;
}

// Breadth-limited search keeping the `beam` best prefixes per step, ranked
// by total log probability with lexicographic prefix order breaking ties.
template <typename S>
Decoded beam_search(OrderNet<S>& model, const Tensor<S>& X, int beam) {
  detail::require_single_instance(X);
  if (beam < 1) detail::fail("beam_search: beam must be >= 1, got " + std::to_string(beam));
  const int n = X.dim(1);
  NoGradGuard frozen;
  auto encoded = model.encode(X, false);

  struct Hyp {
    std::vector<int> prefix;
    double log_prob = 0;
  };
  std::vector<Hyp> alive{{{}, 0.0}};
  for (int t = 0; t < n; ++t) {
    auto batch = detail::replicate_encoded(encoded, static_cast<int>(alive.size()));
    std::vector<std::vector<int>> prefixes;
    prefixes.reserve(alive.size());
    for (const auto& h : alive) prefixes.push_back(h.prefix);
    auto logits = model.decode_logits(model.build_source_target(batch, prefixes), false);
    const S* base = logits.data().data();
    std::vector<Hyp> candidates;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      std::vector<char> visited(static_cast<std::size_t>(n), 0);
      for (int idx : alive[h].prefix) visited[static_cast<std::size_t>(idx)] = 1;
      const S* row = base + (h * static_cast<std::size_t>(t + 1) + static_cast<std::size_t>(t)) * n;
      auto lp = detail::masked_log_softmax_row(row, n, visited);
      for (int i = 0; i < n; ++i) {
        if (visited[static_cast<std::size_t>(i)]) continue;
        Hyp ext{alive[h].prefix, alive[h].log_prob + lp[static_cast<std::size_t>(i)]};
        ext.prefix.push_back(i);
        candidates.push_back(std::move(ext));
      }
    }
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam),
                                                   candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Hyp& a, const Hyp& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        return a.prefix < b.prefix;
                      });
    candidates.resize(keep);
    alive = std::move(candidates);
  }
  return {alive[0].prefix, alive[0].log_prob};
}

// Total log probability the model assigns to a given complete ordering,
// under the same per-step unvisited-softmax as decoding.
template <typename S>
double score_sequence(OrderNet<S>& model, const Tensor<S>& X, const std::vector<int>& order) {
  detail::require_single_instance(X);
  const int n = X.dim(1);
  if (static_cast<int>(order.size()) != n)
    detail::fail("score_sequence: order length " + std::to_string(order.size()) + " for n=" +
                 std::to_string(n));
  NoGradGuard frozen;
  auto encoded = model.encode(X, false);
  std::vector<int> prefix(order.begin(), order.end() - 1);
  auto logits = model.decode_logits(model.build_source_target(encoded, {prefix}), false);
  double total = 0;
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < n; ++t) {
    const S* row = logits.data().data() + static_cast<std::size_t>(t) * n;
    auto lp = detail::masked_log_softmax_row(row, n, visited);
    total += lp[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])];
    visited[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = 1;
  }
  return total;
}

}  // namespace ordernet
