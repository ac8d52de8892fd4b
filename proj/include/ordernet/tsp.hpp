#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ordernet/errors.hpp"
#include "ordernet/rng.hpp"

namespace ordernet::tsp {

struct Point {
  double x = 0, y = 0;
};

// Planar TSP instance with coordinates in the unit square. The seed is the
// generation provenance: generate_instance(n(), seed) rebuilds the instance
// bit-identically.
struct TspInstance {
  std::vector<Point> points;
  std::uint64_t seed = 0;
  int n() const { return static_cast<int>(points.size()); }
};

struct Tour {
  std::vector<int> order;
  double length = 0;
};

inline constexpr int kHeldKarpCap = 20;
inline constexpr int kBruteForceCap = 10;

inline TspInstance generate_instance(int n, std::uint64_t seed) {
  if (n < 2) throw ContractError("generate_instance: need n >= 2, got " + std::to_string(n));
  SplitMix64 rng(seed);
  TspInstance inst;
  inst.seed = seed;
  inst.points.resize(static_cast<std::size_t>(n));
  for (auto& p : inst.points) {
    p.x = rng.next_double();
    p.y = rng.next_double();
  }
  return inst;
}

inline double dist(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

namespace detail {

inline void check_tour(const TspInstance& inst, const std::vector<int>& tour) {
  const int n = inst.n();
  if (static_cast<int>(tour.size()) != n)
    throw ContractError("tour has " + std::to_string(tour.size()) + " cities, instance has " +
                        std::to_string(n));
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int c : tour) {
    if (c < 0 || c >= n)
      throw ContractError("tour city " + std::to_string(c) + " out of range for n=" +
                          std::to_string(n));
    if (seen[static_cast<std::size_t>(c)])
      throw ContractError("tour visits city " + std::to_string(c) + " twice");
    seen[static_cast<std::size_t>(c)] = 1;
  }
}

inline std::vector<double> distance_matrix(const TspInstance& inst) {
  const int n = inst.n();
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double w = dist(inst.points[i], inst.points[j]);
      d[static_cast<std::size_t>(i) * n + j] = w;
      d[static_cast<std::size_t>(j) * n + i] = w;
    }
  return d;
}

}  // namespace detail

// Closed-tour length; validates that `tour` is a permutation of 0..n-1.
inline double tour_length(const TspInstance& inst, const std::vector<int>& tour) {
  detail::check_tour(inst, tour);
  double total = 0;
  const int n = inst.n();
  for (int i = 0; i < n; ++i)
    total += dist(inst.points[static_cast<std::size_t>(tour[i])],
                  inst.points[static_cast<std::size_t>(tour[(i + 1) % n])]);
  return total;
}

// Exhaustive search over all tours that start at city 0; exact for tiny n and
// the independent oracle for the dynamic program below. Ties resolve to the
// lexicographically smallest optimal tour.
inline Tour brute_force(const TspInstance& inst) {
  const int n = inst.n();
  if (n < 2) throw ContractError("brute_force: need n >= 2");
  if (n > kBruteForceCap)
    throw ResourceError("brute_force: n=" + std::to_string(n) + " exceeds the cap of " +
                        std::to_string(kBruteForceCap) + "; use held_karp or christofides");
  std::vector<int> rest(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n - 1; ++i) rest[static_cast<std::size_t>(i)] = i + 1;
  const auto d = detail::distance_matrix(inst);
  std::vector<int> best;
  double best_len = std::numeric_limits<double>::infinity();
  do {
    double len = d[static_cast<std::size_t>(rest.front())];
    for (std::size_t i = 0; i + 1 < rest.size(); ++i)
      len += d[static_cast<std::size_t>(rest[i]) * n + rest[i + 1]];
    len += d[static_cast<std::size_t>(rest.back()) * n];
    if (len < best_len) {
      best_len = len;
      best = rest;
    }
  } while (std::next_permutation(rest.begin(), rest.end()));
  best.insert(best.begin(), 0);
  return {std::move(best), best_len};
}

// Held-Karp dynamic program over subsets, O(2^n n^2). Exact; city 0 is the
// fixed start. Memory is the binding constraint (~80 MB at the n=20 cap).
inline Tour held_karp(const TspInstance& inst) {
  const int n = inst.n();
  if (n < 2) throw ContractError("held_karp: need n >= 2");
  if (n > kHeldKarpCap)
    throw ResourceError("held_karp: n=" + std::to_string(n) + " exceeds the exact cap of " +
                        std::to_string(kHeldKarpCap) + "; use christofides for larger instances");
  const auto d = detail::distance_matrix(inst);
  if (n == 2) return {{0, 1}, 2 * d[1]};
  const int m = n - 1;  // cities 1..n-1, bit k <-> city k+1
  const std::size_t masks = std::size_t{1} << m;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(masks * static_cast<std::size_t>(m), inf);
  std::vector<std::int8_t> parent(masks * static_cast<std::size_t>(m), -1);
  for (int k = 0; k < m; ++k)
    dp[(std::size_t{1} << k) * m + static_cast<std::size_t>(k)] = d[static_cast<std::size_t>(k + 1)];
  for (std::size_t mask = 1; mask < masks; ++mask) {
    const std::size_t base = mask * static_cast<std::size_t>(m);
    for (int j = 0; j < m; ++j) {
      if (!(mask >> j & 1)) continue;
      const double cur = dp[base + static_cast<std::size_t>(j)];
      if (cur == inf) continue;
      const double* dj = d.data() + static_cast<std::size_t>(j + 1) * n;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1) continue;
        const std::size_t nbase = (mask | std::size_t{1} << k) * static_cast<std::size_t>(m);
        const double cand = cur + dj[k + 1];
        if (cand < dp[nbase + static_cast<std::size_t>(k)]) {
          dp[nbase + static_cast<std::size_t>(k)] = cand;
          parent[nbase + static_cast<std::size_t>(k)] = static_cast<std::int8_t>(j);
        }
      }
    }
  }
  const std::size_t full = masks - 1;
  double best_len = inf;
  int best_j = -1;
  for (int j = 0; j < m; ++j) {
    const double cand = dp[full * m + static_cast<std::size_t>(j)] + d[static_cast<std::size_t>(j + 1) * n];
    if (cand < best_len) {
      best_len = cand;
      best_j = j;
    }
  }
  std::vector<int> tour(static_cast<std::size_t>(n));
  std::size_t mask = full;
  int j = best_j;
  for (int pos = n - 1; pos >= 1; --pos) {
    tour[static_cast<std::size_t>(pos)] = j + 1;
    const int pj = parent[mask * m + static_cast<std::size_t>(j)];
    mask ^= std::size_t{1} << j;
    j = pj;
  }
  tour[0] = 0;
  return {std::move(tour), best_len};
}

// Greedy nearest neighbor from city 0; ties go to the lowest index.
inline Tour nearest_neighbor(const TspInstance& inst) {
  const int n = inst.n();
  if (n < 2) throw ContractError("nearest_neighbor: need n >= 2");
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  std::vector<int> tour{0};
  tour.reserve(static_cast<std::size_t>(n));
  visited[0] = 1;
  double len = 0;
  int cur = 0;
  for (int step = 1; step < n; ++step) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (visited[static_cast<std::size_t>(j)]) continue;
      const double w = dist(inst.points[static_cast<std::size_t>(cur)],
                            inst.points[static_cast<std::size_t>(j)]);
      if (w < best_d) {
        best_d = w;
        best = j;
      }
    }
    visited[static_cast<std::size_t>(best)] = 1;
    tour.push_back(best);
    len += best_d;
    cur = best;
  }
  len += dist(inst.points[static_cast<std::size_t>(cur)], inst.points[0]);
  return {std::move(tour), len};
}

namespace detail {

// Prim MST, O(n^2); ties toward the lowest index keep it deterministic.
inline std::vector<std::pair<int, int>> prim_mst(const std::vector<double>& d, int n) {
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<int> from(static_cast<std::size_t>(n), -1);
  best[0] = 0;
  std::vector<std::pair<int, int>> edges;
  for (int round = 0; round < n; ++round) {
    int u = -1;
    double u_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (in_tree[static_cast<std::size_t>(i)]) continue;
      if (best[static_cast<std::size_t>(i)] < u_best) {
        u_best = best[static_cast<std::size_t>(i)];
        u = i;
      }
    }
    in_tree[static_cast<std::size_t>(u)] = 1;
    if (from[static_cast<std::size_t>(u)] >= 0)
      edges.push_back({from[static_cast<std::size_t>(u)], u});
    for (int v = 0; v < n; ++v) {
      if (in_tree[static_cast<std::size_t>(v)]) continue;
      const double w = d[static_cast<std::size_t>(u) * n + v];
      if (w < best[static_cast<std::size_t>(v)]) {
        best[static_cast<std::size_t>(v)] = w;
        from[static_cast<std::size_t>(v)] = u;
      }
    }
  }
  return edges;
}

// Minimum-weight perfect matching on the odd-degree set. Exact subset DP up
// to 16 vertices (covers every exact-solver-sized instance); above that a
// greedy pairing keeps the construction running, at the price of the
// approximation guarantee.
inline std::vector<std::pair<int, int>> odd_matching(const std::vector<int>& odd,
                                                     const std::vector<double>& d, int n) {
  const int k = static_cast<int>(odd.size());
  std::vector<std::pair<int, int>> pairs;
  if (k == 0) return pairs;
  if (k <= 16) {
    const std::size_t masks = std::size_t{1} << k;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(masks, inf);
    std::vector<int> choice(masks, -1);
    dp[0] = 0;
    for (std::size_t mask = 1; mask < masks; ++mask) {
      int i = 0;
      while (!(mask >> i & 1)) ++i;
      for (int j = i + 1; j < k; ++j) {
        if (!(mask >> j & 1)) continue;
        const std::size_t rest = mask ^ (std::size_t{1} << i) ^ (std::size_t{1} << j);
        if (dp[rest] == inf) continue;
        const double cand =
            dp[rest] + d[static_cast<std::size_t>(odd[static_cast<std::size_t>(i)]) * n +
                         odd[static_cast<std::size_t>(j)]];
        if (cand < dp[mask]) {
          dp[mask] = cand;
          choice[mask] = j;
        }
      }
    }
    std::size_t mask = masks - 1;
    while (mask) {
      int i = 0;
      while (!(mask >> i & 1)) ++i;
      const int j = choice[mask];
      pairs.push_back({odd[static_cast<std::size_t>(i)], odd[static_cast<std::size_t>(j)]});
      mask ^= (std::size_t{1} << i) | (std::size_t{1} << j);
    }
    return pairs;
  }
  // greedy: repeatedly take the globally shortest unmatched pair
  std::vector<std::tuple<double, int, int>> cand;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      cand.push_back({d[static_cast<std::size_t>(odd[static_cast<std::size_t>(i)]) * n +
                       odd[static_cast<std::size_t>(j)]],
                      odd[static_cast<std::size_t>(i)], odd[static_cast<std::size_t>(j)]});
  std::sort(cand.begin(), cand.end());
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (const auto& [w, a, b] : cand) {
    if (used[static_cast<std::size_t>(a)] || used[static_cast<std::size_t>(b)]) continue;
    used[static_cast<std::size_t>(a)] = used[static_cast<std::size_t>(b)] = 1;
    pairs.push_back({a, b});
  }
  return pairs;
}

}  // namespace detail

// Christofides construction: MST + minimum-weight matching on the odd-degree
// vertices, Euler circuit, shortcut. With the exact matching (odd set <= 16)
// the result is within 1.5x of optimal.
inline Tour christofides(const TspInstance& inst) {
  const int n = inst.n();
  if (n < 2) throw ContractError("christofides: need n >= 2");
  const auto d = detail::distance_matrix(inst);
  if (n == 2) return {{0, 1}, 2 * d[1]};
  auto edges = detail::prim_mst(d, n);
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (const auto& [a, b] : edges) {
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
  }
  std::vector<int> odd;
  for (int i = 0; i < n; ++i)
    if (degree[static_cast<std::size_t>(i)] % 2) odd.push_back(i);
  for (const auto& pr : detail::odd_matching(odd, d, n)) edges.push_back(pr);

  // Hierholzer over the MST+matching multigraph, neighbors in sorted order
  std::vector<std::vector<std::pair<int, std::size_t>>> adj(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[static_cast<std::size_t>(edges[e].first)].push_back({edges[e].second, e});
    adj[static_cast<std::size_t>(edges[e].second)].push_back({edges[e].first, e});
  }
  for (auto& lst : adj) std::sort(lst.begin(), lst.end());
  std::vector<char> edge_used(edges.size(), 0);
  std::vector<std::size_t> next_at(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0}, circuit;
  while (!stack.empty()) {
    const int v = stack.back();
    auto& lst = adj[static_cast<std::size_t>(v)];
    std::size_t& cursor = next_at[static_cast<std::size_t>(v)];
    while (cursor < lst.size() && edge_used[lst[cursor].second]) ++cursor;
    if (cursor == lst.size()) {
      circuit.push_back(v);
      stack.pop_back();
    } else {
      edge_used[lst[cursor].second] = 1;
      stack.push_back(lst[cursor].first);
    }
  }

  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> tour;
  tour.reserve(static_cast<std::size_t>(n));
  for (int v : circuit)
    if (!seen[static_cast<std::size_t>(v)]) {
      seen[static_cast<std::size_t>(v)] = 1;
      tour.push_back(v);
    }
  return {tour, tour_length(inst, tour)};
}

// Canonical representative of the tour's equivalence class under rotation and
// reversal: the rotation/direction whose coordinate sequence is
// lexicographically smallest. Starting at the lexicographically smallest
// city coordinates falls out of the comparison; duplicate points resolve by
// comparing the subsequent cities.
inline std::vector<int> canonicalize_tour(const TspInstance& inst, const std::vector<int>& tour) {
  detail::check_tour(inst, tour);
  const int n = inst.n();
  auto key_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
    for (int i = 0; i < n; ++i) {
      const Point& pa = inst.points[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
      const Point& pb = inst.points[static_cast<std::size_t>(b[static_cast<std::size_t>(i)])];
      if (pa.x != pb.x) return pa.x < pb.x;
      if (pa.y != pb.y) return pa.y < pb.y;
    }
    return false;
  };
  std::vector<int> best = tour;
  std::vector<int> cand(static_cast<std::size_t>(n));
  for (int start = 0; start < n; ++start) {
    for (int dir : {1, -1}) {
      for (int i = 0; i < n; ++i)
        cand[static_cast<std::size_t>(i)] =
            tour[static_cast<std::size_t>(((start + dir * i) % n + n) % n)];
      if (key_less(cand, best)) best = cand;
    }
  }
  return best;
}

}  // namespace ordernet::tsp
