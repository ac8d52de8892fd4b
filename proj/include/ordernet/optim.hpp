#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ordernet/tensor.hpp"

namespace ordernet {

// Ordered collection of named learnable tensors. Registration order is the
// canonical order everywhere: optimizer state, initialization streams and
// checkpoint manifests all follow it, which keeps runs reproducible.
template <typename S>
class ParamStore {
 public:
  Tensor<S>& add(const std::string& name, Tensor<S> t) {
    if (index_.count(name)) detail::fail("ParamStore: duplicate parameter '" + name + "'");
    t.set_requires_grad(true);
    index_.emplace(name, items_.size());
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) detail::fail("ParamStore: unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor<S>>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor<S>>>& items() { return items_; }
  std::size_t size() const { return items_.size(); }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<S>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Rescales all gradients in place so their global L2 norm is at most
// max_norm; returns the pre-clip norm.
template <typename S>
double clip_grad_norm(ParamStore<S>& params, double max_norm) {
  double sq = 0;
  for (auto& [name, t] : params.items())
    for (S g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const S factor = static_cast<S>(max_norm / norm);
    for (auto& [name, t] : params.items())
      for (S& g : t.node()->grad) g *= factor;
  }
  return norm;
}

template <typename S>
struct AdamConfig {
  S lr = S(1e-3);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

// Adam with bias correction. Holds first/second moment buffers parallel to
// the store's registration order; step() consumes and zeroes the gradients.
template <typename S>
class Adam {
 public:
  explicit Adam(const ParamStore<S>& params, AdamConfig<S> cfg = {}) : cfg_(cfg) {
    for (const auto& [name, t] : params.items()) {
      m_.emplace_back(t.numel(), S(0));
      v_.emplace_back(t.numel(), S(0));
    }
  }

  void step(ParamStore<S>& params) {
    if (params.size() != m_.size())
      detail::fail("Adam: store has " + std::to_string(params.size()) +
                   " parameters, state has " + std::to_string(m_.size()));
    ++t_;
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(cfg_.beta1), t_));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(cfg_.beta2), t_));
    for (std::size_t p = 0; p < m_.size(); ++p) {
      auto& [name, tensor] = params.items()[p];
      auto& node = *tensor.node();
      if (node.grad.size() != node.data.size())
        detail::fail("Adam: no gradient for parameter '" + name + "'");
      S* w = node.data.data();
      S* g = node.grad.data();
      S* m = m_[p].data();
      S* v = v_[p].data();
      for (std::size_t i = 0; i < node.data.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (S(1) - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (S(1) - cfg_.beta2) * g[i] * g[i];
        const S mhat = m[i] / bc1;
        const S vhat = v[i] / bc2;
        w[i] -= cfg_.lr * mhat / (static_cast<S>(std::sqrt(static_cast<double>(vhat))) + cfg_.eps);
        g[i] = S(0);
      }
    }
  }

  long step_count() const { return t_; }
  const AdamConfig<S>& config() const { return cfg_; }

 private:
  AdamConfig<S> cfg_;
  long t_ = 0;
  std::vector<std::vector<S>> m_, v_;
};

}  // namespace ordernet
