#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "ordernet/tensor.hpp"

namespace ordernet::testing {

// |a - b| <= rtol * max(|a|, |b|) or |a - b| <= atol. The absolute floor
// covers gradients that are legitimately ~0, where relative error is
// ill-conditioned against finite-difference noise.
inline bool close(double a, double b, double rtol, double atol) {
  const double diff = std::abs(a - b);
  return diff <= rtol * std::max(std::abs(a), std::abs(b)) || diff <= atol;
}

// Central-difference gradient check in double precision. `make_loss` must
// rebuild the graph from the current contents of `leaves` on every call and
// return a scalar. Returns the worst relative deviation observed.
inline double gradcheck(std::vector<Tensor<double>> leaves,
                        const std::function<Tensor<double>()>& make_loss, double h = 1e-5,
                        double rtol = 1e-4, double atol = 1e-7) {
  for (auto& leaf : leaves) leaf.zero_grad();
  auto loss = make_loss();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& data = leaves[li].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      double up, down;
      {
        NoGradGuard ng;
        data[i] = keep + h;
        up = make_loss().item();
        data[i] = keep - h;
        down = make_loss().item();
        data[i] = keep;
      }
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[li][i];
      const double denom = std::max(std::abs(a), std::abs(numeric));
      const double rel = denom > 0 ? std::abs(a - numeric) / denom : 0.0;
      if (!close(a, numeric, rtol, atol)) {
        ADD_FAILURE() << "gradcheck: leaf " << li << " element " << i << ": analytic " << a
                      << " vs numeric " << numeric;
        return rel;
      }
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace ordernet::testing
