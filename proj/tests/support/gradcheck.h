#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "avatar/tensor.h"

namespace testsupport {

// Worst-case discrepancy between the analytic gradient of loss_fn and central
// finite differences, taken over every element of every tensor in params.
// loss_fn must rebuild its graph from params on each call. The returned error
// is relative for large gradients and absolute for gradients below 1.
inline double fd_max_rel_err(const std::function<avatar::Tensor()>& loss_fn,
                             std::vector<avatar::Tensor> params,
                             double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  avatar::backward(loss_fn());

  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic =
        p.has_grad() ? p.grad() : std::vector<double>(p.data().size(), 0.0);
    std::vector<double>& x = p.data();
    for (size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      double up, dn;
      {
        avatar::NoGradGuard ng;
        x[i] = keep + h;
        up = loss_fn().item();
        x[i] = keep - h;
        dn = loss_fn().item();
      }
      x[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double denom =
          std::max({1.0, std::fabs(fd), std::fabs(analytic[i])});
      worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
    }
  }
  return worst;
}

}  // namespace testsupport
