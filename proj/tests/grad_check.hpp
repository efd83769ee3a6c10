#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "gaitview/nn.hpp"

// Central finite-difference comparison for hand-written backward passes.
// `tensors` pairs each perturbable value with its analytic gradient (already
// populated by one forward+backward); `loss` re-runs the forward pass.
inline double fd_max_rel_err(
    const std::vector<std::pair<gaitview::Mat<double>*, const gaitview::Mat<double>*>>& tensors,
    const std::function<double()>& loss, double eps = 1e-6) {
  double worst = 0.0;
  for (const auto& [value, grad] : tensors) {
    for (Eigen::Index i = 0; i < value->rows(); ++i) {
      for (Eigen::Index j = 0; j < value->cols(); ++j) {
        const double keep = (*value)(i, j);
        (*value)(i, j) = keep + eps;
        const double lp = loss();
        (*value)(i, j) = keep - eps;
        const double lm = loss();
        (*value)(i, j) = keep;
        const double fd = (lp - lm) / (2.0 * eps);
        const double an = (*grad)(i, j);
        const double denom = std::max(std::abs(fd) + std::abs(an), 1e-6);
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
  }
  return worst;
}

inline double fd_max_rel_err_params(
    const gaitview::ParamList<double>& params,
    const std::function<double()>& loss, double eps = 1e-6) {
  std::vector<std::pair<gaitview::Mat<double>*, const gaitview::Mat<double>*>> t;
  for (const auto& p : params) t.emplace_back(p.value, p.grad);
  return fd_max_rel_err(t, loss, eps);
}
