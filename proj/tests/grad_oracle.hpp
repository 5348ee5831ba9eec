// Central finite differences of the mean cross-entropy loss with respect to
// every weight and bias, evaluated through the public forward path only.
// Independent of the backprop code it checks.
#pragma once

#include <cstddef>
#include <vector>

#include "spectrain/matrix.hpp"
#include "spectrain/network.hpp"

namespace oracle {

inline spectrain::MlpParams fd_gradients(const spectrain::MlpParams& params,
                                         const spectrain::Matrix& x,
                                         const std::vector<int>& labels, double h = 1e-5) {
  spectrain::MlpParams work = params;
  spectrain::MlpParams grads = params;
  auto diff = [&](double& p, double& g) {
    const double orig = p;
    p = orig + h;
    const double up = spectrain::evaluate_loss(work, x, labels);
    p = orig - h;
    const double dn = spectrain::evaluate_loss(work, x, labels);
    p = orig;
    g = (up - dn) / (2.0 * h);
  };
  for (std::size_t l = 0; l < work.weights.size(); ++l) {
    for (std::size_t i = 0; i < work.weights[l].size(); ++i) {
      diff(work.weights[l].data()[i], grads.weights[l].data()[i]);
    }
    for (std::size_t i = 0; i < work.biases[l].size(); ++i) {
      diff(work.biases[l][i], grads.biases[l][i]);
    }
  }
  return grads;
}

// True when every entry pair agrees within rel_tol relative with an absolute
// floor, the usual gradient-check metric.
inline bool gradients_close(const spectrain::MlpParams& a, const spectrain::MlpParams& b,
                            double rel_tol, double abs_floor, double* worst = nullptr) {
  double max_err = 0.0;
  bool ok = true;
  auto check = [&](double x, double y) {
    const double scale = std::max(std::abs(x), std::abs(y));
    const double err = std::abs(x - y);
    const double bound = std::max(abs_floor, rel_tol * scale);
    max_err = std::max(max_err, scale > 0 ? err / std::max(scale, abs_floor) : err);
    if (err > bound) ok = false;
  };
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].size(); ++i) {
      check(a.weights[l].data()[i], b.weights[l].data()[i]);
    }
    for (std::size_t i = 0; i < a.biases[l].size(); ++i) {
      check(a.biases[l][i], b.biases[l][i]);
    }
  }
  if (worst) *worst = max_err;
  return ok;
}

}  // namespace oracle
