// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "driftopt/model.hpp"

namespace driftopt::testing {

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }
inline Vec scalar_vec(double v) { return Vec::Constant(1, v); }

inline CoefficientNode scalar_node(double sigma, double alpha, double beta, double b,
                                   double delta, double r) {
  CoefficientNode c;
  c.sigma = scalar(sigma);
  c.alpha = scalar(alpha);
  c.beta = scalar(beta);
  c.b = scalar(b);
  c.delta = scalar_vec(delta);
  c.r = r;
  return c;
}

inline MarketModel scalar_model(double sigma, double alpha, double beta, double b,
                                double delta, double r, double m0, double gamma0,
                                double horizon = 1.0) {
  return MarketModel::constant(horizon, scalar_node(sigma, alpha, beta, b, delta, r),
                               scalar_vec(m0), scalar(gamma0), scalar_vec(1.0));
}

// n = 1, T = 1, sigma 0.2, r 0.02, alpha 1, delta 0.05, beta 0.1, b 0,
// m0 0.05, gamma0 0.04.
inline MarketModel benchmark_model(double beta = 0.1) {
  return scalar_model(0.2, 1.0, beta, 0.0, 0.05, 0.02, 0.05, 0.04);
}

}  // namespace driftopt::testing
