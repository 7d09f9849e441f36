// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

namespace driftopt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const Mat& m);

// Symmetric PSD square root (via eigen-decomposition, negative eigenvalues
// clipped to zero). Used to sample N(m, C) for semidefinite C.
Mat psd_sqrt(const Mat& m);

// Linear blend a + w (b - a), elementwise.
inline Mat lerp(const Mat& a, const Mat& b, double w) { return a + w * (b - a); }

}  // namespace driftopt
