// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace driftopt {

double min_eigenvalue(const Mat& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Mat psd_sqrt(const Mat& m) {
  if (m.rows() == 1) return Mat::Constant(1, 1, std::sqrt(std::max(0.0, m(0, 0))));
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace driftopt
