// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "driftopt/diagnostics.hpp"
#include "driftopt/errors.hpp"
#include "driftopt/filter.hpp"
#include "driftopt/model.hpp"
#include "support.hpp"

namespace driftopt {
namespace {

using testing::scalar;
using testing::scalar_model;
using testing::scalar_vec;

// Two assets with every coefficient moving linearly in time.
MarketModel moving_model() {
  MarketInputs in;
  in.horizon = 1.0;
  for (int k = 0; k <= 10; ++k) {
    const double t = 0.1 * k;
    CoefficientNode c;
    c.sigma = (Mat(2, 2) << 0.3 + 0.1 * t, 0.05, -0.02, 0.25).finished();
    c.alpha = (Mat(2, 2) << 1.0 + t, 0.2, 0.1, 0.8).finished();
    c.beta = (Mat(2, 2) << 0.1, 0.0, 0.02, 0.15 - 0.05 * t).finished();
    c.b = (Mat(2, 2) << 0.3 * t, 0.1, 0.0, -0.2).finished();
    c.delta = (Vec(2) << 0.05, 0.03 + 0.01 * t).finished();
    c.r = 0.01 + 0.01 * t;
    in.times.push_back(t);
    in.nodes.push_back(c);
  }
  in.m0 = (Vec(2) << 0.05, 0.04).finished();
  in.gamma0 = (Mat(2, 2) << 0.04, 0.01, 0.01, 0.03).finished();
  in.S0 = (Vec(2) << 1.0, 2.0).finished();
  return MarketModel(in);
}

TEST(MarketModel, RejectsInvalidInputs) {
  EXPECT_THROW(scalar_model(0.0, 1, 0.1, 0, 0.05, 0.02, 0.05, 0.04), DomainError);
  EXPECT_THROW(scalar_model(0.2, 1, 0.1, 0, 0.05, 0.02, 0.05, -0.01), DomainError);
  EXPECT_THROW(scalar_model(0.2, 1, 0.1, 0, 0.05, 0.02, 0.05, 0.04, -1.0), DomainError);
  auto c = testing::scalar_node(0.2, 1, 0.1, 0, 0.05, 0.02);
  EXPECT_THROW(MarketModel::constant(1.0, c, scalar_vec(0.05), scalar(0.04), scalar_vec(-1.0)),
               DomainError);
}

TEST(MarketModel, InterpolatesAndDiscounts) {
  const MarketModel m = moving_model();
  EXPECT_NEAR(m.at(0.25).sigma(0, 0), 0.325, 1e-14);
  EXPECT_NEAR(m.r(0.55), 0.0155, 1e-14);
  // int_0^t (0.01 + 0.01 s) ds
  EXPECT_NEAR(m.bond(0.7), std::exp(0.007 + 0.00245), 1e-13);
  EXPECT_THROW(m.at(1.5), DomainError);
}

TEST(MarketModel, QInvertsCovarianceProperty) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 4;
    CoefficientNode c;
    c.sigma = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c.sigma(i, j) += 0.3 * z(gen);
    c.alpha = Mat::Identity(n, n);
    c.beta = Mat::Identity(n, n) * 0.1;
    c.b = Mat::Zero(n, n);
    c.delta = Vec::Zero(n);
    MarketModel m = MarketModel::constant(1.0, c, Vec::Zero(n), Mat::Zero(n, n), Vec::Ones(n));
    for (double t : {0.0, 0.5, 1.0}) {
      const Mat s = m.sigma(t);
      EXPECT_LT((m.Q(t) * s * s.transpose() - Mat::Identity(n, n)).norm(), 1e-10);
    }
  }
}

TEST(FundamentalMatrix, ScalarExponential) {
  const MarketModel m = scalar_model(0.2, 1.0, 0.1, 0.0, 0.05, 0.0, 0.0, 0.0, 2.0);
  EXPECT_NEAR(fundamental_matrix(m, 0, 1.5, 0.5)(0, 0), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(fundamental_matrix(m, 0, 1.0, 0.0)(0, 0), 0.367879441171442, 1e-12);
}

TEST(FundamentalMatrix, IdentityOnDiagonal) {
  const MarketModel m = moving_model();
  for (int mode : {0, 1})
    for (double s : {0.0, 0.33, 1.0})
      EXPECT_EQ(fundamental_matrix(m, mode, s, s), Mat::Identity(2, 2));
}

TEST(FundamentalMatrix, TimeVaryingAlpha) {
  MarketInputs in;
  in.horizon = 1.0;
  for (int k = 0; k <= 4; ++k) {
    in.times.push_back(0.25 * k);
    in.nodes.push_back(testing::scalar_node(0.2, 0.25 * k, 0.1, 0.0, 0.0, 0.0));
  }
  in.m0 = scalar_vec(0.0);
  in.gamma0 = scalar(0.0);
  in.S0 = scalar_vec(1.0);
  EXPECT_NEAR(fundamental_matrix(MarketModel(in), 0, 1.0, 0.0)(0, 0), std::exp(-0.5), 1e-10);
}

TEST(FundamentalMatrix, SemigroupProperty) {
  const MarketModel m = moving_model();
  for (int mode : {0, 1}) {
    const Mat ts = fundamental_matrix(m, mode, 0.9, 0.4);
    const Mat su = fundamental_matrix(m, mode, 0.4, 0.15);
    const Mat tu = fundamental_matrix(m, mode, 0.9, 0.15);
    EXPECT_LT((ts * su - tu).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(FundamentalMatrix, DomainErrors) {
  const MarketModel m = moving_model();
  EXPECT_THROW(fundamental_matrix(m, 0, 1.2, 0.0), DomainError);
  EXPECT_THROW(fundamental_matrix(m, 0, 0.2, 0.5), DomainError);
  EXPECT_THROW(fundamental_matrix(m, 2, 0.5, 0.2), DomainError);
}

TEST(CovarianceKm, ZeroCases) {
  const MarketModel m = scalar_model(0.2, 1.0, 0.1, 0.0, 0.05, 0.0, 0.0, 0.0);
  for (int mode : {0, 1}) EXPECT_EQ(covariance_Km(m, mode, 0.7)(0, 0), 0.0);
  EXPECT_EQ(covariance_Km(moving_model(), 1, 0.0), Mat::Zero(2, 2));
}

TEST(CovarianceKm, UnitLoading) {
  const MarketModel m = scalar_model(1.0, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 0.0);
  EXPECT_NEAR(covariance_Km(m, 0, 0.5)(0, 0), 0.5, 1e-12);
}

TEST(CovarianceKm, SymmetricPositiveSemidefinite) {
  const MarketModel m = moving_model();
  for (int mode : {0, 1})
    for (double t : {0.1, 0.5, 1.0}) {
      const Mat k = covariance_Km(m, mode, t);
      EXPECT_EQ(k, k.transpose());
      EXPECT_GE(min_eigenvalue(k), -1e-12);
    }
}

TEST(CheckCov1, Examples) {
  const MarketModel flat = scalar_model(1.0, 1.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0);
  const Cov1Report ok = check_cov1(flat, 0.5);
  EXPECT_TRUE(ok.pass);
  EXPECT_NEAR(ok.worst_margin, 0.5, 1e-12);
  EXPECT_FALSE(check_cov1(flat, 1.5).pass);

  const MarketModel loaded = scalar_model(1.0, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 0.0);
  const Cov1Report r = check_cov1(loaded, 0.1);
  EXPECT_FALSE(r.pass);
  // Mode 0 has K~(t) = t; mode 1 grows like (e^{2t} - 1) / 2 and fails first.
  for (const Cov1Entry& e : r.entries) {
    if (e.mode != 0) continue;
    if (e.t < 0.89) {
      EXPECT_TRUE(e.pass) << "t = " << e.t;
    }
    if (e.t > 0.91) {
      EXPECT_FALSE(e.pass) << "t = " << e.t;
    }
  }
  for (const Cov1Entry& e : r.entries) {
    if (e.mode == 1 && e.t > 0.0) {
      EXPECT_LT(e.margin, 1.0 - 0.1 - e.t + 1e-9);
    }
  }
}

TEST(CheckCov1, MonotoneInEps) {
  const MarketModel m = moving_model();
  bool passed_larger = false;
  for (double eps = 0.2; eps >= 1e-4; eps *= 0.8) {
    const bool pass = check_cov1(m, eps).pass;
    if (passed_larger) {
      EXPECT_TRUE(pass) << "eps = " << eps;
    }
    passed_larger = passed_larger || pass;
  }
  EXPECT_TRUE(passed_larger);
}

TEST(MomentCondition, Examples) {
  const MarketModel m = scalar_model(1.0, 1.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0);
  const std::vector<double> times = {0.0, 0.5, 1.0};
  const std::vector<Mat> zero(3, scalar(0.0)), small(3, scalar(0.1));

  const MomentReport half = check_moment_condition(m, 0.5, 2.0, times, small, 0.01);
  EXPECT_TRUE(half.unconditional);
  EXPECT_TRUE(half.pass);

  EXPECT_DOUBLE_EQ(moment_kappa(2.0, 2.0, 1.0), 12.0);
  EXPECT_TRUE(check_moment_condition(m, 2.0, 2.0, times, zero, 0.01).pass);
  const MomentReport fail = check_moment_condition(m, 2.0, 2.0, times, small, 0.01);
  EXPECT_FALSE(fail.pass);
  EXPECT_NEAR(fail.worst_margin, 0.99 - 1.2, 1e-12);

  EXPECT_THROW(check_moment_condition(m, 2.0, 1.0, times, zero, 0.01), DomainError);
}

TEST(Diagnostics, CovariancePathsArePsd) {
  const MarketModel m = moving_model();
  const RiccatiSolution ric = solve_riccati(m, 1e-3);
  const ModelDiagnostics d = diagnose(m, ric);
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    EXPECT_LT((d.phi0[k] - fundamental_matrix(m, 0, d.times[k], 0.0)).norm(), 1e-8);
    for (const auto* path : {&d.K0, &d.K1, &d.Khat, &d.Ktilde}) {
      EXPECT_LT(((*path)[k] - (*path)[k].transpose()).norm(), 1e-14);
      EXPECT_GE(min_eigenvalue((*path)[k]), -1e-12);
    }
  }
}

}  // namespace
}  // namespace driftopt
