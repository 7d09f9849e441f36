// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace driftopt {

// Input outside the mathematical domain of an operation (bad time, bad
// dimension, multiplier outside the admissible set, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The Lagrange multiplier search could not satisfy the budget constraint.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical solver refused to continue (lost PSD, unsupported dimension,
// linear solve did not converge).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration or artifact file is missing, unreadable or malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace driftopt
