#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pedel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Violation of a caller-facing contract (invalid argument, broken precondition,
/// reward outside [0,1], infeasible LMO output, ...). The CLI maps this to exit code 2.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure that should not occur on valid inputs (singular factorization
/// despite a positive-definite regularizer, non-convergence of an iterative scheme).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pedel
