#pragma once

#include <Eigen/Dense>
#include <string_view>
#include <vector>

#include "shiftval/data.hpp"

namespace shiftval {

struct SpdSolution {
  Eigen::VectorXd x;
  double condition_estimate = 1.0;  // 1 / rcond from the Cholesky factor
};

// Dense Cholesky solve of a symmetric positive-definite system. Logs a
// warning when the condition estimate exceeds 1e12; throws SolveFailure when
// the factorisation breaks down.
SpdSolution solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                      std::string_view what);

// Covariates of the selected rows as an (|rows| x p) matrix.
Eigen::MatrixXd covariate_matrix(const PooledDataset& data,
                                 const std::vector<std::size_t>& rows);

// [1, x] design for the selected rows.
Eigen::MatrixXd intercept_design(const PooledDataset& data,
                                 const std::vector<std::size_t>& rows);

}  // namespace shiftval
