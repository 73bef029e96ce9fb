#include "shiftval/linalg.hpp"

#include <spdlog/spdlog.h>

#include <string>

#include "shiftval/error.hpp"

namespace shiftval {

SpdSolution solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                      std::string_view what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SolveFailure,
                std::string(what) + ": matrix is not positive definite");
  }
  SpdSolution out;
  const double rcond = llt.rcond();
  out.condition_estimate = rcond > 0.0 ? 1.0 / rcond : INFINITY;
  if (out.condition_estimate > 1e12) {
    spdlog::warn("{}: condition estimate {:.3e} exceeds 1e12", what,
                 out.condition_estimate);
  }
  out.x = llt.solve(b);
  if (!out.x.allFinite()) {
    throw Error(ErrorCode::SolveFailure, std::string(what) + ": non-finite solution");
  }
  return out;
}

Eigen::MatrixXd covariate_matrix(const PooledDataset& data,
                                 const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(data.p()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& x = data[rows[r]].x;
    for (std::size_t j = 0; j < x.size(); ++j) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = x[j];
    }
  }
  return m;
}

Eigen::MatrixXd intercept_design(const PooledDataset& data,
                                 const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(data.p() + 1));
  m.col(0).setOnes();
  m.rightCols(static_cast<Eigen::Index>(data.p())) = covariate_matrix(data, rows);
  return m;
}

}  // namespace shiftval
