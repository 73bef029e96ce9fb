#pragma once

#include <Eigen/Dense>

#include "shiftval/nuisance.hpp"

namespace shiftval {

struct LogisticOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
};

// Maximum-likelihood logistic regression of `labels` (0/1) on `design` by
// Newton-Raphson with step halving. The design supplies its own intercept
// column.
//
// Throws RankDeficient when the design lacks full column rank and Separation
// when the likelihood has no finite maximiser (the deviance collapses to 0,
// the Hessian degenerates, or Newton fails to settle).
NewtonInfo fit_logistic(const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& labels,
                        const LogisticOptions& options = {});

double logistic_log_likelihood(const Eigen::MatrixXd& design,
                               const Eigen::VectorXd& labels,
                               const Eigen::VectorXd& coefficients);

inline double sigmoid(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                    : std::exp(eta) / (1.0 + std::exp(eta));
}

}  // namespace shiftval
