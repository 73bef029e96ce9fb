#include "shiftval/logistic.hpp"

#include <cmath>

#include "shiftval/error.hpp"

namespace shiftval {

namespace {

// log(1 + e^eta) without overflow.
double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace

double logistic_log_likelihood(const Eigen::MatrixXd& design,
                               const Eigen::VectorXd& labels,
                               const Eigen::VectorXd& coefficients) {
  const Eigen::VectorXd eta = design * coefficients;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += labels[i] * eta[i] - softplus(eta[i]);
  }
  return ll;
}

NewtonInfo fit_logistic(const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& labels,
                        const LogisticOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (n == 0) throw Error(ErrorCode::RankDeficient, "no rows to fit");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < k) {
    throw Error(ErrorCode::RankDeficient,
                "design rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(k) + " columns");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = logistic_log_likelihood(design, labels, beta);
  NewtonInfo info;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    info.iterations = iter;
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n);
    Eigen::VectorXd weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      weight[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd score = design.transpose() * (labels - prob);
    const Eigen::MatrixXd hessian =
        design.transpose() * weight.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff()) {
      throw Error(ErrorCode::Separation,
                  "information matrix degenerate at iteration " +
                      std::to_string(iter));
    }
    const Eigen::VectorXd step = ldlt.solve(score);

    double t = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double candidate_ll = logistic_log_likelihood(design, labels, candidate);
    for (int halving = 0; halving < 40 && !(candidate_ll >= ll); ++halving) {
      t *= 0.5;
      candidate = beta + t * step;
      candidate_ll = logistic_log_likelihood(design, labels, candidate);
    }
    beta = candidate;
    ll = candidate_ll;

    // A perfect fit means the data are separable and the MLE is at infinity.
    if (-2.0 * ll < 1e-8 * static_cast<double>(n)) {
      throw Error(ErrorCode::Separation, "deviance collapsed to zero");
    }
    const double scale = std::max(1.0, beta.lpNorm<Eigen::Infinity>());
    if ((t * step).lpNorm<Eigen::Infinity>() <= options.step_tolerance * scale) {
      info.converged = true;
      break;
    }
  }
  if (!info.converged) {
    throw Error(ErrorCode::Separation,
                "Newton did not converge in " +
                    std::to_string(options.max_iterations) + " iterations");
  }
  info.coefficients.assign(beta.data(), beta.data() + beta.size());
  return info;
}

}  // namespace shiftval
