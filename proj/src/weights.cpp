// Covariate-weight backends: selection-model (AIPSW), KuLSIF, entropy balancing.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "shiftval/error.hpp"
#include "shiftval/fitting.hpp"
#include "shiftval/linalg.hpp"
#include "shiftval/logistic.hpp"

namespace shiftval {

namespace {

std::vector<double> evaluate_on_training(const PooledDataset& data,
                                         const CovariateFn& w) {
  std::vector<double> out;
  out.reserve(data.n1());
  for (std::size_t i : data.stratum_indices(1)) out.push_back(w(data[i].x));
  return out;
}

std::vector<std::size_t> all_rows(const PooledDataset& data) {
  std::vector<std::size_t> rows(data.n());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

}  // namespace

WeightModel fit_weights_aipsw(const PooledDataset& data, double clip) {
  const Eigen::MatrixXd design = intercept_design(data, all_rows(data));
  Eigen::VectorXd labels(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    labels[static_cast<Eigen::Index>(i)] = data[i].s == 1 ? 1.0 : 0.0;
  }
  NewtonInfo fit = fit_logistic(design, labels);
  auto coef = std::make_shared<const std::vector<double>>(fit.coefficients);
  const double odds_scale =
      static_cast<double>(data.n1()) / static_cast<double>(data.n0());
  CovariateFn w = [coef, clip, odds_scale](Covariates x) {
    double eta = (*coef)[0];
    for (std::size_t j = 0; j < x.size(); ++j) eta += (*coef)[j + 1] * x[j];
    const double pi1 = std::clamp(sigmoid(eta), clip, 1.0 - clip);
    return odds_scale * (1.0 - pi1) / pi1;
  };
  WeightFitInfo info;
  info.iterations = fit.iterations;
  info.converged = fit.converged;
  info.coefficients = fit.coefficients;
  info.hyperparameters["clip"] = clip;
  auto training = evaluate_on_training(data, w);
  return WeightModel(WeightBackend::AIPSW, std::move(w), std::move(info),
                     std::move(training));
}

namespace {

struct KulsifState {
  std::vector<std::vector<double>> training;
  std::vector<std::vector<double>> calibration;
  std::vector<double> alpha;
  double calibration_coef = 0.0;  // 1 / (lambda n0)
  double bandwidth = 1.0;
  KernelFamily family = KernelFamily::Rbf;

  double operator()(Covariates x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < training.size(); ++i) {
      v += alpha[i] * kernel_value(family, bandwidth, training[i], x);
    }
    double c = 0.0;
    for (const auto& z : calibration) c += kernel_value(family, bandwidth, z, x);
    return v + calibration_coef * c;
  }
};

struct KulsifAssembly {
  std::shared_ptr<KulsifState> state;
  KulsifSystem system;
  double lambda = 0.0;
  double condition = 1.0;
};

KulsifAssembly assemble_kulsif(const PooledDataset& data, const KernelSpec& spec,
                               KulsifSign sign) {
  validate_kernel_spec(spec);
  KulsifAssembly out;
  auto state = std::make_shared<KulsifState>();
  state->family = spec.family;
  for (const auto& row : data.rows()) {
    (row.s == 1 ? state->training : state->calibration).push_back(row.x);
  }
  if (spec.bandwidth) {
    state->bandwidth = *spec.bandwidth;
  } else {
    std::vector<std::vector<double>> pooled;
    pooled.reserve(data.n());
    for (const auto& row : data.rows()) pooled.push_back(row.x);
    state->bandwidth = median_pairwise_distance(pooled);
  }
  const double n1 = static_cast<double>(data.n1());
  const double n0 = static_cast<double>(data.n0());
  out.lambda = spec.lambda ? *spec.lambda : 1.0 / std::min(n1, n0);
  const double lambda = out.lambda;

  const auto m1 = static_cast<Eigen::Index>(data.n1());
  const auto m0 = static_cast<Eigen::Index>(data.n0());
  Eigen::MatrixXd k11(m1, m1);
  for (Eigen::Index i = 0; i < m1; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k11(i, j) = k11(j, i) = kernel_value(
          state->family, state->bandwidth, state->training[static_cast<std::size_t>(i)],
          state->training[static_cast<std::size_t>(j)]);
    }
  }
  // Row sums of K10 (n1 x n0) equal K01' 1.
  Eigen::VectorXd k10_sums = Eigen::VectorXd::Zero(m1);
  for (Eigen::Index i = 0; i < m1; ++i) {
    for (Eigen::Index j = 0; j < m0; ++j) {
      k10_sums[i] += kernel_value(state->family, state->bandwidth,
                                  state->training[static_cast<std::size_t>(i)],
                                  state->calibration[static_cast<std::size_t>(j)]);
    }
  }
  const double rhs_sign = sign == KulsifSign::PrimalConsistent ? -1.0 : 1.0;
  out.system.lhs = k11 / n1;
  out.system.lhs.diagonal().array() += lambda;
  out.system.rhs = rhs_sign / (lambda * n0 * n1) * k10_sums;

  SpdSolution sol = solve_spd(out.system.lhs, out.system.rhs, "KuLSIF dual");
  // One round of iterative refinement.
  const Eigen::VectorXd residual = out.system.rhs - out.system.lhs * sol.x;
  sol.x += solve_spd(out.system.lhs, residual, "KuLSIF refinement").x;
  out.system.alpha = sol.x;
  out.condition = sol.condition_estimate;

  state->alpha.assign(sol.x.data(), sol.x.data() + sol.x.size());
  state->calibration_coef = 1.0 / (lambda * n0);
  out.state = std::move(state);
  return out;
}

}  // namespace

KulsifSystem kulsif_dual_system(const PooledDataset& data, const KernelSpec& spec,
                                KulsifSign sign) {
  return assemble_kulsif(data, spec, sign).system;
}

WeightModel fit_weights_kulsif(const PooledDataset& data, const KernelSpec& spec,
                               KulsifSign sign) {
  KulsifAssembly fit = assemble_kulsif(data, spec, sign);
  const double residual =
      (fit.system.lhs * fit.system.alpha - fit.system.rhs).lpNorm<Eigen::Infinity>();
  if (!(residual <= 1e-8)) {
    throw Error(ErrorCode::SolveFailure,
                "KuLSIF dual residual " + std::to_string(residual) + " exceeds 1e-8");
  }
  std::shared_ptr<const KulsifState> state = fit.state;
  CovariateFn raw = [state](Covariates x) { return (*state)(x); };

  WeightFitInfo info;
  info.hyperparameters["bandwidth"] = state->bandwidth;
  info.hyperparameters["lambda"] = fit.lambda;
  info.hyperparameters["sign"] = sign == KulsifSign::PrimalConsistent ? -1.0 : 1.0;
  info.dual_residual = residual;
  info.condition_number = fit.condition;
  std::vector<double> training;
  training.reserve(data.n1());
  for (const auto& x : state->training) {
    const double v = raw(x);
    if (v < 0.0) ++info.truncated;
    training.push_back(std::max(v, 0.0));
  }
  return WeightModel(WeightBackend::KuLSIF, std::move(raw), std::move(info),
                     std::move(training));
}

namespace {

// Dual of the entropy programme over the non-constant instruments:
//   f(l) = log sum_i exp(l'g_i) - l'm, gradient = sum_i W_i g_i - m.
struct EntropyDual {
  const Eigen::MatrixXd& g;  // n1 x k
  const Eigen::VectorXd& target;

  double value(const Eigen::VectorXd& lambda) const {
    const Eigen::VectorXd eta = g * lambda;
    const double shift = eta.maxCoeff();
    return shift + std::log((eta.array() - shift).exp().sum()) - lambda.dot(target);
  }

  Eigen::VectorXd weights(const Eigen::VectorXd& lambda) const {
    const Eigen::VectorXd eta = g * lambda;
    Eigen::VectorXd w = (eta.array() - eta.maxCoeff()).exp();
    return w / w.sum();
  }
};

}  // namespace

WeightModel fit_weights_entropy_balancing(const PooledDataset& data,
                                          const InstrumentSet& instruments,
                                          const EntropyBalanceOptions& options) {
  if (instruments.size() == 0) {
    throw Error(ErrorCode::InvalidConfig, "instrument set is empty");
  }
  const auto training_rows = data.stratum_indices(1);
  const auto calibration_rows = data.stratum_indices(0);
  const auto k = static_cast<Eigen::Index>(instruments.functions.size());
  const auto m1 = static_cast<Eigen::Index>(training_rows.size());
  const std::size_t offset = instruments.includes_constant ? 1 : 0;

  Eigen::MatrixXd g(m1, k);
  for (Eigen::Index i = 0; i < m1; ++i) {
    const Observation& row = data[training_rows[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < k; ++j) {
      g(i, j) = instruments.functions[static_cast<std::size_t>(j)](row.x);
    }
  }
  Eigen::VectorXd target = Eigen::VectorXd::Zero(k);
  for (std::size_t i : calibration_rows) {
    for (Eigen::Index j = 0; j < k; ++j) {
      target[j] += instruments.functions[static_cast<std::size_t>(j)](data[i].x);
    }
  }
  target /= static_cast<double>(calibration_rows.size());

  auto infeasible = [&](Eigen::Index j, const std::string& why) {
    throw Error(ErrorCode::InfeasibleBalance,
                why + " for instrument '" +
                    instruments.label(static_cast<std::size_t>(j) + offset) +
                    "' (index " + std::to_string(static_cast<std::size_t>(j) + offset) + ")");
  };
  for (Eigen::Index j = 0; j < k; ++j) {
    const double lo = g.col(j).minCoeff();
    const double hi = g.col(j).maxCoeff();
    if (!(target[j] > lo && target[j] < hi)) {
      infeasible(j, "calibration moment " + std::to_string(target[j]) +
                        " outside training range [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    }
  }

  const EntropyDual dual{g, target};
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
  WeightFitInfo info;
  info.converged = false;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd w = dual.weights(lambda);
    const Eigen::VectorXd mean = g.transpose() * w;
    grad = mean - target;
    info.iterations = iter;
    if (grad.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      info.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;
    const Eigen::MatrixXd centred = g.rowwise() - mean.transpose();
    const Eigen::MatrixXd hessian =
        centred.transpose() * w.asDiagonal() * centred;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      Eigen::Index worst;
      grad.cwiseAbs().maxCoeff(&worst);
      infeasible(worst, "dual Hessian degenerate (moment on the hull boundary or "
                        "collinear instruments)");
    }
    const Eigen::VectorXd step = -ldlt.solve(grad);
    const double f0 = dual.value(lambda);
    const double slope = grad.dot(step);
    // Close to the optimum the Armijo test drowns in rounding, so a full step
    // that shrinks the gradient is accepted as is.
    double t = 1.0;
    const Eigen::VectorXd full = lambda + step;
    const double full_residual =
        (g.transpose() * dual.weights(full) - target).lpNorm<Eigen::Infinity>();
    const bool armijo = dual.value(full) <= f0 + 1e-4 * slope;
    if (full_residual >= grad.lpNorm<Eigen::Infinity>() || (!armijo && full_residual > 1e-6)) {
      for (int halving = 0; halving < 60; ++halving) {
        if (dual.value(lambda + t * step) <= f0 + 1e-4 * t * slope) break;
        t *= 0.5;
      }
    }
    lambda += t * step;
  }
  if (!info.converged) {
    Eigen::Index worst;
    grad.cwiseAbs().maxCoeff(&worst);
    infeasible(worst, "Newton did not reach the balancing tolerance (residual " +
                          std::to_string(grad.lpNorm<Eigen::Infinity>()) + ")");
  }

  // Intercept chosen so that mean_{S=1} exp(lambda'g) = 1; then
  // w(x) = exp(lambda'g(x)) = n1 W(x).
  const Eigen::VectorXd eta = g * lambda;
  const double shift = eta.maxCoeff();
  const double log_mean =
      shift + std::log((eta.array() - shift).exp().sum() / static_cast<double>(m1));
  const double intercept = -log_mean;

  auto coef = std::make_shared<const std::vector<double>>(lambda.data(),
                                                          lambda.data() + lambda.size());
  auto funcs = std::make_shared<const std::vector<CovariateFn>>(instruments.functions);
  CovariateFn w = [coef, funcs, intercept](Covariates x) {
    double e = intercept;
    for (std::size_t j = 0; j < coef->size(); ++j) e += (*coef)[j] * (*funcs)[j](x);
    return std::exp(e);
  };

  if (instruments.includes_constant) info.coefficients.push_back(intercept);
  info.coefficients.insert(info.coefficients.end(), coef->begin(), coef->end());
  info.dual_residual = grad.lpNorm<Eigen::Infinity>();
  // Cache n1 * W_i exactly as the dual solution gives them.
  const Eigen::VectorXd weights = dual.weights(lambda) * static_cast<double>(m1);
  std::vector<double> training(weights.data(), weights.data() + weights.size());
  return WeightModel(WeightBackend::EntropyBalancing, std::move(w), std::move(info),
                     std::move(training));
}

}  // namespace shiftval
