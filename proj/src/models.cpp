// Propensity and outcome regressions, kernels and instrument sets.

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

void validate_kernel_spec(const KernelSpec& spec) {
  if (spec.bandwidth && !(*spec.bandwidth > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "kernel bandwidth must be positive");
  }
  if (spec.lambda && !(*spec.lambda > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "ridge penalty must be positive");
  }
}

double kernel_value(KernelFamily family, double bandwidth, Covariates a,
                    Covariates b) {
  if (family == KernelFamily::Linear) {
    double dot = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) dot += a[j] * b[j];
    return dot;
  }
  double dist2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    dist2 += d * d;
  }
  return std::exp(-dist2 / (2.0 * bandwidth * bandwidth));
}

double median_pairwise_distance(const std::vector<std::vector<double>>& points) {
  constexpr std::size_t kMaxPoints = 1000;
  std::vector<const std::vector<double>*> picked;
  if (points.size() <= kMaxPoints) {
    for (const auto& p : points) picked.push_back(&p);
  } else {
    for (std::size_t k = 0; k < kMaxPoints; ++k) {
      picked.push_back(&points[k * points.size() / kMaxPoints]);
    }
  }
  std::vector<double> dists;
  dists.reserve(picked.size() * (picked.size() - 1) / 2);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    for (std::size_t j = i + 1; j < picked.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < picked[i]->size(); ++c) {
        const double d = (*picked[i])[c] - (*picked[j])[c];
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  }
  if (dists.empty()) return 1.0;
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  // Degenerate (all points equal) sets still need a usable bandwidth.
  return *mid > 0.0 ? *mid : 1.0;
}

InstrumentSet InstrumentSet::constant_and_coordinates(std::size_t p) {
  InstrumentSet set = coordinates(p);
  set.includes_constant = true;
  return set;
}

InstrumentSet InstrumentSet::coordinates(std::size_t p) {
  InstrumentSet set;
  set.includes_constant = false;
  for (std::size_t j = 0; j < p; ++j) {
    set.functions.push_back([j](Covariates x) { return x[j]; });
    set.labels.push_back("x_" + std::to_string(j + 1));
  }
  return set;
}

std::vector<double> InstrumentSet::evaluate(Covariates x) const {
  std::vector<double> g;
  g.reserve(size());
  if (includes_constant) g.push_back(1.0);
  for (const auto& f : functions) g.push_back(f(x));
  return g;
}

std::string InstrumentSet::label(std::size_t j) const {
  if (includes_constant) {
    if (j == 0) return "constant";
    --j;
  }
  return j < labels.size() ? labels[j] : "g_" + std::to_string(j + 1);
}

PropensityModel fit_propensity_logistic(const PooledDataset& data, int stratum,
                                        double clip) {
  std::vector<std::size_t> rows;
  for (std::size_t i : data.stratum_indices(stratum)) {
    if (data[i].observed()) rows.push_back(i);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::MissingStratum,
                "no observed treatments in stratum s=" + std::to_string(stratum));
  }
  const Eigen::MatrixXd design = intercept_design(data, rows);
  Eigen::VectorXd labels(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    labels[static_cast<Eigen::Index>(r)] = *data[rows[r]].a == 1 ? 1.0 : 0.0;
  }
  NewtonInfo info = fit_logistic(design, labels);
  auto coef = std::make_shared<const std::vector<double>>(info.coefficients);
  CovariateFn fn = [coef, clip](Covariates x) {
    double eta = (*coef)[0];
    for (std::size_t j = 0; j < x.size(); ++j) eta += (*coef)[j + 1] * x[j];
    return std::clamp(sigmoid(eta), clip, 1.0 - clip);
  };
  PropensityModel model = stratum == 1
                              ? PropensityModel(fn, std::nullopt, "logistic")
                              : PropensityModel(std::nullopt, fn, "logistic");
  model.set_fit_info(stratum, std::move(info));
  return model;
}

PropensityModel fit_propensity_all(const PooledDataset& data, double clip) {
  PropensityModel model = fit_propensity_logistic(data, 1, clip);
  bool calibration_observed = false;
  for (std::size_t i : data.stratum_indices(0)) {
    calibration_observed = calibration_observed || data[i].observed();
  }
  if (calibration_observed) {
    model = model.merged_with(fit_propensity_logistic(data, 0, clip));
  }
  return model;
}

namespace {

OutcomeModel fit_linear_outcome(const PooledDataset& data,
                                const std::vector<std::size_t>& rows) {
  const std::size_t p = data.p();
  const auto cols = static_cast<Eigen::Index>(2 * p + 2);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), cols);
  Eigen::VectorXd response(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Observation& obs = data[rows[r]];
    const auto i = static_cast<Eigen::Index>(r);
    const double a = static_cast<double>(*obs.a);
    design(i, 0) = 1.0;
    design(i, static_cast<Eigen::Index>(p + 1)) = a;
    for (std::size_t j = 0; j < p; ++j) {
      design(i, static_cast<Eigen::Index>(1 + j)) = obs.x[j];
      design(i, static_cast<Eigen::Index>(p + 2 + j)) = a * obs.x[j];
    }
    response[i] = *obs.y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) {
    throw Error(ErrorCode::RankDeficient,
                "outcome design rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(cols));
  }
  const Eigen::VectorXd beta = qr.solve(response);
  std::vector<double> coefficients(beta.data(), beta.data() + beta.size());
  auto coef = std::make_shared<const std::vector<double>>(coefficients);
  auto q = [coef, p](Covariates x, int a) {
    const std::vector<double>& b = *coef;
    double main = b[0];
    double effect = b[p + 1];
    for (std::size_t j = 0; j < p; ++j) {
      main += b[1 + j] * x[j];
      effect += b[p + 2 + j] * x[j];
    }
    return main + static_cast<double>(a) * effect;
  };
  return OutcomeModel(q, "linear", std::move(coefficients));
}

// One arm of the kernel ridge fit.
struct ArmFit {
  std::vector<std::vector<double>> centres;
  std::vector<double> coef;
  double offset = 0.0;
  double bandwidth = 1.0;
  KernelFamily family = KernelFamily::Rbf;

  double operator()(Covariates x) const {
    double v = offset;
    for (std::size_t i = 0; i < centres.size(); ++i) {
      v += coef[i] * kernel_value(family, bandwidth, centres[i], x);
    }
    return v;
  }
};

std::shared_ptr<const ArmFit> fit_arm(const PooledDataset& data,
                                      const std::vector<std::size_t>& rows,
                                      const KernelSpec& spec) {
  auto arm = std::make_shared<ArmFit>();
  arm->family = spec.family;
  for (std::size_t i : rows) arm->centres.push_back(data[i].x);
  arm->bandwidth = spec.bandwidth ? *spec.bandwidth
                                  : median_pairwise_distance(arm->centres);
  const auto m = static_cast<Eigen::Index>(rows.size());
  const double lambda = spec.lambda ? *spec.lambda : 1.0 / static_cast<double>(m);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) y[i] = *data[rows[static_cast<std::size_t>(i)]].y;
  arm->offset = y.mean();
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) =
          kernel_value(arm->family, arm->bandwidth, arm->centres[static_cast<std::size_t>(i)],
                       arm->centres[static_cast<std::size_t>(j)]);
    }
  }
  gram.diagonal().array() += static_cast<double>(m) * lambda;
  const SpdSolution sol = solve_spd(gram, y.array() - arm->offset, "kernel ridge");
  arm->coef.assign(sol.x.data(), sol.x.data() + sol.x.size());
  return arm;
}

}  // namespace

OutcomeModel fit_outcome_regression(const PooledDataset& data, OutcomeMethod method,
                                    const std::optional<KernelSpec>& spec) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data[i].observed()) rows.push_back(i);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::NoObservedOutcomes, "no rows with observed (a, y)");
  }
  if (method == OutcomeMethod::Linear) return fit_linear_outcome(data, rows);

  if (!spec) {
    throw Error(ErrorCode::InvalidConfig, "kernel ridge needs a KernelSpec");
  }
  validate_kernel_spec(*spec);
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
  for (std::size_t i : rows) (*data[i].a == 1 ? treated : control).push_back(i);
  if (treated.empty() || control.empty()) {
    throw Error(ErrorCode::NoObservedOutcomes, "kernel ridge needs both arms observed");
  }
  auto f_treated = fit_arm(data, treated, *spec);
  auto f_control = fit_arm(data, control, *spec);
  return OutcomeModel(
      [f_treated, f_control](Covariates x, int a) {
        return a == 1 ? (*f_treated)(x) : (*f_control)(x);
      },
      "kernel_ridge");
}

}  // namespace shiftval
