#include "shiftval/estimators.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "shiftval/error.hpp"

namespace shiftval {

std::string_view to_string(Estimand estimand) {
  return estimand == Estimand::Value ? "theta" : "theta1";
}

Estimand parse_estimand(std::string_view text) {
  if (text == "theta" || text == "value") return Estimand::Value;
  if (text == "theta1" || text == "contrast") return Estimand::Contrast;
  throw Error(ErrorCode::ParseError, "unknown estimand '" + std::string(text) + "'");
}

std::string label(const EifVariant& variant) {
  return std::string(to_string(variant.estimand)) + "/" +
         std::string(to_string(variant.kind));
}

std::string_view to_string(IdentificationForm form) {
  switch (form) {
    case IdentificationForm::CalibrationMean: return "calibration_mean";
    case IdentificationForm::WeightedPooled: return "weighted_pooled";
    case IdentificationForm::WeightedTraining: return "weighted_training";
  }
  return "unknown";
}

std::pair<double, double> wald_ci(double estimate, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidLevel, "confidence level must lie in (0, 1)");
  }
  if (se == 0.0) return {estimate, estimate};
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 0.5 * (1.0 + level));
  return {estimate - z * se, estimate + z * se};
}

namespace {

// Q(x, d) or C(x) d(x).
double target_term(const OutcomeModel& q, Covariates x, int d, Estimand estimand) {
  return estimand == Estimand::Value ? q.q(x, d) : q.cte(x) * static_cast<double>(d);
}

// 1[d = A] or d A.
double arm_indicator(int d, int a, Estimand estimand) {
  if (estimand == Estimand::Value) return d == a ? 1.0 : 0.0;
  return static_cast<double>(d * a);
}

double checked_propensity(const NuisanceSet& nuisances, int a, Covariates x, int s) {
  const double pi = nuisances.propensity.prob(a, x, s);
  if (!(pi > 0.0) || !std::isfinite(pi)) {
    throw Error(ErrorCode::DegenerateDenominator,
                "propensity " + std::to_string(pi) + " in stratum s=" + std::to_string(s));
  }
  return pi;
}

void require_outcome(const Observation& obs, const char* why) {
  if (!obs.observed()) throw Error(ErrorCode::MissingField, why);
}

// w or 1 times ind / pi_A(A|x,s) times (Y - Q(x, A)).
double residual_term(const Observation& obs, const NuisanceSet& nuisances, int d,
                     Estimand estimand, double weight) {
  const int a = *obs.a;
  const double pi = checked_propensity(nuisances, a, obs.x, obs.s);
  const double indicator = arm_indicator(d, a, estimand);
  return weight * indicator / pi * (*obs.y - nuisances.outcome.q(obs.x, a));
}

// Per-row summand of the efficient estimator such that
//   theta_hat = mean_{S=1} term + mean_{S=0} term.
double estimator_term(const Observation& obs, const NuisanceSet& nuisances,
                      const Policy& policy, const EifVariant& variant,
                      double training_share, double calibration_share) {
  const int d = policy(obs.x);
  if (obs.s == 1) {
    require_outcome(obs, "training row lacks (a, y)");
    const double term =
        residual_term(obs, nuisances, d, variant.estimand, nuisances.weight(obs.x));
    return variant.kind == DatasetKind::Type1 ? training_share * term : term;
  }
  const double centre = target_term(nuisances.outcome, obs.x, d, variant.estimand);
  if (variant.kind == DatasetKind::Type2) return centre;
  require_outcome(obs, "Type1 variant needs calibration (a, y)");
  return calibration_share * residual_term(obs, nuisances, d, variant.estimand, 1.0) +
         centre;
}

double sample_sd(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

void finish_report(EstimateReport& report, double level) {
  report.se = sample_sd(report.influence) / std::sqrt(static_cast<double>(report.n));
  report.level = level;
  std::tie(report.ci_lower, report.ci_upper) = wald_ci(report.estimate, report.se, level);
}

// Shared by the plain and cross-fitted estimators so both reduce identically.
EstimateReport estimate_with_row_nuisances(const PooledDataset& data,
                                           const std::vector<const NuisanceSet*>& per_row,
                                           const Policy& policy, const EifVariant& variant,
                                           double level) {
  const double n = static_cast<double>(data.n());
  const double training_share = static_cast<double>(data.n1()) / n;
  const double calibration_share = static_cast<double>(data.n0()) / n;
  double training_sum = 0.0;
  double calibration_sum = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double term = estimator_term(data[i], *per_row[i], policy, variant,
                                       training_share, calibration_share);
    (data[i].s == 1 ? training_sum : calibration_sum) += term;
  }
  EstimateReport report;
  report.variant = variant;
  report.method = "efficient";
  report.n = data.n();
  report.n1 = data.n1();
  report.n0 = data.n0();
  report.estimate = training_sum / static_cast<double>(data.n1()) +
                    calibration_sum / static_cast<double>(data.n0());

  report.influence.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    NuisanceSet local = *per_row[i];
    local.rho_hat = training_share;
    report.influence[i] = eif_contribution(data[i], local, policy, variant, report.estimate);
  }
  finish_report(report, level);
  return report;
}

NuisanceProvenance provenance_of(const NuisanceSet& nuisances) {
  NuisanceProvenance p;
  p.oracle = nuisances.oracle;
  p.weights = std::string(to_string(nuisances.weight.backend()));
  p.propensity = nuisances.propensity.source();
  p.outcome = nuisances.outcome.source();
  return p;
}

}  // namespace

double eif_contribution(const Observation& obs, const NuisanceSet& nuisances,
                        const Policy& policy, const EifVariant& variant,
                        double theta_ref) {
  const double rho = nuisances.rho_hat;
  if (!(rho > 0.0 && rho < 1.0)) {
    throw Error(ErrorCode::DegenerateDenominator, "rho_hat outside (0, 1)");
  }
  const int d = policy(obs.x);
  if (obs.s == 1) {
    require_outcome(obs, "training row lacks (a, y)");
    const double w = nuisances.weight(obs.x);
    const double scale = variant.kind == DatasetKind::Type2 ? 1.0 / rho : 1.0;
    return residual_term(obs, nuisances, d, variant.estimand, w * scale);
  }
  const double centred =
      (target_term(nuisances.outcome, obs.x, d, variant.estimand) - theta_ref) / (1.0 - rho);
  if (variant.kind == DatasetKind::Type2) return centred;
  require_outcome(obs, "Type1 influence function needs calibration (a, y)");
  return residual_term(obs, nuisances, d, variant.estimand, 1.0) + centred;
}

EstimateReport estimate_efficient(const PooledDataset& data, const NuisanceSet& nuisances,
                                  const Policy& policy, Estimand estimand,
                                  std::optional<DatasetKind> kind, double level) {
  const EifVariant variant{estimand, kind.value_or(data.kind())};
  const std::vector<const NuisanceSet*> per_row(data.n(), &nuisances);
  EstimateReport report = estimate_with_row_nuisances(data, per_row, policy, variant, level);
  report.nuisance = provenance_of(nuisances);
  return report;
}

EstimateReport estimate_plugin_identification(const PooledDataset& data,
                                              const NuisanceSet& nuisances,
                                              const Policy& policy, Estimand estimand,
                                              IdentificationForm form, double level) {
  const double n = static_cast<double>(data.n());
  const double rho = static_cast<double>(data.n1()) / n;
  std::vector<double> target(data.n());
  std::vector<double> weight(data.n(), 1.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Observation& obs = data[i];
    target[i] = target_term(nuisances.outcome, obs.x, policy(obs.x), estimand);
    if (obs.s == 1 && form != IdentificationForm::CalibrationMean) {
      weight[i] = nuisances.weight(obs.x);
    }
  }

  EstimateReport report;
  report.variant = {estimand, data.kind()};
  report.method = "plugin:" + std::string(to_string(form));
  report.nuisance = provenance_of(nuisances);
  report.n = data.n();
  report.n1 = data.n1();
  report.n0 = data.n0();
  report.influence.assign(data.n(), 0.0);

  double sum = 0.0;
  switch (form) {
    case IdentificationForm::CalibrationMean: {
      for (std::size_t i = 0; i < data.n(); ++i) {
        if (data[i].s == 0) sum += target[i];
      }
      report.estimate = sum / static_cast<double>(data.n0());
      for (std::size_t i = 0; i < data.n(); ++i) {
        if (data[i].s == 0) {
          report.influence[i] = (target[i] - report.estimate) / (1.0 - rho);
        }
      }
      break;
    }
    case IdentificationForm::WeightedTraining: {
      for (std::size_t i = 0; i < data.n(); ++i) {
        if (data[i].s == 1) sum += weight[i] * target[i];
      }
      report.estimate = sum / static_cast<double>(data.n1());
      for (std::size_t i = 0; i < data.n(); ++i) {
        if (data[i].s == 1) {
          report.influence[i] = (weight[i] * target[i] - report.estimate) / rho;
        }
      }
      break;
    }
    case IdentificationForm::WeightedPooled: {
      for (std::size_t i = 0; i < data.n(); ++i) sum += weight[i] * target[i];
      report.estimate = sum / n;
      for (std::size_t i = 0; i < data.n(); ++i) {
        report.influence[i] = weight[i] * target[i] - report.estimate;
      }
      break;
    }
  }
  finish_report(report, level);
  return report;
}

std::string_view to_string(PropensitySource source) {
  return source == PropensitySource::Oracle ? "oracle" : "logistic";
}

std::string_view to_string(OutcomeSource source) {
  switch (source) {
    case OutcomeSource::Oracle: return "oracle";
    case OutcomeSource::Linear: return "linear";
    case OutcomeSource::KernelRidge: return "kernel_ridge";
  }
  return "unknown";
}

PropensitySource parse_propensity_source(std::string_view text) {
  if (text == "oracle") return PropensitySource::Oracle;
  if (text == "logistic") return PropensitySource::Logistic;
  throw Error(ErrorCode::ParseError, "unknown propensity source '" + std::string(text) + "'");
}

OutcomeSource parse_outcome_source(std::string_view text) {
  if (text == "oracle") return OutcomeSource::Oracle;
  if (text == "linear") return OutcomeSource::Linear;
  if (text == "kernel_ridge") return OutcomeSource::KernelRidge;
  throw Error(ErrorCode::ParseError, "unknown outcome source '" + std::string(text) + "'");
}

NuisanceSet fit_nuisances(const PooledDataset& fit_data, const FitRecipe& recipe) {
  const bool needs_oracle = recipe.weights == WeightBackend::Oracle ||
                            recipe.propensity == PropensitySource::Oracle ||
                            recipe.outcome == OutcomeSource::Oracle;
  if (needs_oracle && !recipe.oracle) {
    throw Error(ErrorCode::InvalidConfig, "recipe uses oracle nuisances but none supplied");
  }

  std::optional<WeightModel> weight;
  switch (recipe.weights) {
    case WeightBackend::Oracle: weight = recipe.oracle->weight; break;
    case WeightBackend::AIPSW: weight = fit_weights_aipsw(fit_data, recipe.clip); break;
    case WeightBackend::KuLSIF:
      weight = fit_weights_kulsif(fit_data, recipe.weight_kernel, recipe.kulsif_sign);
      break;
    case WeightBackend::EntropyBalancing:
      weight = fit_weights_entropy_balancing(
          fit_data, recipe.instruments.value_or(
                        InstrumentSet::constant_and_coordinates(fit_data.p())));
      break;
  }

  PropensityModel propensity = recipe.propensity == PropensitySource::Oracle
                                   ? recipe.oracle->propensity
                                   : fit_propensity_all(fit_data, recipe.clip);

  std::optional<OutcomeModel> outcome;
  switch (recipe.outcome) {
    case OutcomeSource::Oracle: outcome = recipe.oracle->outcome; break;
    case OutcomeSource::Linear:
      outcome = fit_outcome_regression(fit_data, OutcomeMethod::Linear);
      break;
    case OutcomeSource::KernelRidge:
      outcome = fit_outcome_regression(fit_data, OutcomeMethod::KernelRidge,
                                       recipe.outcome_kernel);
      break;
  }
  const bool all_oracle = recipe.fully_oracle();
  return NuisanceSet(std::move(*weight), std::move(propensity), std::move(*outcome),
                     fit_data.rho_hat(), all_oracle && recipe.oracle->oracle);
}

EstimateReport cross_fit_estimate(const PooledDataset& data, const FoldAssignment& folds,
                                  const FitRecipe& recipe, const Policy& policy,
                                  Estimand estimand, std::optional<DatasetKind> kind,
                                  double level) {
  if (folds.bag_of.size() != data.n()) {
    throw Error(ErrorCode::DimensionMismatch, "fold assignment does not match the dataset");
  }
  const EifVariant variant{estimand, kind.value_or(data.kind())};
  std::vector<NuisanceSet> fitted;
  fitted.reserve(static_cast<std::size_t>(folds.k));
  std::vector<BagDiagnostics> bags;
  for (int bag = 1; bag <= folds.k; ++bag) {
    const auto rows = folds.out_of_bag(bag);
    try {
      PooledDataset fit_data = data.subset(rows);
      if (variant.kind == DatasetKind::Type2) fit_data = fit_data.as_type2();
      fitted.push_back(fit_nuisances(fit_data, recipe));
    } catch (const Error& e) {
      throw Error(e.code(), "bag " + std::to_string(bag) + ": " + e.what());
    }
    const NuisanceSet& eta = fitted.back();
    BagDiagnostics diag;
    diag.bag = bag;
    diag.fit_rows = rows.size();
    diag.weight = eta.weight.info();
    diag.propensity_training = eta.propensity.fit_info(1);
    diag.propensity_calibration = eta.propensity.fit_info(0);
    diag.outcome_coefficients = eta.outcome.coefficients();
    bags.push_back(std::move(diag));
  }
  std::vector<const NuisanceSet*> per_row(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    per_row[i] = &fitted[static_cast<std::size_t>(folds.bag_of[i] - 1)];
  }
  EstimateReport report = estimate_with_row_nuisances(data, per_row, policy, variant, level);
  report.method = "crossfit";
  report.nuisance = provenance_of(fitted.front());
  report.nuisance.crossfit_k = folds.k;
  report.nuisance.bags = std::move(bags);
  return report;
}

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double mean_se = 0.0;
  double variance_se = 0.0;
};

Moments moments_of(const std::vector<double>& v) {
  const double m = static_cast<double>(v.size());
  Moments out;
  for (double x : v) out.mean += x;
  out.mean /= m;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = (x - out.mean) * (x - out.mean);
    m2 += d;
    m4 += d * d;
  }
  out.variance = m2 / (m - 1.0);
  out.mean_se = std::sqrt(out.variance / m);
  const double central4 = m4 / m;
  const double central2 = m2 / m;
  out.variance_se = std::sqrt(std::max(0.0, central4 - central2 * central2) / m);
  return out;
}

// sigma^2(x,s,d)/pi_A(d|x,s) for theta, sum_a sigma^2(x,s,a)/pi_A(a|x,s) for theta1.
double noise_ratio(const PopulationTruth& truth, Covariates x, int s, int d,
                   Estimand estimand) {
  if (estimand == Estimand::Value) {
    return truth.noise_variance(x, s, d) / truth.nuisances.propensity.prob(d, x, s);
  }
  double total = 0.0;
  for (int a : {1, -1}) {
    total += truth.noise_variance(x, s, a) / truth.nuisances.propensity.prob(a, x, s);
  }
  return total;
}

}  // namespace

TheoreticalVariance theoretical_variance(const PopulationTruth& truth,
                                         const Policy& policy, const EifVariant& variant,
                                         double rho_s, std::size_t mc_draws,
                                         std::uint64_t seed) {
  if (mc_draws < 1000) {
    throw Error(ErrorCode::InvalidConfig, "theoretical_variance needs at least 1000 draws");
  }
  if (!(rho_s > 0.0 && rho_s < 1.0)) {
    throw Error(ErrorCode::InvalidRho, "rho_s must lie in (0, 1)");
  }
  Rng training_rng(mix_seed(seed, 1));
  Rng testing_rng(mix_seed(seed, 2));
  std::vector<double> training_terms(mc_draws);
  std::vector<double> testing_targets(mc_draws);
  std::vector<double> testing_noise(mc_draws);
  for (std::size_t r = 0; r < mc_draws; ++r) {
    const std::vector<double> x1 = truth.sample_training(training_rng);
    const double w = truth.nuisances.weight(x1);
    training_terms[r] = w * w * noise_ratio(truth, x1, 1, policy(x1), variant.estimand);

    const std::vector<double> x0 = truth.sample_testing(testing_rng);
    const int d0 = policy(x0);
    testing_targets[r] = target_term(truth.nuisances.outcome, x0, d0, variant.estimand);
    testing_noise[r] = noise_ratio(truth, x0, 0, d0, variant.estimand);
  }
  const Moments train = moments_of(training_terms);
  const Moments target = moments_of(testing_targets);

  TheoreticalVariance out;
  out.variant = variant;
  if (variant.kind == DatasetKind::Type2) {
    out.nu = train.mean;
    out.nu_se = train.mean_se;
    out.zeta = target.variance;
    out.zeta_se = target.variance_se;
  } else {
    const Moments noise = moments_of(testing_noise);
    const double c0 = (1.0 - rho_s) * (1.0 - rho_s);
    out.nu = rho_s * rho_s * train.mean;
    out.nu_se = rho_s * rho_s * train.mean_se;
    out.zeta = c0 * noise.mean + target.variance;
    out.zeta_se = std::hypot(c0 * noise.mean_se, target.variance_se);
  }
  return out;
}

double true_value(const PopulationTruth& truth, const Policy& policy, Estimand estimand,
                  std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0;
  for (std::size_t r = 0; r < draws; ++r) {
    const std::vector<double> x = truth.sample_testing(rng);
    sum += target_term(truth.nuisances.outcome, x, policy(x), estimand);
  }
  return sum / static_cast<double>(draws);
}

}  // namespace shiftval
