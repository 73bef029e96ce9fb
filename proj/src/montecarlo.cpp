#include "shiftval/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <thread>

#include "shiftval/error.hpp"

namespace shiftval {

void validate_mc_config(const McConfig& config) {
  validate_config(config.base);
  if (config.replications < 2) {
    throw Error(ErrorCode::InvalidConfig, "replications must be at least 2");
  }
  if (config.menu.empty()) throw Error(ErrorCode::InvalidConfig, "estimator menu is empty");
  for (const McEstimator& est : config.menu) {
    if (est.crossfit_k == 1 || est.crossfit_k < 0) {
      throw Error(ErrorCode::InvalidConfig, est.name + ": crossfit K must be 0 or >= 2");
    }
  }
  if (config.truth_draws < 1000) {
    throw Error(ErrorCode::InvalidConfig, "truth_draws must be at least 1000");
  }
}

const McEstimatorSummary& McSummary::find(const std::string& name) const {
  for (const auto& est : estimators) {
    if (est.name == name) return est;
  }
  throw Error(ErrorCode::InvalidConfig, "no estimator named " + name);
}

namespace {

struct ReplicateResult {
  std::vector<EstimateReport> reports;
  std::vector<double> runtime_ms;
};

EstimateReport run_one(const McEstimator& est, const PooledDataset& data,
                       const NuisanceSet& oracle, const Policy& policy,
                       std::uint64_t fold_seed, double level) {
  FitRecipe recipe = est.recipe;
  recipe.oracle = oracle;
  const DatasetKind kind = est.variant.kind;
  if (est.crossfit_k >= 2) {
    const FoldAssignment folds = split_cross_fit_folds(data, est.crossfit_k, fold_seed);
    return cross_fit_estimate(data, folds, recipe, policy, est.variant.estimand, kind, level);
  }
  if (recipe.fully_oracle()) {
    return estimate_efficient(data, oracle, policy, est.variant.estimand, kind, level);
  }
  const NuisanceSet fitted =
      fit_nuisances(kind == DatasetKind::Type2 ? data.as_type2() : data, recipe);
  return estimate_efficient(data, fitted, policy, est.variant.estimand, kind, level);
}

ReplicateResult run_replicate(const McConfig& config, int r) {
  SimulationConfig sim = config.base;
  sim.seed = config.seed + static_cast<std::uint64_t>(r);
  const auto [data, oracle] = simulate_gaussian_shift(sim);
  const std::uint64_t fold_seed = mix_seed(sim.seed, 17);
  ReplicateResult out;
  for (const McEstimator& est : config.menu) {
    const auto start = std::chrono::steady_clock::now();
    out.reports.push_back(run_one(est, data, oracle, config.policy, fold_seed, config.level));
    const auto stop = std::chrono::steady_clock::now();
    out.runtime_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return out;
}

double sample_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

McSummary run_replications(const McConfig& config) {
  validate_mc_config(config);
  const auto replications = static_cast<std::size_t>(config.replications);
  std::vector<std::optional<ReplicateResult>> results(replications);
  std::vector<std::exception_ptr> failures(replications);

  unsigned threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(replications));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < replications; r = next++) {
      try {
        results[r] = run_replicate(config, static_cast<int>(r));
      } catch (...) {
        failures[r] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& thread : pool) thread.join();

  for (std::size_t r = 0; r < replications; ++r) {
    if (!failures[r]) continue;
    try {
      std::rethrow_exception(failures[r]);
    } catch (const Error& e) {
      throw Error(e.code(), "replicate " + std::to_string(r) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidConfig,
                  "replicate " + std::to_string(r) + ": " + e.what());
    }
  }

  const PopulationTruth truth = gaussian_shift_truth(config.base);
  std::map<Estimand, double> truths;
  std::map<std::pair<int, int>, TheoreticalVariance> targets;

  McSummary summary;
  summary.replications = config.replications;
  summary.seed = config.seed;
  summary.report_timing = config.report_timing;
  for (std::size_t r = 0; r < replications; ++r) {
    const EstimateReport& first = results[r]->reports.front();
    summary.mean_n += static_cast<double>(first.n);
    summary.mean_n1 += static_cast<double>(first.n1);
    summary.mean_n0 += static_cast<double>(first.n0);
  }
  const auto R = static_cast<double>(replications);
  summary.mean_n /= R;
  summary.mean_n1 /= R;
  summary.mean_n0 /= R;

  for (std::size_t e = 0; e < config.menu.size(); ++e) {
    const McEstimator& est = config.menu[e];
    McEstimatorSummary out;
    out.name = est.name;
    out.variant = est.variant;
    out.weights = std::string(to_string(est.recipe.weights));
    out.propensity = std::string(to_string(est.recipe.propensity));
    out.outcome = std::string(to_string(est.recipe.outcome));
    out.crossfit_k = est.crossfit_k;

    const Estimand estimand = est.variant.estimand;
    if (!truths.count(estimand)) {
      truths[estimand] = true_value(truth, config.policy, estimand, config.truth_draws,
                                    mix_seed(config.seed, 1001));
    }
    out.truth = truths[estimand];
    const std::pair<int, int> key{static_cast<int>(estimand),
                                  static_cast<int>(est.variant.kind)};
    if (!targets.count(key)) {
      targets.emplace(key, theoretical_variance(truth, config.policy, est.variant,
                                                config.base.rho_s, config.variance_draws,
                                                mix_seed(config.seed, 1002)));
    }
    out.target = targets.at(key);

    std::vector<double> scaled_n;
    std::vector<double> scaled_n0;
    std::size_t covered = 0;
    double runtime = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
      const EstimateReport& rep = results[r]->reports[e];
      out.estimates.push_back(rep.estimate);
      out.ses.push_back(rep.se);
      out.n.push_back(rep.n);
      out.n0.push_back(rep.n0);
      out.mean_estimate += rep.estimate;
      out.mean_se += rep.se;
      runtime += results[r]->runtime_ms[e];
      const double error = rep.estimate - out.truth;
      scaled_n.push_back(std::sqrt(static_cast<double>(rep.n)) * error);
      scaled_n0.push_back(std::sqrt(static_cast<double>(rep.n0)) * error);
      if (rep.ci_lower <= out.truth && out.truth <= rep.ci_upper) ++covered;
    }
    out.mean_estimate /= R;
    out.mean_se /= R;
    out.mean_runtime_ms = runtime / R;
    out.bias = out.mean_estimate - out.truth;
    out.bias_se = std::sqrt(sample_variance(out.estimates) / R);
    out.var_sqrt_n = sample_variance(scaled_n);
    out.var_sqrt_n0 = sample_variance(scaled_n0);
    out.coverage = static_cast<double>(covered) / R;
    summary.estimators.push_back(std::move(out));
  }
  return summary;
}

double bound_target(const TheoreticalVariance& target, StratumDesign design,
                    VarianceScaling scaling) {
  if (!(design.n1 > 0.0 && design.n0 > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "design needs positive n1 and n0");
  }
  if (scaling == VarianceScaling::RootN0) return target.zeta;
  const double n = design.n1 + design.n0;
  return n / design.n1 * target.nu + n / design.n0 * target.zeta;
}

BoundComparison compare_to_bound(const McEstimatorSummary& estimator,
                                 const TheoreticalVariance& target, StratumDesign design,
                                 VarianceScaling scaling, double tolerance) {
  if (!(estimator.variant == target.variant)) {
    throw Error(ErrorCode::VariantMismatch,
                estimator.name + " is " + label(estimator.variant) + ", target is " +
                    label(target.variant));
  }
  BoundComparison row;
  row.estimator = estimator.name;
  row.empirical =
      scaling == VarianceScaling::RootN ? estimator.var_sqrt_n : estimator.var_sqrt_n0;
  row.target = bound_target(target, design, scaling);
  row.ratio = row.empirical / row.target;
  row.tolerance = tolerance;
  row.pass = std::abs(row.ratio - 1.0) <= tolerance;
  return row;
}

std::vector<BoundComparison> compare_to_bound(const McSummary& summary,
                                              const TheoreticalVariance& target,
                                              StratumDesign design, VarianceScaling scaling,
                                              double tolerance) {
  std::vector<BoundComparison> rows;
  for (const auto& est : summary.estimators) {
    if (est.variant == target.variant) {
      rows.push_back(compare_to_bound(est, target, design, scaling, tolerance));
    }
  }
  if (rows.empty()) {
    throw Error(ErrorCode::VariantMismatch, "no estimator of variant " + label(target.variant));
  }
  return rows;
}

}  // namespace shiftval
