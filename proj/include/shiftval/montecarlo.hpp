#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftval/estimators.hpp"
#include "shiftval/simulation.hpp"

namespace shiftval {

// One estimator in the Monte Carlo menu. When the recipe uses oracle parts
// they come from each replicate's simulated truth.
struct McEstimator {
  std::string name;
  EifVariant variant;
  FitRecipe recipe;
  int crossfit_k = 0;  // 0: nuisances fitted on the whole replicate sample
};

struct McConfig {
  SimulationConfig base;
  int replications = 2;
  std::vector<McEstimator> menu;
  Policy policy = Policy::constant(1);
  std::uint64_t seed = 0;  // replicate r is simulated with seed + r
  unsigned threads = 0;    // 0: hardware concurrency
  std::size_t truth_draws = 1'000'000;
  std::size_t variance_draws = 1'000'000;
  double level = kDefaultLevel;
  bool report_timing = false;
};

// Throws InvalidConfig.
void validate_mc_config(const McConfig& config);

struct McEstimatorSummary {
  std::string name;
  EifVariant variant;
  std::string weights;
  std::string propensity;
  std::string outcome;
  int crossfit_k = 0;

  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double bias_se = 0.0;
  double var_sqrt_n = 0.0;   // sample variance of sqrt(n)(theta_hat - theta)
  double var_sqrt_n0 = 0.0;  // same with sqrt(n0)
  double coverage = 0.0;
  double mean_se = 0.0;
  double mean_runtime_ms = 0.0;
  TheoreticalVariance target;

  // Per replicate, in replicate order.
  std::vector<double> estimates;
  std::vector<double> ses;
  std::vector<std::size_t> n;
  std::vector<std::size_t> n0;
};

struct McSummary {
  int replications = 0;
  std::uint64_t seed = 0;
  double mean_n = 0.0;
  double mean_n1 = 0.0;
  double mean_n0 = 0.0;
  bool report_timing = false;
  std::vector<McEstimatorSummary> estimators;

  const McEstimatorSummary& find(const std::string& name) const;
};

// Deterministic for a fixed config regardless of the thread count. A failing
// replicate aborts the run with its index in the message.
McSummary run_replications(const McConfig& config);

struct StratumDesign {
  double n1 = 0.0;
  double n0 = 0.0;
};

enum class VarianceScaling { RootN, RootN0 };

// RootN: (n/n1) nu + (n/n0) zeta. RootN0: the small-calibration limit zeta.
double bound_target(const TheoreticalVariance& target, StratumDesign design,
                    VarianceScaling scaling);

struct BoundComparison {
  std::string estimator;
  double empirical = 0.0;
  double target = 0.0;
  double ratio = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Throws VariantMismatch when the estimator's variant differs from the target's.
BoundComparison compare_to_bound(const McEstimatorSummary& estimator,
                                 const TheoreticalVariance& target, StratumDesign design,
                                 VarianceScaling scaling, double tolerance);

// Every estimator of the target's variant; VariantMismatch if there is none.
std::vector<BoundComparison> compare_to_bound(const McSummary& summary,
                                              const TheoreticalVariance& target,
                                              StratumDesign design, VarianceScaling scaling,
                                              double tolerance);

}  // namespace shiftval
