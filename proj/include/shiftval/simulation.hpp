#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "shiftval/data.hpp"
#include "shiftval/nuisance.hpp"
#include "shiftval/rng.hpp"

namespace shiftval {

// Gaussian covariate-shift scenario.
//
// Training covariates are N_p(mu, I) and testing covariates N_p(0, I), so the
// testing/training density ratio is w(x) = exp(|mu|^2 / 2 - mu'x) and the
// selection log-odds is log(rho/(1-rho)) - |mu|^2/2 + mu'x.
//
// Outcome model: Y = beta0 + beta'x + a (gamma0 + gamma'x) + eps with
// eps ~ N(0, noise_sd^2); outcome_coeffs is the flat vector
// [beta0, beta_1..beta_p, gamma0, gamma_1..gamma_p]. Treatment is drawn with
// the constant probability `propensity` in both strata.
struct SimulationConfig {
  std::size_t p = 2;
  std::vector<double> mu{0.0, 0.0};
  double rho_s = 0.5;
  std::size_t n = 1000;
  std::vector<double> outcome_coeffs{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  double noise_sd = 1.0;
  double propensity = 0.5;
  std::uint64_t seed = 0;
  DatasetKind kind = DatasetKind::Type1;
  // Exactly round(rho_s n) training rows, listed first, instead of S ~ Bernoulli(rho_s).
  bool fixed_strata = false;
};

// Throws InvalidConfig.
void validate_config(const SimulationConfig& config);

double true_weight_gaussian(Covariates x, Covariates mu);
double true_log_odds_gaussian(Covariates x, Covariates mu, double rho_s);

// Exact-tilt weight for Gaussian sufficient statistics with stratum means
// mean_training and mean_testing (shared covariance):
//   w(x) = exp{(mean_testing - mean_training)'(g(x) - (mean_training + mean_testing)/2)}.
double gaussian_tilt_weight(Covariates g, Covariates mean_training,
                            Covariates mean_testing);

// Linear outcome Q(x, a) built from the flat coefficient vector.
OutcomeModel linear_outcome_oracle(std::vector<double> coeffs, std::size_t p);

// Dataset plus the oracle nuisances (true w, pi_A, Q; rho_hat = n1/n).
std::pair<PooledDataset, NuisanceSet> simulate_gaussian_shift(
    const SimulationConfig& config);

using CovariateSampler = std::function<std::vector<double>(Rng&)>;

// Everything the closed-form variance targets need about the population.
struct PopulationTruth {
  NuisanceSet nuisances;  // rho_hat carries the population rho_s
  std::function<double(Covariates, int s, int a)> noise_variance;
  CovariateSampler sample_training;
  CovariateSampler sample_testing;
};

PopulationTruth gaussian_shift_truth(const SimulationConfig& config);

}  // namespace shiftval
