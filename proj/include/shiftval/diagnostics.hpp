#pragma once

#include <cstddef>
#include <vector>

#include "shiftval/data.hpp"
#include "shiftval/fitting.hpp"
#include "shiftval/nuisance.hpp"

namespace shiftval {

// r_j = sum_{S=1} W_i g_j(X_i) - (1/n0) sum_{S=0} g_j(X_i), W_i = w(X_i)/n1.
std::vector<double> check_balance(const WeightModel& weights, const PooledDataset& data,
                                  const InstrumentSet& instruments);

struct PositivityFlag {
  std::size_t row = 0;
  double value = 0.0;  // the offending probability
};

struct PositivityReport {
  std::size_t checked_treatment = 0;
  std::size_t flagged_treatment = 0;   // min_a pi_A(a|x,s) < tau
  std::size_t flagged_selection = 0;   // min_s pi_S(s|x) < delta
  std::vector<PositivityFlag> worst_treatment;  // up to 5, smallest first
  std::vector<PositivityFlag> worst_selection;
};

// pi_S is implied from the weights: pi_S(1|x) = rho / (rho + (1 - rho) w(x)).
// Rows in a stratum without a propensity fit are skipped for the treatment check.
PositivityReport check_positivity(const NuisanceSet& nuisances, const PooledDataset& data,
                                  double tau, double delta);

}  // namespace shiftval
