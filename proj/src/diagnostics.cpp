#include "shiftval/diagnostics.hpp"

#include <algorithm>

namespace shiftval {

std::vector<double> check_balance(const WeightModel& weights, const PooledDataset& data,
                                  const InstrumentSet& instruments) {
  const std::size_t m = instruments.size();
  std::vector<double> weighted(m, 0.0);
  std::vector<double> target(m, 0.0);
  const double n1 = static_cast<double>(data.n1());
  const double n0 = static_cast<double>(data.n0());
  for (const auto& row : data.rows()) {
    const std::vector<double> g = instruments.evaluate(row.x);
    if (row.s == 1) {
      const double w = weights(row.x) / n1;
      for (std::size_t j = 0; j < m; ++j) weighted[j] += w * g[j];
    } else {
      for (std::size_t j = 0; j < m; ++j) target[j] += g[j];
    }
  }
  std::vector<double> residual(m);
  for (std::size_t j = 0; j < m; ++j) residual[j] = weighted[j] - target[j] / n0;
  return residual;
}

namespace {

void keep_worst(std::vector<PositivityFlag>& worst, PositivityFlag flag) {
  constexpr std::size_t kKeep = 5;
  worst.push_back(flag);
  std::sort(worst.begin(), worst.end(),
            [](const PositivityFlag& a, const PositivityFlag& b) {
              return a.value < b.value || (a.value == b.value && a.row < b.row);
            });
  if (worst.size() > kKeep) worst.pop_back();
}

}  // namespace

PositivityReport check_positivity(const NuisanceSet& nuisances, const PooledDataset& data,
                                  double tau, double delta) {
  PositivityReport report;
  const double rho = nuisances.rho_hat;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Observation& row = data[i];
    if (nuisances.propensity.has_stratum(row.s)) {
      ++report.checked_treatment;
      const double p1 = nuisances.propensity.prob_treated(row.x, row.s);
      const double low = std::min(p1, 1.0 - p1);
      if (low < tau) {
        ++report.flagged_treatment;
        keep_worst(report.worst_treatment, {i, low});
      }
    }
    const double w = nuisances.weight(row.x);
    const double pi1 = rho / (rho + (1.0 - rho) * w);
    const double low = std::min(pi1, 1.0 - pi1);
    if (low < delta) {
      ++report.flagged_selection;
      keep_worst(report.worst_selection, {i, low});
    }
  }
  return report;
}

}  // namespace shiftval
