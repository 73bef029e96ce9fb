#include "shiftval/simulation.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "shiftval/error.hpp"

namespace shiftval {

namespace {

void require_same_length(Covariates a, Covariates b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "length " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
}

double dot(Covariates a, Covariates b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += a[j] * b[j];
  return sum;
}

}  // namespace

void validate_config(const SimulationConfig& config) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, what);
  };
  if (config.p == 0) fail("p must be positive");
  if (config.mu.size() != config.p) fail("mu must have length p");
  if (!(config.rho_s > 0.0 && config.rho_s < 1.0)) fail("rho_s must lie in (0, 1)");
  if (config.n < 2) fail("n must be at least 2");
  if (config.outcome_coeffs.size() != 2 * config.p + 2) {
    fail("outcome_coeffs must have length 2p + 2");
  }
  if (!(config.noise_sd >= 0.0)) fail("noise_sd must be non-negative");
  if (!(config.propensity > 0.0 && config.propensity < 1.0)) {
    fail("propensity must lie in (0, 1)");
  }
}

double true_weight_gaussian(Covariates x, Covariates mu) {
  require_same_length(x, mu);
  return std::exp(0.5 * dot(mu, mu) - dot(mu, x));
}

double true_log_odds_gaussian(Covariates x, Covariates mu, double rho_s) {
  require_same_length(x, mu);
  if (!(rho_s > 0.0 && rho_s < 1.0)) {
    throw Error(ErrorCode::InvalidRho, "rho_s must lie in (0, 1)");
  }
  return std::log(rho_s / (1.0 - rho_s)) - 0.5 * dot(mu, mu) + dot(mu, x);
}

double gaussian_tilt_weight(Covariates g, Covariates mean_training,
                            Covariates mean_testing) {
  require_same_length(g, mean_training);
  require_same_length(g, mean_testing);
  double exponent = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    exponent += (mean_testing[j] - mean_training[j]) *
                (g[j] - 0.5 * (mean_training[j] + mean_testing[j]));
  }
  return std::exp(exponent);
}

OutcomeModel linear_outcome_oracle(std::vector<double> coeffs, std::size_t p) {
  if (coeffs.size() != 2 * p + 2) {
    throw Error(ErrorCode::InvalidConfig, "outcome_coeffs must have length 2p + 2");
  }
  auto c = std::make_shared<const std::vector<double>>(coeffs);
  auto q = [c, p](Covariates x, int a) {
    const std::vector<double>& b = *c;
    double main = b[0];
    double effect = b[p + 1];
    for (std::size_t j = 0; j < p; ++j) {
      main += b[1 + j] * x[j];
      effect += b[p + 2 + j] * x[j];
    }
    return main + static_cast<double>(a) * effect;
  };
  // Reported in the (1, x, a, x*a) order used by the fitted linear model.
  std::vector<double> design_order;
  design_order.push_back(coeffs[0]);
  for (std::size_t j = 0; j < p; ++j) design_order.push_back(coeffs[1 + j]);
  design_order.push_back(coeffs[p + 1]);
  for (std::size_t j = 0; j < p; ++j) design_order.push_back(coeffs[p + 2 + j]);
  return OutcomeModel(q, "oracle", std::move(design_order));
}

namespace {

NuisanceSet oracle_nuisances(const SimulationConfig& config, double rho) {
  auto mu = std::make_shared<const std::vector<double>>(config.mu);
  auto weight = WeightModel::oracle(
      [mu](Covariates x) { return true_weight_gaussian(x, *mu); });
  auto propensity = PropensityModel::constant(config.propensity);
  return NuisanceSet(std::move(weight), std::move(propensity),
                     linear_outcome_oracle(config.outcome_coeffs, config.p), rho,
                     /*is_oracle=*/true);
}

}  // namespace

std::pair<PooledDataset, NuisanceSet> simulate_gaussian_shift(
    const SimulationConfig& config) {
  validate_config(config);
  const OutcomeModel truth_q = linear_outcome_oracle(config.outcome_coeffs, config.p);
  Rng rng(config.seed);
  std::vector<Observation> rows(config.n);
  const auto fixed_n1 = static_cast<std::size_t>(
      std::llround(config.rho_s * static_cast<double>(config.n)));
  // Per row: S, then x_1..x_p, then A, then the noise draw.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Observation& row = rows[i];
    if (config.fixed_strata) {
      row.s = i < fixed_n1 ? 1 : 0;
    } else {
      row.s = rng.bernoulli(config.rho_s) ? 1 : 0;
    }
    row.x.resize(config.p);
    for (std::size_t j = 0; j < config.p; ++j) {
      row.x[j] = rng.normal() + (row.s == 1 ? config.mu[j] : 0.0);
    }
    const int a = rng.bernoulli(config.propensity) ? 1 : -1;
    const double noise = rng.normal();
    double y = truth_q.q(row.x, a);
    if (config.noise_sd > 0.0) y += config.noise_sd * noise;
    if (config.kind == DatasetKind::Type1 || row.s == 1) {
      row.a = a;
      row.y = y;
    }
  }
  PooledDataset data = validate_dataset(std::move(rows), config.kind);
  NuisanceSet nuisances = oracle_nuisances(config, data.rho_hat());
  return {std::move(data), std::move(nuisances)};
}

PopulationTruth gaussian_shift_truth(const SimulationConfig& config) {
  validate_config(config);
  const double variance = config.noise_sd * config.noise_sd;
  const std::vector<double> mu = config.mu;
  const std::size_t p = config.p;
  return PopulationTruth{
      oracle_nuisances(config, config.rho_s),
      [variance](Covariates, int, int) { return variance; },
      [mu](Rng& rng) {
        std::vector<double> x(mu.size());
        for (std::size_t j = 0; j < mu.size(); ++j) x[j] = rng.normal() + mu[j];
        return x;
      },
      [p](Rng& rng) {
        std::vector<double> x(p);
        for (auto& v : x) v = rng.normal();
        return x;
      },
  };
}

}  // namespace shiftval
