#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shiftval/data.hpp"
#include "shiftval/fitting.hpp"
#include "shiftval/nuisance.hpp"
#include "shiftval/simulation.hpp"

namespace shiftval {

// Value = E_test[Y(d)]; Contrast = E_test[Y(d) - Y(-d)] = E_test[C(X) d(X)].
enum class Estimand { Value, Contrast };

std::string_view to_string(Estimand estimand);
Estimand parse_estimand(std::string_view text);

struct EifVariant {
  Estimand estimand = Estimand::Value;
  DatasetKind kind = DatasetKind::Type2;

  friend bool operator==(const EifVariant&, const EifVariant&) = default;
};

std::string label(const EifVariant& variant);

inline constexpr double kDefaultLevel = 0.95;

struct BagDiagnostics {
  int bag = 0;
  std::size_t fit_rows = 0;
  WeightFitInfo weight;
  std::optional<NewtonInfo> propensity_training;
  std::optional<NewtonInfo> propensity_calibration;
  std::vector<double> outcome_coefficients;
};

struct NuisanceProvenance {
  bool oracle = false;
  std::string weights;
  std::string propensity;
  std::string outcome;
  int crossfit_k = 0;  // 0: nuisances used as given
  std::vector<BagDiagnostics> bags;
};

struct EstimateReport {
  double estimate = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = kDefaultLevel;
  EifVariant variant;
  std::string method;  // "efficient", "crossfit", "plugin:<form>"
  NuisanceProvenance nuisance;
  std::size_t n = 0;
  std::size_t n1 = 0;
  std::size_t n0 = 0;
  // Per-row influence values at the final estimate (not serialised).
  std::vector<double> influence;
};

// One row's efficient-influence value, evaluated from the influence-function
// displays with rho replaced by nuisances.rho_hat. Throws MissingField when
// the variant needs (a, y) that the row lacks, DegenerateDenominator for a
// non-positive propensity or rho_hat outside (0, 1).
double eif_contribution(const Observation& obs, const NuisanceSet& nuisances,
                        const Policy& policy, const EifVariant& variant,
                        double theta_ref);

// Oracle/plug-in efficient estimate: stratum means of the per-row summands,
// with n1/n and n0/n in place of rho and 1 - rho. `kind` defaults to the
// dataset's kind; a Type2 variant may run on Type1 data and then ignores the
// calibration (a, y).
EstimateReport estimate_efficient(const PooledDataset& data, const NuisanceSet& nuisances,
                                  const Policy& policy, Estimand estimand,
                                  std::optional<DatasetKind> kind = std::nullopt,
                                  double level = kDefaultLevel);

enum class IdentificationForm { CalibrationMean, WeightedPooled, WeightedTraining };

std::string_view to_string(IdentificationForm form);

// Sample analogue of one identification expression for theta (or theta1,
// with Q(X, d) replaced by C(X) d(X)); delta-method standard error.
EstimateReport estimate_plugin_identification(const PooledDataset& data,
                                              const NuisanceSet& nuisances,
                                              const Policy& policy, Estimand estimand,
                                              IdentificationForm form,
                                              double level = kDefaultLevel);

// estimate -/+ z_{(1+level)/2} se. Throws InvalidLevel unless 0 < level < 1.
std::pair<double, double> wald_ci(double estimate, double se, double level);

enum class PropensitySource { Oracle, Logistic };
enum class OutcomeSource { Oracle, Linear, KernelRidge };

std::string_view to_string(PropensitySource source);
std::string_view to_string(OutcomeSource source);
PropensitySource parse_propensity_source(std::string_view text);
OutcomeSource parse_outcome_source(std::string_view text);

// Which backend supplies each nuisance. Oracle parts come from `oracle`.
struct FitRecipe {
  WeightBackend weights = WeightBackend::Oracle;
  PropensitySource propensity = PropensitySource::Oracle;
  OutcomeSource outcome = OutcomeSource::Oracle;
  KernelSpec weight_kernel;
  KernelSpec outcome_kernel;
  KulsifSign kulsif_sign = KulsifSign::PrimalConsistent;
  std::optional<InstrumentSet> instruments;  // default: constant + coordinates
  std::optional<NuisanceSet> oracle;
  double clip = kDefaultClip;

  bool fully_oracle() const {
    return weights == WeightBackend::Oracle &&
           propensity == PropensitySource::Oracle && outcome == OutcomeSource::Oracle;
  }
};

// Nuisances fitted on `fit_data` per the recipe (rho_hat = its n1/n).
NuisanceSet fit_nuisances(const PooledDataset& fit_data, const FitRecipe& recipe);

// Stratified cross-fitting: rows in bag k are evaluated with nuisances fitted
// on the other bags; one aggregate estimate. Type2 variants fit on the
// Type2 view of each out-of-bag sample.
EstimateReport cross_fit_estimate(const PooledDataset& data, const FoldAssignment& folds,
                                  const FitRecipe& recipe, const Policy& policy,
                                  Estimand estimand,
                                  std::optional<DatasetKind> kind = std::nullopt,
                                  double level = kDefaultLevel);

struct TheoreticalVariance {
  double nu = 0.0;    // training-stratum component
  double zeta = 0.0;  // calibration-stratum component
  double nu_se = 0.0;
  double zeta_se = 0.0;
  EifVariant variant;
};

// Monte Carlo evaluation of the efficiency-bound components (nu, zeta) by
// sampling from each stratum's covariate law. Throws InvalidConfig for
// mc_draws < 1000.
TheoreticalVariance theoretical_variance(const PopulationTruth& truth,
                                         const Policy& policy, const EifVariant& variant,
                                         double rho_s, std::size_t mc_draws,
                                         std::uint64_t seed);

// theta (or theta1) by averaging over `draws` testing-population covariates.
double true_value(const PopulationTruth& truth, const Policy& policy,
                  Estimand estimand, std::size_t draws, std::uint64_t seed);

}  // namespace shiftval
