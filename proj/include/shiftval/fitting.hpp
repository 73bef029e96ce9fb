#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "shiftval/data.hpp"
#include "shiftval/nuisance.hpp"

namespace shiftval {

inline constexpr double kDefaultClip = 1e-3;

enum class KernelFamily { Rbf, Linear };

// Unset bandwidth / lambda fall back to data-driven defaults: the median
// pairwise distance of the relevant covariates, and 1/min(n1, n0) for KuLSIF
// (1/n_arm for kernel ridge).
struct KernelSpec {
  KernelFamily family = KernelFamily::Rbf;
  std::optional<double> bandwidth;
  std::optional<double> lambda;
};

// Throws InvalidConfig for non-positive bandwidth or lambda.
void validate_kernel_spec(const KernelSpec& spec);

double kernel_value(KernelFamily family, double bandwidth, Covariates a,
                    Covariates b);

// Median pairwise Euclidean distance. Above 1000 points an evenly spaced
// subsample of 1000 is used.
double median_pairwise_distance(const std::vector<std::vector<double>>& points);

// g(x) = (1?, g_1(x), ..., g_m(x)); the constant leads when included.
struct InstrumentSet {
  std::vector<CovariateFn> functions;
  std::vector<std::string> labels;
  bool includes_constant = true;

  static InstrumentSet constant_and_coordinates(std::size_t p);
  static InstrumentSet coordinates(std::size_t p);

  std::size_t size() const { return functions.size() + (includes_constant ? 1 : 0); }
  std::vector<double> evaluate(Covariates x) const;
  std::string label(std::size_t j) const;
};

// Logistic regression of 1[A = 1] on (1, x) inside stratum s, predictions
// clipped to [clip, 1 - clip]. Only slot s of the returned model is filled.
PropensityModel fit_propensity_logistic(const PooledDataset& data, int stratum,
                                        double clip = kDefaultClip);

// Both strata where treatments are observed (Type-2 data: training only).
PropensityModel fit_propensity_all(const PooledDataset& data,
                                   double clip = kDefaultClip);

enum class OutcomeMethod { Linear, KernelRidge };

// Q(x, a) from all rows with observed (a, y): least squares on (1, x, a, x*a)
// or per-arm kernel ridge on arm-centred outcomes.
OutcomeModel fit_outcome_regression(const PooledDataset& data, OutcomeMethod method,
                                    const std::optional<KernelSpec>& spec = {});

// Selection-model weights n1 pi_S(0|x) / (n0 pi_S(1|x)), pi_S from a logistic
// regression of S on (1, x) with pi_S clipped to [clip, 1 - clip].
WeightModel fit_weights_aipsw(const PooledDataset& data, double clip = kDefaultClip);

// Sign of the right-hand side of the KuLSIF dual system.
//  PrimalConsistent: (K11/n1 + lambda I) alpha = -(1/(lambda n0 n1)) K10 1,
//    the first-order condition of the penalised least-squares primal.
//  AsPrinted: the same system with a + sign, kept for reproducing that display.
enum class KulsifSign { PrimalConsistent, AsPrinted };

// w(x) = sum_{S=1} alpha_i K(X_i, x) + (1/(lambda n0)) sum_{S=0} K(X_j, x),
// truncated at zero on evaluation. Throws SolveFailure when the dual residual
// exceeds 1e-8.
WeightModel fit_weights_kulsif(const PooledDataset& data, const KernelSpec& spec,
                               KulsifSign sign = KulsifSign::PrimalConsistent);

struct KulsifSystem {
  Eigen::MatrixXd lhs;  // K11/n1 + lambda I
  Eigen::VectorXd rhs;
  Eigen::VectorXd alpha;
};

// The assembled dual system and its solution, for diagnostics and tests.
KulsifSystem kulsif_dual_system(const PooledDataset& data, const KernelSpec& spec,
                                KulsifSign sign = KulsifSign::PrimalConsistent);

struct EntropyBalanceOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-10;
};

// Entropy-balancing calibration weights via damped Newton on the dual.
// Evaluation: w(x) = n1 exp(lambda'g(x)) / sum_{S=1} exp(lambda'g(X_j)).
// Throws InfeasibleBalance (naming the offending instrument) when the
// calibration moment is not interior to the training hull.
WeightModel fit_weights_entropy_balancing(const PooledDataset& data,
                                          const InstrumentSet& instruments,
                                          const EntropyBalanceOptions& options = {});

}  // namespace shiftval
