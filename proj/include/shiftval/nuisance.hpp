#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftval/data.hpp"

namespace shiftval {

using Covariates = std::span<const double>;
using CovariateFn = std::function<double(Covariates)>;

// Newton/IRLS bookkeeping shared by the logistic fits.
struct NewtonInfo {
  int iterations = 0;
  bool converged = false;
  std::vector<double> coefficients;  // intercept first
};

// pi_A(a | x, s). Each stratum slot is optional: Type-2 data leaves the
// calibration slot empty and anything asking for it fails loudly.
class PropensityModel {
 public:
  PropensityModel(std::optional<CovariateFn> treated_given_training,
                  std::optional<CovariateFn> treated_given_calibration,
                  std::string source);

  static PropensityModel constant(double prob_treated);

  bool has_stratum(int s) const { return slots_[slot(s)].has_value(); }

  // pi_A(1 | x, s); throws MissingStratum for an empty slot.
  double prob_treated(Covariates x, int s) const;

  // pi_A(a | x, s) = p for a = +1, 1 - p for a = -1.
  double prob(int a, Covariates x, int s) const {
    const double p = prob_treated(x, s);
    return a == 1 ? p : 1.0 - p;
  }

  // Slots of `this` where present, otherwise those of `other`.
  PropensityModel merged_with(const PropensityModel& other) const;

  const std::string& source() const { return source_; }
  const std::optional<NewtonInfo>& fit_info(int s) const { return info_[slot(s)]; }
  void set_fit_info(int s, NewtonInfo info) { info_[slot(s)] = std::move(info); }

 private:
  static std::size_t slot(int s) { return s == 1 ? 1 : 0; }

  std::array<std::optional<CovariateFn>, 2> slots_;
  std::array<std::optional<NewtonInfo>, 2> info_;
  std::string source_;
};

// Q(x, a) with the derived C(x) = Q(x, 1) - Q(x, -1) and Q(x, d) = Q(x, d(x)).
class OutcomeModel {
 public:
  using Fn = std::function<double(Covariates, int)>;

  OutcomeModel(Fn q, std::string source, std::vector<double> coefficients = {});

  double q(Covariates x, int a) const { return q_(x, a); }
  double cte(Covariates x) const { return q_(x, 1) - q_(x, -1); }
  double q_policy(Covariates x, const Policy& d) const { return q_(x, d(x)); }

  const std::string& source() const { return source_; }
  // Linear fits: coefficients on (1, x, a, x*a); empty otherwise.
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  Fn q_;
  std::string source_;
  std::vector<double> coefficients_;
};

enum class WeightBackend { Oracle, AIPSW, KuLSIF, EntropyBalancing };

std::string_view to_string(WeightBackend backend);
WeightBackend parse_weight_backend(std::string_view text);

struct WeightFitInfo {
  int iterations = 0;
  bool converged = true;
  // Training rows whose raw KuLSIF prediction was negative and got clipped.
  std::size_t truncated = 0;
  std::map<std::string, double> hyperparameters;
  // AIPSW: selection-model coefficients; EB: lambda-hat (constant first when
  // included); empty for other backends.
  std::vector<double> coefficients;
  std::optional<double> dual_residual;
  std::optional<double> condition_number;
};

// Covariate weight w_hat(x) >= 0, plus the per-training-row weights of the
// data it was fitted on.
class WeightModel {
 public:
  WeightModel(WeightBackend backend, CovariateFn raw, WeightFitInfo info,
              std::vector<double> training_weights);

  static WeightModel oracle(CovariateFn w);

  // Negative raw predictions (possible only for KuLSIF) are truncated to 0.
  double operator()(Covariates x) const {
    const double v = raw_(x);
    return v > 0.0 ? v : 0.0;
  }
  double raw(Covariates x) const { return raw_(x); }

  WeightBackend backend() const { return backend_; }
  const WeightFitInfo& info() const { return info_; }
  const std::vector<double>& training_weights() const { return training_; }

 private:
  WeightBackend backend_;
  CovariateFn raw_;
  WeightFitInfo info_;
  std::vector<double> training_;
};

// eta = (w, pi_A, Q) together with rho_hat in (0, 1).
struct NuisanceSet {
  WeightModel weight;
  PropensityModel propensity;
  OutcomeModel outcome;
  double rho_hat = 0.5;
  bool oracle = false;

  NuisanceSet(WeightModel w, PropensityModel pi, OutcomeModel q, double rho,
              bool is_oracle = false);
};

}  // namespace shiftval
