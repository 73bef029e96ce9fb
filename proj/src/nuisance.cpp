#include "shiftval/nuisance.hpp"

#include <utility>

#include "shiftval/error.hpp"

namespace shiftval {

PropensityModel::PropensityModel(std::optional<CovariateFn> treated_given_training,
                                 std::optional<CovariateFn> treated_given_calibration,
                                 std::string source)
    : source_(std::move(source)) {
  slots_[1] = std::move(treated_given_training);
  slots_[0] = std::move(treated_given_calibration);
}

PropensityModel PropensityModel::constant(double prob_treated) {
  if (!(prob_treated > 0.0 && prob_treated < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "propensity must lie in (0, 1)");
  }
  CovariateFn fn = [prob_treated](Covariates) { return prob_treated; };
  return PropensityModel(fn, fn, "constant");
}

double PropensityModel::prob_treated(Covariates x, int s) const {
  const auto& fn = slots_[slot(s)];
  if (!fn) {
    throw Error(ErrorCode::MissingStratum,
                "propensity model has no fit for stratum s=" + std::to_string(s));
  }
  return (*fn)(x);
}

PropensityModel PropensityModel::merged_with(const PropensityModel& other) const {
  PropensityModel out = *this;
  for (std::size_t k = 0; k < 2; ++k) {
    if (!out.slots_[k]) {
      out.slots_[k] = other.slots_[k];
      out.info_[k] = other.info_[k];
    }
  }
  if (source_ != other.source_) out.source_ = source_ + "+" + other.source_;
  return out;
}

OutcomeModel::OutcomeModel(Fn q, std::string source,
                           std::vector<double> coefficients)
    : q_(std::move(q)),
      source_(std::move(source)),
      coefficients_(std::move(coefficients)) {}

std::string_view to_string(WeightBackend backend) {
  switch (backend) {
    case WeightBackend::Oracle: return "oracle";
    case WeightBackend::AIPSW: return "aipsw";
    case WeightBackend::KuLSIF: return "kulsif";
    case WeightBackend::EntropyBalancing: return "eb";
  }
  return "unknown";
}

WeightBackend parse_weight_backend(std::string_view text) {
  if (text == "oracle") return WeightBackend::Oracle;
  if (text == "aipsw") return WeightBackend::AIPSW;
  if (text == "kulsif") return WeightBackend::KuLSIF;
  if (text == "eb" || text == "entropy_balancing") {
    return WeightBackend::EntropyBalancing;
  }
  throw Error(ErrorCode::ParseError,
              "unknown weight backend '" + std::string(text) + "'");
}

WeightModel::WeightModel(WeightBackend backend, CovariateFn raw,
                         WeightFitInfo info, std::vector<double> training_weights)
    : backend_(backend),
      raw_(std::move(raw)),
      info_(std::move(info)),
      training_(std::move(training_weights)) {}

WeightModel WeightModel::oracle(CovariateFn w) {
  return WeightModel(WeightBackend::Oracle, std::move(w), {}, {});
}

NuisanceSet::NuisanceSet(WeightModel w, PropensityModel pi, OutcomeModel q,
                         double rho, bool is_oracle)
    : weight(std::move(w)),
      propensity(std::move(pi)),
      outcome(std::move(q)),
      rho_hat(rho),
      oracle(is_oracle) {
  if (!(rho_hat > 0.0 && rho_hat < 1.0)) {
    throw Error(ErrorCode::InvalidRho, "rho_hat must lie in (0, 1)");
  }
}

}  // namespace shiftval
