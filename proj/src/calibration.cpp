#include "shiftval/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "shiftval/error.hpp"

namespace shiftval {

CandidateSet::CandidateSet(std::vector<Candidate> candidates)
    : candidates_(std::move(candidates)) {
  if (candidates_.empty()) {
    throw Error(ErrorCode::InvalidConfig, "candidate set is empty");
  }
  std::stable_sort(candidates_.begin(), candidates_.end(),
                   [](const Candidate& a, const Candidate& b) { return a.c < b.c; });
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (!std::isfinite(candidates_[i].c)) {
      throw Error(ErrorCode::InvalidConfig, "candidate c must be finite");
    }
    if (i > 0 && candidates_[i].c == candidates_[i - 1].c) {
      throw Error(ErrorCode::InvalidConfig,
                  "duplicate candidate c = " + std::to_string(candidates_[i].c));
    }
  }
}

double calib_value_covariates_only(const std::vector<Observation>& rows,
                                   const OutcomeModel& outcome, const Policy& policy) {
  double sum = 0.0;
  std::size_t n0 = 0;
  for (const Observation& obs : rows) {
    if (obs.s != 0) continue;
    sum += outcome.cte(obs.x) * static_cast<double>(policy(obs.x));
    ++n0;
  }
  if (n0 == 0) throw Error(ErrorCode::EmptyCalibration, "no calibration rows");
  return sum / static_cast<double>(n0);
}

double calib_value_ipw(const std::vector<Observation>& rows,
                       const PropensityModel& propensity, const Policy& policy,
                       int propensity_stratum) {
  double sum = 0.0;
  std::size_t n0 = 0;
  for (const Observation& obs : rows) {
    if (obs.s != 0) continue;
    if (!obs.observed() || !obs.y) {
      throw Error(ErrorCode::MissingTreatmentsOutcomes,
                  "IPW calibration needs (a, y) on every calibration row");
    }
    ++n0;
    if (policy(obs.x) != *obs.a) continue;
    const double pi = propensity.prob(*obs.a, obs.x, propensity_stratum);
    if (!(pi > 0.0)) {
      throw Error(ErrorCode::DegenerateDenominator, "non-positive propensity");
    }
    sum += *obs.y / pi;
  }
  if (n0 == 0) throw Error(ErrorCode::EmptyCalibration, "no calibration rows");
  return sum / static_cast<double>(n0);
}

std::string_view to_string(CalibrationMethod method) {
  return method == CalibrationMethod::CovariatesOnly ? "covariates_only" : "ipw";
}

CalibrationMethod parse_calibration_method(std::string_view text) {
  if (text == "covariates_only") return CalibrationMethod::CovariatesOnly;
  if (text == "ipw") return CalibrationMethod::Ipw;
  throw Error(ErrorCode::ParseError, "unknown calibration method '" + std::string(text) + "'");
}

Selection select_policy(const CandidateSet& candidates, const std::vector<Observation>& rows,
                        CalibrationMethod method, const NuisanceSet& nuisances,
                        int propensity_stratum) {
  std::vector<CandidateValue> table;
  table.reserve(candidates.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& cand = candidates.candidates()[i];
    const double value =
        method == CalibrationMethod::CovariatesOnly
            ? calib_value_covariates_only(rows, nuisances.outcome, cand.policy)
            : calib_value_ipw(rows, nuisances.propensity, cand.policy, propensity_stratum);
    table.push_back({cand.c, cand.policy.label(), value});
    // Strict comparison: candidates are sorted by c, so ties keep the smaller c.
    if (value > table[best].value) best = i;
  }
  const Candidate& chosen = candidates.candidates()[best];
  return Selection{chosen.c, chosen.policy, std::move(table)};
}

}  // namespace shiftval
