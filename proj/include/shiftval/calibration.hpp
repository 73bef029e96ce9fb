#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shiftval/data.hpp"
#include "shiftval/nuisance.hpp"

namespace shiftval {

struct Candidate {
  double c = 0.0;  // distributional-robustness constant
  Policy policy;
};

// Nonempty candidate list with distinct c, kept sorted by c.
class CandidateSet {
 public:
  // Throws InvalidConfig for an empty list or repeated c.
  explicit CandidateSet(std::vector<Candidate> candidates);

  const std::vector<Candidate>& candidates() const { return candidates_; }
  std::size_t size() const { return candidates_.size(); }

 private:
  std::vector<Candidate> candidates_;
};

// (1/n0) sum_{S=0} C(X_i) d(X_i). Rows with s = 1 are ignored.
// Throws EmptyCalibration when no calibration rows are present.
double calib_value_covariates_only(const std::vector<Observation>& rows,
                                   const OutcomeModel& outcome, const Policy& policy);

// (1/n0) sum_{S=0} 1[d(X_i) = A_i] Y_i / pi_A(A_i | X_i, s). The propensity
// stratum defaults to the training one.
// Throws MissingTreatmentsOutcomes if any calibration row lacks (a, y).
double calib_value_ipw(const std::vector<Observation>& rows,
                       const PropensityModel& propensity, const Policy& policy,
                       int propensity_stratum = 1);

enum class CalibrationMethod { CovariatesOnly, Ipw };

std::string_view to_string(CalibrationMethod method);
CalibrationMethod parse_calibration_method(std::string_view text);

struct CandidateValue {
  double c = 0.0;
  std::string label;
  double value = 0.0;
};

struct Selection {
  double chosen_c = 0.0;
  Policy chosen;
  std::vector<CandidateValue> table;  // ascending c
};

// Argmax of the calibration value over candidates; ties go to the smaller c.
Selection select_policy(const CandidateSet& candidates, const std::vector<Observation>& rows,
                        CalibrationMethod method, const NuisanceSet& nuisances,
                        int propensity_stratum = 1);

}  // namespace shiftval
