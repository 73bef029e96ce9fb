#include <cmath>

#include "helpers.hpp"
#include "shiftval/calibration.hpp"
#include "shiftval/estimators.hpp"
#include "shiftval/simulation.hpp"

using namespace test;

namespace {

OutcomeModel cte(std::function<double(double)> c) {
  return outcome([c](Covariates x, int a) { return a == 1 ? c(x[0]) : 0.0; });
}

Policy threshold(double cut) { return Policy::linear({-cut, {1.0}}); }

}  // namespace

TEST_CASE("covariates-only calibration value") {
  const std::vector<Observation> rows{calib(0.0), calib(1.0), calib(2.0), training(5.0, 1, 1.0)};
  CHECK(calib_value_covariates_only(rows, cte([](double) { return 0.0; }), threshold(0.5)) == 0.0);
  const auto one = cte([](double) { return 1.0; });
  CHECK(calib_value_covariates_only(rows, one, Policy::constant(1)) == 1.0);
  CHECK(calib_value_covariates_only(rows, one, Policy::constant(-1)) == -1.0);

  // C = (2, -1, 3) with d = (+1, +1, -1).
  const auto hand = cte([](double x) { return x == 0.0 ? 2.0 : (x == 1.0 ? -1.0 : 3.0); });
  const Policy d = Policy::linear({1.5, {-1.0}});
  CHECK(calib_value_covariates_only(rows, hand, d) == doctest::Approx(-2.0 / 3.0));

  require_error(ErrorCode::EmptyCalibration, [&] {
    calib_value_covariates_only({training(0.0, 1, 1.0)}, one, Policy::constant(1));
  });
}

TEST_CASE("IPW calibration value") {
  const PropensityModel half = PropensityModel::constant(0.5);
  CHECK(calib_value_ipw({calib(0.0, 1, 0.0), calib(1.0, -1, 0.0)}, half, Policy::constant(1)) ==
        0.0);
  CHECK(calib_value_ipw({calib(0.0, 1, 4.0), calib(1.0, -1, 2.0)}, half, Policy::constant(1)) ==
        doctest::Approx(4.0));
  const std::vector<Observation> matched{calib(-1.0, -1, 3.0), calib(1.0, 1, 5.0),
                                         calib(2.0, 1, -2.0)};
  CHECK(calib_value_ipw(matched, half, threshold(0.0)) == doctest::Approx(2.0 * 2.0));

  require_error(ErrorCode::MissingTreatmentsOutcomes, [&] {
    calib_value_ipw({calib(0.0, 1, 4.0), calib(1.0)}, half, Policy::constant(1));
  });

  // The stratum switch reads the other propensity slot.
  const PropensityModel split([](Covariates) { return 0.5; }, [](Covariates) { return 0.25; },
                              "test");
  const std::vector<Observation> one{calib(0.0, 1, 1.0)};
  CHECK(calib_value_ipw(one, split, Policy::constant(1)) == doctest::Approx(2.0));
  CHECK(calib_value_ipw(one, split, Policy::constant(1), 0) == doctest::Approx(4.0));
}

TEST_CASE("candidate sets") {
  require_error(ErrorCode::InvalidConfig, [] { CandidateSet(std::vector<Candidate>{}); });
  require_error(ErrorCode::InvalidConfig, [] {
    CandidateSet({{1.0, Policy::constant(1)}, {1.0, Policy::constant(-1)}});
  });
  const CandidateSet set({{2.0, Policy::constant(1)}, {0.5, Policy::constant(-1)}});
  CHECK(set.candidates().front().c == 0.5);
}

TEST_CASE("select_policy") {
  const std::vector<Observation> rows{calib(-1.0), calib(0.5), calib(2.0)};
  const auto eta = nuisances(unit_weight(), PropensityModel::constant(0.5),
                             cte([](double) { return 1.0; }));
  SUBCASE("single candidate") {
    const Selection s = select_policy(CandidateSet({{0.7, Policy::constant(-1)}}), rows,
                                      CalibrationMethod::CovariatesOnly, eta);
    CHECK(s.chosen_c == 0.7);
    CHECK(s.table.size() == 1);
    CHECK(s.table[0].value == -1.0);
  }
  SUBCASE("positive effect prefers treating") {
    const Selection s =
        select_policy(CandidateSet({{1.0, Policy::constant(1)}, {2.0, Policy::constant(-1)}}),
                      rows, CalibrationMethod::CovariatesOnly, eta);
    CHECK(s.chosen_c == 1.0);
    CHECK(s.chosen.label() == Policy::constant(1).label());
    CHECK(s.table[0].value == 1.0);
  }
  SUBCASE("ties go to the smaller constant") {
    const Selection s = select_policy(
        CandidateSet({{3.0, Policy::constant(1)}, {0.2, Policy::constant(1)}}), rows,
        CalibrationMethod::CovariatesOnly, eta);
    CHECK(s.chosen_c == 0.2);
  }
}

TEST_CASE("argmax is unchanged by rescaling values") {
  const std::vector<Observation> rows{calib(-1.5), calib(-0.2), calib(0.4), calib(1.1),
                                      calib(2.5)};
  std::vector<Candidate> cands;
  for (int k = 0; k < 6; ++k) cands.push_back({0.1 * k, threshold(-1.0 + 0.5 * k)});
  const CandidateSet set(cands);
  auto pick = [&](double scale) {
    const auto eta = nuisances(unit_weight(), PropensityModel::constant(0.5),
                               cte([scale](double x) { return scale * (x - 0.3); }));
    return select_policy(set, rows, CalibrationMethod::CovariatesOnly, eta);
  };
  const Selection base = pick(1.0);
  for (double scale : {0.01, 3.0, 250.0}) {
    const Selection s = pick(scale);
    CHECK(s.chosen_c == base.chosen_c);
    for (std::size_t i = 0; i < s.table.size(); ++i) {
      CHECK(s.table[i].value == doctest::Approx(scale * base.table[i].value));
    }
  }
}

TEST_CASE("covariates-only value equals the calibration-mean contrast plug-in") {
  SimulationConfig c;
  c.n = 500;
  c.mu = {0.3, -0.2};
  c.outcome_coeffs = {1.0, 0.2, 0.0, 0.4, 1.0, -0.5};
  c.seed = 14;
  const auto [data, oracle] = simulate_gaussian_shift(c);
  const Policy d = Policy::linear({0.1, {1.0, -1.0}});
  const double direct = calib_value_covariates_only(data.rows(), oracle.outcome, d);
  const double plugin = estimate_plugin_identification(data, oracle, d, Estimand::Contrast,
                                                       IdentificationForm::CalibrationMean)
                            .estimate;
  CHECK(direct == plugin);
}

TEST_CASE("oracle selection picks the best candidate on simulated truth") {
  SimulationConfig c;
  c.n = 4000;
  c.p = 1;
  c.mu = {0.5};
  c.noise_sd = 0.0;
  c.outcome_coeffs = {0.0, 1.0, 0.3, 1.0};  // C(x) = 2(0.3 + x)
  c.seed = 2;
  const auto [data, oracle] = simulate_gaussian_shift(c);
  std::vector<Candidate> cands;
  for (int k = 0; k < 7; ++k) cands.push_back({double(k), threshold(-1.5 + 0.5 * k)});
  const Selection s =
      select_policy(CandidateSet(cands), data.rows(), CalibrationMethod::CovariatesOnly, oracle);
  // Empirically best on the calibration sample, computed directly.
  double best = -1e300;
  double best_c = -1.0;
  for (const auto& cand : cands) {
    double v = 0.0;
    std::size_t n0 = 0;
    for (const auto& r : data.rows()) {
      if (r.s != 0) continue;
      v += 2.0 * (0.3 + r.x[0]) * cand.policy(r.x);
      ++n0;
    }
    v /= static_cast<double>(n0);
    if (v > best) {
      best = v;
      best_c = cand.c;
    }
  }
  CHECK(s.chosen_c == best_c);
  // The population optimum treats x > -0.3; the candidate nearest that cut wins.
  CHECK(s.chosen_c == 2.0);
}

TEST_CASE("calibration method names") {
  CHECK(parse_calibration_method("ipw") == CalibrationMethod::Ipw);
  CHECK(to_string(CalibrationMethod::CovariatesOnly) == "covariates_only");
  require_error(ErrorCode::ParseError, [] { parse_calibration_method("bogus"); });
}
