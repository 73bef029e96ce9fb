#include <cmath>
#include <regex>

#include "helpers.hpp"
#include "shiftval/montecarlo.hpp"

using namespace test;

namespace {

McEstimator oracle_estimator(std::string name, Estimand e, DatasetKind k) {
  McEstimator m;
  m.name = std::move(name);
  m.variant = {e, k};
  return m;
}

McConfig small_config() {
  McConfig c;
  c.base.n = 300;
  c.base.mu = {0.5, 0.5};
  c.base.outcome_coeffs = {1.0, 1.0, 0.5, 0.5, 1.0, -1.0};
  c.replications = 6;
  c.policy = Policy::linear({0.3, {1.0, 0.5}});
  c.seed = 40;
  c.truth_draws = 20000;
  c.variance_draws = 20000;
  c.menu.push_back(oracle_estimator("v2", Estimand::Value, DatasetKind::Type2));
  c.menu.push_back(oracle_estimator("c1", Estimand::Contrast, DatasetKind::Type1));
  McEstimator fitted;
  fitted.name = "aipsw";
  fitted.variant = {Estimand::Value, DatasetKind::Type2};
  fitted.recipe.weights = WeightBackend::AIPSW;
  fitted.recipe.outcome = OutcomeSource::Linear;
  fitted.crossfit_k = 3;
  c.menu.push_back(fitted);
  return c;
}

void require_same(const McSummary& a, const McSummary& b) {
  REQUIRE(a.estimators.size() == b.estimators.size());
  CHECK(a.mean_n == b.mean_n);
  for (std::size_t i = 0; i < a.estimators.size(); ++i) {
    const auto& x = a.estimators[i];
    const auto& y = b.estimators[i];
    CHECK(x.estimates == y.estimates);
    CHECK(x.ses == y.ses);
    CHECK(x.var_sqrt_n == y.var_sqrt_n);
    CHECK(x.coverage == y.coverage);
    CHECK(x.truth == y.truth);
    CHECK(x.target.nu == y.target.nu);
    CHECK(x.target.zeta == y.target.zeta);
  }
}

}  // namespace

TEST_CASE("noiseless oracle replicates have zero bias") {
  McConfig c;
  c.base.n = 200;
  c.base.noise_sd = 0.0;
  c.base.outcome_coeffs = {3.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  c.replications = 2;
  c.truth_draws = 1000;
  c.variance_draws = 1000;
  c.menu.push_back(oracle_estimator("v1", Estimand::Value, DatasetKind::Type1));
  c.menu.push_back(oracle_estimator("v2", Estimand::Value, DatasetKind::Type2));
  const McSummary s = run_replications(c);
  for (const auto& e : s.estimators) {
    CHECK(e.truth == doctest::Approx(3.0));
    CHECK(std::abs(e.bias) < 1e-12);
    CHECK(e.estimates[0] == e.estimates[1]);
  }
}

TEST_CASE("summaries are deterministic and independent of thread count") {
  McConfig c = small_config();
  c.threads = 1;
  const McSummary one = run_replications(c);
  const McSummary again = run_replications(c);
  require_same(one, again);
  c.threads = 3;
  require_same(one, run_replications(c));
}

TEST_CASE("per-replicate estimates match a direct replay") {
  const McConfig c = small_config();
  const McSummary s = run_replications(c);
  const auto& v2 = s.find("v2");
  for (int r = 0; r < c.replications; ++r) {
    SimulationConfig sim = c.base;
    sim.seed = c.seed + static_cast<std::uint64_t>(r);
    const auto [data, oracle] = simulate_gaussian_shift(sim);
    const auto rep = estimate_efficient(data, oracle, c.policy, Estimand::Value,
                                        DatasetKind::Type2);
    CHECK(v2.estimates[r] == rep.estimate);
    CHECK(v2.n[r] == data.n());
    CHECK(v2.n0[r] == data.n0());
  }
  // Aggregates follow from the stored replicates.
  std::vector<double> scaled;
  double covered = 0.0;
  for (int r = 0; r < c.replications; ++r) {
    scaled.push_back(std::sqrt(double(v2.n[r])) * (v2.estimates[r] - v2.truth));
    const double half = 1.959963984540054 * v2.ses[r];
    covered += std::abs(v2.estimates[r] - v2.truth) <= half ? 1.0 : 0.0;
  }
  CHECK(v2.var_sqrt_n == doctest::Approx(sd(scaled) * sd(scaled)).epsilon(1e-10));
  CHECK(v2.coverage == doctest::Approx(covered / c.replications));
  CHECK(v2.mean_estimate == doctest::Approx(mean(v2.estimates)));
  CHECK(v2.bias == doctest::Approx(v2.mean_estimate - v2.truth));
  CHECK(v2.bias_se == doctest::Approx(sd(v2.estimates) / std::sqrt(6.0)));
  CHECK(v2.coverage >= 0.0);
  CHECK(v2.coverage <= 1.0);
  CHECK(s.find("aipsw").crossfit_k == 3);
  CHECK(s.find("aipsw").weights == "aipsw");
}

TEST_CASE("config validation") {
  McConfig c = small_config();
  c.replications = 1;
  require_error(ErrorCode::InvalidConfig, [&] { validate_mc_config(c); });
  c = small_config();
  c.menu.clear();
  require_error(ErrorCode::InvalidConfig, [&] { validate_mc_config(c); });
  c = small_config();
  c.menu[2].crossfit_k = 1;
  require_error(ErrorCode::InvalidConfig, [&] { run_replications(c); });
  c = small_config();
  c.truth_draws = 10;
  require_error(ErrorCode::InvalidConfig, [&] { validate_mc_config(c); });
}

TEST_CASE("a failing replicate aborts with its index") {
  McConfig c;
  c.base.n = 8;
  c.base.mu = {4.0, 4.0};
  c.replications = 20;
  c.seed = 3;
  c.truth_draws = 1000;
  c.variance_draws = 1000;
  McEstimator eb;
  eb.name = "eb";
  eb.recipe.weights = WeightBackend::EntropyBalancing;
  eb.recipe.propensity = PropensitySource::Oracle;
  c.menu.push_back(eb);
  std::string message;
  try {
    run_replications(c);
  } catch (const Error& e) {
    message = e.what();
  }
  std::smatch m;
  REQUIRE(std::regex_search(message, m, std::regex("replicate ([0-9]+)")));
  const int r = std::stoi(m[1]);
  // Restarting at the reported replicate fails immediately.
  c.seed += static_cast<std::uint64_t>(r);
  try {
    run_replications(c);
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("replicate 0") != std::string::npos);
  }
}

TEST_CASE("bound targets and comparisons") {
  TheoreticalVariance tv;
  tv.nu = 1.5;
  tv.zeta = 0.5;
  tv.variant = {Estimand::Value, DatasetKind::Type2};
  CHECK(bound_target(tv, {100, 100}, VarianceScaling::RootN) == doctest::Approx(4.0));
  CHECK(bound_target(tv, {300, 100}, VarianceScaling::RootN) ==
        doctest::Approx(1.5 * 4.0 / 3.0 + 0.5 * 4.0));
  CHECK(bound_target(tv, {5000, 50}, VarianceScaling::RootN0) == 0.5);

  McEstimatorSummary e;
  e.name = "x";
  e.variant = tv.variant;
  e.var_sqrt_n = 4.0;
  const BoundComparison exact = compare_to_bound(e, tv, {100, 100}, VarianceScaling::RootN, 0.1);
  CHECK(exact.ratio == 1.0);
  CHECK(exact.pass);
  e.var_sqrt_n = 4.5;
  CHECK_FALSE(compare_to_bound(e, tv, {100, 100}, VarianceScaling::RootN, 0.1).pass);
  e.var_sqrt_n0 = 0.52;
  CHECK(compare_to_bound(e, tv, {5000, 50}, VarianceScaling::RootN0, 0.15).pass);

  e.variant = {Estimand::Contrast, DatasetKind::Type2};
  require_error(ErrorCode::VariantMismatch, [&] {
    compare_to_bound(e, tv, {100, 100}, VarianceScaling::RootN, 0.1);
  });
  McSummary s;
  s.estimators.push_back(e);
  require_error(ErrorCode::VariantMismatch, [&] {
    compare_to_bound(s, tv, {100, 100}, VarianceScaling::RootN, 0.1);
  });
}
