#include <cmath>

#include "helpers.hpp"
#include "shiftval/fitting.hpp"
#include "shiftval/logistic.hpp"
#include "shiftval/simulation.hpp"

using namespace test;

TEST_CASE("propensity probabilities sum to one") {
  const PropensityModel pi = PropensityModel::constant(0.3);
  const std::vector<double> x{1.0};
  CHECK(pi.prob(1, x, 1) + pi.prob(-1, x, 1) == 1.0);
  CHECK(pi.prob(-1, x, 0) == doctest::Approx(0.7));
  require_error(ErrorCode::InvalidConfig, [] { PropensityModel::constant(1.0); });

  Rng rng(2);
  std::vector<Observation> rows;
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal();
    rows.push_back(training(v, rng.bernoulli(sigmoid(0.5 * v)) ? 1 : -1, 0.0));
  }
  rows.push_back(calib(0.0));
  const PropensityModel fitted = fit_propensity_logistic(dataset(rows), 1);
  for (double v : {-3.0, -0.1, 0.0, 2.5, 40.0}) {
    const std::vector<double> q{v};
    CHECK(fitted.prob(1, q, 1) + fitted.prob(-1, q, 1) == 1.0);
  }
  require_error(ErrorCode::MissingStratum, [&] { fitted.prob_treated(x, 0); });
}

TEST_CASE("logistic propensity under a null treatment model") {
  Rng rng(4);
  std::vector<Observation> rows;
  for (int i = 0; i < 2000; ++i) {
    rows.push_back(training(rng.normal(), i % 2 == 0 ? 1 : -1, 0.0));
  }
  rows.push_back(calib(0.0));
  const PropensityModel pi = fit_propensity_logistic(dataset(rows), 1);
  for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    const std::vector<double> x{v};
    CHECK(std::abs(pi.prob_treated(x, 1) - 0.5) < 0.02);
  }
  REQUIRE(pi.fit_info(1).has_value());
  CHECK(pi.fit_info(1)->converged);
}

TEST_CASE("logistic fit matches a brute-force likelihood maximum") {
  const std::vector<double> x{0.0, 1.0, 3.0};
  const std::vector<int> label{0, 1, 0};
  std::vector<Observation> rows;
  for (std::size_t i = 0; i < x.size(); ++i) {
    rows.push_back(training(x[i], label[i] == 1 ? 1 : -1, 0.0));
  }
  rows.push_back(calib(0.0));
  const PropensityModel pi = fit_propensity_logistic(dataset(rows), 1);
  const auto [b0, b1] = grid_logistic(x, label);
  const auto& coef = pi.fit_info(1)->coefficients;
  CHECK(std::abs(coef[0] - b0) < 1e-3);
  CHECK(std::abs(coef[1] - b1) < 1e-3);
}

TEST_CASE("logistic failure modes") {
  std::vector<Observation> separated{training(0.0, -1, 0.0), training(1.0, -1, 0.0),
                                     training(2.0, 1, 0.0), training(3.0, 1, 0.0), calib(0.0)};
  require_error(ErrorCode::Separation, [&] { fit_propensity_logistic(dataset(separated), 1); });

  std::vector<Observation> constant_x{training(1.0, -1, 0.0), training(1.0, 1, 0.0),
                                      training(1.0, 1, 0.0), calib(0.0)};
  require_error(ErrorCode::RankDeficient,
                [&] { fit_propensity_logistic(dataset(constant_x), 1); });
  require_error(ErrorCode::MissingStratum,
                [&] { fit_propensity_logistic(dataset(constant_x), 0); });
}

TEST_CASE("propensity predictions are clipped") {
  std::vector<Observation> rows;
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const double v = rng.normal();
    rows.push_back(training(v, rng.bernoulli(sigmoid(3.0 * v)) ? 1 : -1, 0.0));
  }
  rows.push_back(calib(0.0));
  const PropensityModel pi = fit_propensity_logistic(dataset(rows), 1, 0.01);
  const std::vector<double> far{100.0};
  const std::vector<double> far_neg{-100.0};
  CHECK(pi.prob_treated(far, 1) == doctest::Approx(0.99));
  CHECK(pi.prob_treated(far_neg, 1) == doctest::Approx(0.01));
}

TEST_CASE("fit_propensity_all fills the strata that carry treatments") {
  SimulationConfig config;
  config.n = 400;
  config.propensity = 0.5;
  config.kind = DatasetKind::Type2;
  const auto type2 = simulate_gaussian_shift(config).first;
  const PropensityModel p2 = fit_propensity_all(type2);
  CHECK(p2.has_stratum(1));
  CHECK_FALSE(p2.has_stratum(0));

  config.kind = DatasetKind::Type1;
  const PropensityModel p1 = fit_propensity_all(simulate_gaussian_shift(config).first);
  CHECK(p1.has_stratum(1));
  CHECK(p1.has_stratum(0));
}

TEST_CASE("linear outcome regression recovers a noiseless linear model") {
  SimulationConfig config;
  config.n = 300;
  config.noise_sd = 0.0;
  config.mu = {0.5, -0.5};
  config.outcome_coeffs = {1.0, -2.0, 0.5, 0.7, 1.5, -0.3};
  const auto [data, oracle] = simulate_gaussian_shift(config);
  const OutcomeModel q = fit_outcome_regression(data, OutcomeMethod::Linear);
  for (const auto& r : data.rows()) {
    for (int a : {1, -1}) CHECK(std::abs(q.q(r.x, a) - oracle.outcome.q(r.x, a)) < 1e-8);
  }
  const auto& coef = q.coefficients();
  REQUIRE(coef.size() == 6);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(std::abs(coef[j] - oracle.outcome.coefficients()[j]) < 1e-8);
  }
}

TEST_CASE("constant outcomes give a flat fit with zero effect") {
  std::vector<Observation> rows{training(0.0, 1, 3.0), training(1.0, -1, 3.0),
                                training(2.0, 1, 3.0), training(-1.0, -1, 3.0),
                                training(0.5, 1, 3.0), calib(0.0, -1, 3.0)};
  const OutcomeModel q = fit_outcome_regression(dataset(rows), OutcomeMethod::Linear);
  for (double v : {-2.0, 0.0, 4.0}) {
    const std::vector<double> x{v};
    CHECK(q.q(x, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(q.q(x, -1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(q.cte(x)) < 1e-10);
  }
}

TEST_CASE("linear outcome fit equals the normal-equations solution") {
  const std::vector<double> xs{-1.0, 0.0, 0.5, 1.0, 2.0, 3.0};
  const std::vector<int> as{1, -1, 1, -1, 1, -1};
  const std::vector<double> ys{0.3, -1.2, 2.2, 0.1, 4.0, -0.7};
  std::vector<Observation> rows;
  for (std::size_t i = 0; i < 6; ++i) rows.push_back(training(xs[i], as[i], ys[i]));
  rows.push_back(calib(0.0));
  const OutcomeModel q = fit_outcome_regression(dataset(rows), OutcomeMethod::Linear);

  std::vector<std::vector<double>> xtx(4, std::vector<double>(4, 0.0));
  std::vector<double> xty(4, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    const double a = as[i];
    const std::vector<double> z{1.0, xs[i], a, xs[i] * a};
    for (int r = 0; r < 4; ++r) {
      xty[r] += z[r] * ys[i];
      for (int c = 0; c < 4; ++c) xtx[r][c] += z[r] * z[c];
    }
  }
  const std::vector<double> beta = solve_dense(xtx, xty);
  for (std::size_t j = 0; j < 4; ++j) CHECK(q.coefficients()[j] == doctest::Approx(beta[j]).epsilon(1e-10));
  for (double v : {-0.5, 1.5}) {
    const std::vector<double> x{v};
    CHECK(q.q(x, 1) == doctest::Approx(beta[0] + beta[1] * v + beta[2] + beta[3] * v).epsilon(1e-10));
  }
}

TEST_CASE("linear outcome fit needs both arms") {
  std::vector<Observation> rows{training(0.0, 1, 1.0), training(1.0, 1, 2.0),
                                training(2.0, 1, 0.0), calib(0.0)};
  require_error(ErrorCode::RankDeficient,
                [&] { fit_outcome_regression(dataset(rows), OutcomeMethod::Linear); });
  require_error(ErrorCode::NoObservedOutcomes, [&] {
    fit_outcome_regression(dataset(rows), OutcomeMethod::KernelRidge, KernelSpec{});
  });
  require_error(ErrorCode::InvalidConfig,
                [&] { fit_outcome_regression(dataset(rows), OutcomeMethod::KernelRidge); });
}

TEST_CASE("kernel ridge equals its closed form on a small example") {
  // Per arm: alpha = (K + m lambda I)^{-1} (y - ybar), Q = ybar + k(x)'alpha.
  const std::vector<double> xt{0.0, 1.0, 2.5};
  const std::vector<double> yt{1.0, 2.0, 0.5};
  const std::vector<double> xc{-1.0, 0.5, 1.5};
  const std::vector<double> yc{0.0, -1.0, 3.0};
  std::vector<Observation> rows;
  for (int i = 0; i < 3; ++i) rows.push_back(training(xt[i], 1, yt[i]));
  for (int i = 0; i < 3; ++i) rows.push_back(training(xc[i], -1, yc[i]));
  rows.push_back(calib(0.0));
  const KernelSpec spec{KernelFamily::Rbf, 0.8, 0.1};
  const OutcomeModel q =
      fit_outcome_regression(dataset(rows), OutcomeMethod::KernelRidge, spec);
  auto k = [](double a, double b) { return std::exp(-(a - b) * (a - b) / (2.0 * 0.64)); };
  auto predict = [&](const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const double ybar = (ys[0] + ys[1] + ys[2]) / 3.0;
    std::vector<std::vector<double>> gram(3, std::vector<double>(3));
    std::vector<double> rhs(3);
    for (int i = 0; i < 3; ++i) {
      rhs[i] = ys[i] - ybar;
      for (int j = 0; j < 3; ++j) gram[i][j] = k(xs[i], xs[j]) + (i == j ? 3 * 0.1 : 0.0);
    }
    const auto alpha = solve_dense(gram, rhs);
    double v = ybar;
    for (int i = 0; i < 3; ++i) v += alpha[i] * k(xs[i], x);
    return v;
  };
  for (double v : {-0.5, 0.7, 2.0}) {
    const std::vector<double> x{v};
    CHECK(q.q(x, 1) == doctest::Approx(predict(xt, yt, v)).epsilon(1e-10));
    CHECK(q.q(x, -1) == doctest::Approx(predict(xc, yc, v)).epsilon(1e-10));
    CHECK(q.cte(x) == doctest::Approx(predict(xt, yt, v) - predict(xc, yc, v)).epsilon(1e-10));
  }
}

TEST_CASE("kernel ridge tracks a smooth noiseless surface") {
  Rng rng(12);
  std::vector<Observation> rows;
  auto truth = [](double x, int a) { return std::sin(x) + a * 0.5 * x; };
  for (int i = 0; i < 400; ++i) {
    const double x = 2.0 * rng.normal() / 2.0;
    const int a = i % 2 == 0 ? 1 : -1;
    rows.push_back(training(x, a, truth(x, a)));
  }
  rows.push_back(calib(0.0));
  const OutcomeModel q =
      fit_outcome_regression(dataset(rows), OutcomeMethod::KernelRidge, KernelSpec{});
  for (double v : {-1.0, 0.0, 0.8}) {
    const std::vector<double> x{v};
    CHECK(std::abs(q.q(x, 1) - truth(v, 1)) < 0.1);
    CHECK(std::abs(q.q(x, -1) - truth(v, -1)) < 0.1);
  }
}

TEST_CASE("kernels, bandwidth heuristic and instruments") {
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{3.0, 4.0};
  CHECK(kernel_value(KernelFamily::Rbf, 5.0, a, b) == doctest::Approx(std::exp(-0.5)));
  CHECK(kernel_value(KernelFamily::Linear, 1.0, b, b) == doctest::Approx(25.0));
  CHECK(median_pairwise_distance({{0.0}, {1.0}, {3.0}}) == doctest::Approx(2.0));
  require_error(ErrorCode::InvalidConfig,
                [] { validate_kernel_spec(KernelSpec{KernelFamily::Rbf, -1.0, std::nullopt}); });
  require_error(ErrorCode::InvalidConfig,
                [] { validate_kernel_spec(KernelSpec{KernelFamily::Rbf, std::nullopt, 0.0}); });

  const InstrumentSet set = InstrumentSet::constant_and_coordinates(2);
  CHECK(set.size() == 3);
  CHECK(set.evaluate(b) == std::vector<double>{1.0, 3.0, 4.0});
  CHECK(set.label(0) == "constant");
  CHECK(set.label(2) == "x_2");
  CHECK(InstrumentSet::coordinates(2).evaluate(b) == std::vector<double>{3.0, 4.0});
}
