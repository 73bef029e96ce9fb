#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "shiftval/data.hpp"
#include "shiftval/error.hpp"
#include "shiftval/nuisance.hpp"

namespace test {

using namespace shiftval;

inline Observation row(std::vector<double> x, std::optional<int> a, std::optional<double> y,
                       int s) {
  Observation obs;
  obs.x = std::move(x);
  obs.a = a;
  obs.y = y;
  obs.s = s;
  return obs;
}

inline Observation training(double x, int a, double y) { return row({x}, a, y, 1); }
inline Observation calib(double x) { return row({x}, std::nullopt, std::nullopt, 0); }
inline Observation calib(double x, int a, double y) { return row({x}, a, y, 0); }

inline PooledDataset dataset(std::vector<Observation> rows,
                             std::optional<DatasetKind> kind = std::nullopt) {
  const DatasetKind k = kind.value_or(infer_kind(rows));
  return validate_dataset(std::move(rows), k);
}

inline WeightModel unit_weight() {
  return WeightModel::oracle([](Covariates) { return 1.0; });
}

inline OutcomeModel outcome(OutcomeModel::Fn q) { return OutcomeModel(std::move(q), "test"); }

inline OutcomeModel zero_outcome() {
  return outcome([](Covariates, int) { return 0.0; });
}

inline NuisanceSet nuisances(WeightModel w, PropensityModel pi, OutcomeModel q,
                             double rho = 0.5) {
  return NuisanceSet(std::move(w), std::move(pi), std::move(q), rho);
}

// Expects `fn` to throw shiftval::Error with the given code.
template <class Fn>
void require_error(ErrorCode code, Fn&& fn) {
  bool thrown = false;
  try {
    fn();
  } catch (const Error& e) {
    thrown = true;
    const std::string what = e.what();
    CHECK_MESSAGE(e.code() == code, "got " << what);
  }
  CHECK_MESSAGE(thrown, "expected " << error_name(code));
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace test

namespace test {

// Gaussian elimination with partial pivoting, independent of the library's
// Eigen-based solvers.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

// Bernoulli log-likelihood of labels under eta = b0 + b1 x.
inline double logistic_loglik(const std::vector<double>& x, const std::vector<int>& label,
                              double b0, double b1) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = b0 + b1 * x[i];
    const double log1p_exp = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    ll += label[i] * eta - log1p_exp;
  }
  return ll;
}

// Coarse-to-fine grid maximisation of the two-parameter logistic likelihood.
inline std::pair<double, double> grid_logistic(const std::vector<double>& x,
                                               const std::vector<int>& label) {
  double best0 = 0.0;
  double best1 = 0.0;
  double span = 8.0;
  for (int level = 0; level < 6; ++level) {
    const double step = span / 100.0;
    double c0 = best0;
    double c1 = best1;
    double best = -1e300;
    for (int i = -100; i <= 100; ++i) {
      for (int j = -100; j <= 100; ++j) {
        const double b0 = c0 + i * step;
        const double b1 = c1 + j * step;
        const double ll = logistic_loglik(x, label, b0, b1);
        if (ll > best) {
          best = ll;
          best0 = b0;
          best1 = b1;
        }
      }
    }
    span = 4.0 * step;
  }
  return {best0, best1};
}

}  // namespace test
