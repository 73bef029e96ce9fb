#include "shiftval/data.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <utility>

#include "shiftval/error.hpp"
#include "shiftval/rng.hpp"

namespace shiftval {

std::string_view to_string(DatasetKind kind) {
  return kind == DatasetKind::Type1 ? "type1" : "type2";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "type1" || text == "Type1") return DatasetKind::Type1;
  if (text == "type2" || text == "Type2") return DatasetKind::Type2;
  throw Error(ErrorCode::ParseError,
              "unknown dataset kind '" + std::string(text) + "'");
}

PooledDataset validate_dataset(std::vector<Observation> rows,
                               DatasetKind kind) {
  if (rows.empty()) {
    throw Error(ErrorCode::EmptyStratum, "dataset has no rows");
  }
  PooledDataset data;
  data.p_ = rows.front().x.size();
  if (data.p_ == 0) {
    throw Error(ErrorCode::DimensionMismatch, "covariate dimension is zero");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Observation& row = rows[i];
    auto where = [i] { return " (row " + std::to_string(i) + ")"; };
    if (row.x.size() != data.p_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(data.p_) + " covariates, got " +
                      std::to_string(row.x.size()) + where());
    }
    for (double v : row.x) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::MissingnessMismatch,
                    "non-finite covariate" + where());
      }
    }
    if (row.s != 0 && row.s != 1) {
      throw Error(ErrorCode::MissingnessMismatch,
                  "selection indicator must be 0 or 1" + where());
    }
    if (row.a.has_value() != row.y.has_value()) {
      throw Error(ErrorCode::MissingnessMismatch,
                  "treatment and outcome must be both present or both missing" +
                      where());
    }
    if (row.a && *row.a != 1 && *row.a != -1) {
      throw Error(ErrorCode::MissingnessMismatch,
                  "treatment must be +1 or -1" + where());
    }
    if (row.y && !std::isfinite(*row.y)) {
      throw Error(ErrorCode::MissingnessMismatch, "non-finite outcome" + where());
    }
    if (row.s == 1 && !row.observed()) {
      throw Error(ErrorCode::MissingnessMismatch,
                  "training rows must carry treatment and outcome" + where());
    }
    if (row.s == 0) {
      if (kind == DatasetKind::Type1 && !row.observed()) {
        throw Error(ErrorCode::MissingnessMismatch,
                    "Type1 calibration rows must carry treatment and outcome" +
                        where());
      }
      if (kind == DatasetKind::Type2 && row.observed()) {
        throw Error(ErrorCode::MissingnessMismatch,
                    "Type2 calibration rows must not carry treatment/outcome" +
                        where());
      }
    }
    (row.s == 1 ? data.n1_ : data.n0_) += 1;
  }
  if (data.n1_ == 0 || data.n0_ == 0) {
    throw Error(ErrorCode::EmptyStratum,
                "need at least one training and one calibration row (n1=" +
                    std::to_string(data.n1_) +
                    ", n0=" + std::to_string(data.n0_) + ")");
  }
  data.rows_ = std::move(rows);
  data.kind_ = kind;
  return data;
}

DatasetKind infer_kind(const std::vector<Observation>& rows) {
  for (const auto& row : rows) {
    if (row.s == 0 && !row.observed()) return DatasetKind::Type2;
  }
  return DatasetKind::Type1;
}

std::vector<std::size_t> PooledDataset::stratum_indices(int s) const {
  std::vector<std::size_t> out;
  out.reserve(s == 1 ? n1_ : n0_);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].s == s) out.push_back(i);
  }
  return out;
}

PooledDataset PooledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Observation> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(rows_.at(i));
  return validate_dataset(std::move(picked), kind_);
}

PooledDataset PooledDataset::as_type2() const {
  PooledDataset out = *this;
  for (auto& row : out.rows_) {
    if (row.s == 0) {
      row.a.reset();
      row.y.reset();
    }
  }
  out.kind_ = DatasetKind::Type2;
  return out;
}

Policy::Policy(Rule rule, std::string label)
    : rule_(std::move(rule)), label_(std::move(label)) {}

Policy Policy::constant(int action) {
  const int arm = action >= 0 ? 1 : -1;
  Policy policy([arm](std::span<const double>) { return arm; },
                arm == 1 ? "always(+1)" : "always(-1)");
  policy.linear_ = LinearRule{static_cast<double>(arm), {}};
  return policy;
}

Policy Policy::linear(LinearRule rule) {
  std::ostringstream label;
  label << "linear(" << rule.intercept;
  for (double c : rule.coeffs) label << "," << c;
  label << ")";
  auto shared = std::make_shared<const LinearRule>(rule);
  Policy policy(
      [shared](std::span<const double> x) {
        double score = shared->intercept;
        const std::size_t m = std::min(x.size(), shared->coeffs.size());
        for (std::size_t j = 0; j < m; ++j) score += shared->coeffs[j] * x[j];
        return score >= 0.0 ? 1 : -1;
      },
      label.str());
  policy.linear_ = std::move(rule);
  return policy;
}

Policy Policy::negated() const {
  Rule inner = rule_;
  return Policy([inner](std::span<const double> x) { return -inner(x); },
                "neg(" + label_ + ")");
}

std::vector<std::size_t> FoldAssignment::in_bag(int bag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bag_of.size(); ++i) {
    if (bag_of[i] == bag) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::out_of_bag(int bag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bag_of.size(); ++i) {
    if (bag_of[i] != bag) out.push_back(i);
  }
  return out;
}

FoldAssignment split_cross_fit_folds(const PooledDataset& data, int k,
                                     std::uint64_t seed) {
  if (k < 2) {
    throw Error(ErrorCode::StratumTooSmall, "need at least 2 bags");
  }
  const auto k_size = static_cast<std::size_t>(k);
  if (data.n1() < k_size || data.n0() < k_size) {
    throw Error(ErrorCode::StratumTooSmall,
                "K=" + std::to_string(k) + " exceeds stratum size (n1=" +
                    std::to_string(data.n1()) +
                    ", n0=" + std::to_string(data.n0()) + ")");
  }
  FoldAssignment folds;
  folds.k = k;
  folds.bag_of.assign(data.n(), 0);
  Rng rng(seed);
  for (int s : {1, 0}) {
    std::vector<std::size_t> idx = data.stratum_indices(s);
    // Fisher-Yates driven by the documented generator.
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    for (std::size_t j = 0; j < idx.size(); ++j) {
      folds.bag_of[idx[j]] = static_cast<int>(j % k_size) + 1;
    }
  }
  return folds;
}

}  // namespace shiftval
