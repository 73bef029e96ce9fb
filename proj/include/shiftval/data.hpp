#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shiftval {

enum class DatasetKind { Type1, Type2 };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

// One pooled row. s = 1 marks the training population, s = 0 the
// calibration (testing) population. Treatment and outcome are either both
// observed or both missing.
struct Observation {
  std::vector<double> x;
  std::optional<int> a;     // +1 or -1
  std::optional<double> y;
  int s = 1;

  bool observed() const { return a.has_value(); }
};

// Immutable, validated pooled sample. Only validate_dataset() builds one.
class PooledDataset {
 public:
  const std::vector<Observation>& rows() const { return rows_; }
  const Observation& operator[](std::size_t i) const { return rows_[i]; }
  DatasetKind kind() const { return kind_; }
  std::size_t p() const { return p_; }
  std::size_t n() const { return rows_.size(); }
  std::size_t n1() const { return n1_; }
  std::size_t n0() const { return n0_; }
  double rho_hat() const {
    return static_cast<double>(n1_) / static_cast<double>(rows_.size());
  }

  std::vector<std::size_t> stratum_indices(int s) const;

  // Rows at `indices` (in the given order), revalidated under the same kind.
  PooledDataset subset(std::span<const std::size_t> indices) const;

  // Same rows with calibration (a, y) dropped.
  PooledDataset as_type2() const;

 private:
  friend PooledDataset validate_dataset(std::vector<Observation> rows,
                                        DatasetKind kind);
  PooledDataset() = default;

  std::vector<Observation> rows_;
  DatasetKind kind_ = DatasetKind::Type1;
  std::size_t p_ = 0;
  std::size_t n1_ = 0;
  std::size_t n0_ = 0;
};

// Throws EmptyStratum, MissingnessMismatch or DimensionMismatch.
PooledDataset validate_dataset(std::vector<Observation> rows, DatasetKind kind);

// Kind implied by the missingness pattern: Type2 when any calibration row
// lacks (a, y), Type1 otherwise.
DatasetKind infer_kind(const std::vector<Observation>& rows);

// d(x) = sign(intercept + coeffs'x), with sign(0) = +1.
struct LinearRule {
  double intercept = 0.0;
  std::vector<double> coeffs;
};

// Deterministic decision rule x -> {+1, -1}.
class Policy {
 public:
  using Rule = std::function<int(std::span<const double>)>;

  Policy(Rule rule, std::string label);

  static Policy constant(int action);
  static Policy linear(LinearRule rule);

  int operator()(std::span<const double> x) const { return rule_(x); }

  // -d, the rule that always picks the other arm.
  Policy negated() const;

  const std::string& label() const { return label_; }
  const std::optional<LinearRule>& linear_rule() const { return linear_; }

 private:
  Rule rule_;
  std::string label_;
  std::optional<LinearRule> linear_;
};

struct FoldAssignment {
  int k = 2;
  std::vector<int> bag_of;  // 1..k per row

  std::vector<std::size_t> in_bag(int bag) const;
  std::vector<std::size_t> out_of_bag(int bag) const;
};

// Stratified K-bag split: within each stratum rows are shuffled with the
// seeded generator and dealt round-robin, so bag sizes differ by at most one.
FoldAssignment split_cross_fit_folds(const PooledDataset& data, int k,
                                     std::uint64_t seed);

}  // namespace shiftval
