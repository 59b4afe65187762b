#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairsel/errors.hpp"

namespace fairsel {

enum class Role { feature, protected_attr, label };

Role role_from_string(const std::string& s);
std::string to_string(Role role);

struct Variable {
  std::string name;
  int cardinality = 0;
  Role role = Role::feature;

  bool operator==(const Variable&) const = default;
};

// Ordered list of named discrete variables. All tensors in this library are
// row-major over the schema order: the last variable's index varies fastest.
class VariableSchema {
 public:
  VariableSchema() = default;
  explicit VariableSchema(std::vector<Variable> vars);

  int size() const { return static_cast<int>(vars_.size()); }
  const Variable& var(int i) const { return vars_[static_cast<std::size_t>(i)]; }
  const std::vector<Variable>& vars() const { return vars_; }

  bool contains(const std::string& name) const;
  int index_of(const std::string& name) const;  // SchemaError if absent

  std::int64_t cell_count() const;
  std::vector<int> cardinalities() const;

  std::vector<int> feature_indices() const;
  std::vector<int> protected_indices() const;
  // Index of the unique label variable; SchemaError if absent or duplicated.
  int label_index() const;

  // Scoring and ingestion contexts require: exactly one label, at least one
  // protected attribute, every cardinality >= 2.
  void require_scoring_roles() const;

  bool operator==(const VariableSchema&) const = default;

 private:
  std::vector<Variable> vars_;
};

// Row-major strides for the given cardinalities (last axis has stride 1).
std::vector<std::int64_t> row_major_strides(const std::vector<int>& cards);

// Odometer step over a multi-index; returns false after the last cell.
bool next_cell(std::span<int> idx, std::span<const int> cards);

// Dense joint probability mass function over a schema.
class JointDistribution {
 public:
  JointDistribution() = default;

  // Validating constructor for user-supplied tensors: shape must match the
  // schema, entries must be >= 0, total mass within 1e-9 of one.
  static JointDistribution validated(VariableSchema schema, Eigen::VectorXd probs);

  // Trusted constructor for internally computed tensors (no checks beyond
  // the cell count).
  static JointDistribution from_tensor(VariableSchema schema, Eigen::VectorXd probs);

  const VariableSchema& schema() const { return schema_; }
  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::VectorXd& probs() { return probs_; }
  std::int64_t cell_count() const { return probs_.size(); }

  std::int64_t to_linear(std::span<const int> idx) const;
  void from_linear(std::int64_t cell, std::span<int> idx) const;
  double prob(std::span<const int> idx) const { return probs_[to_linear(idx)]; }

  // Scales the tensor to unit mass. ArgumentError on zero total.
  void normalize();

 private:
  VariableSchema schema_;
  Eigen::VectorXd probs_;
  std::vector<std::int64_t> strides_;
};

// Sum out every variable not named in keep. Kept variables stay in their
// original schema order. Throws SchemaError on unknown names, ArgumentError
// if keep is empty or has duplicates.
JointDistribution marginalize(const JointDistribution& dist,
                              const std::vector<std::string>& keep);

// Condition on the evidence {name -> value} and renormalize the remaining
// variables. DegenerateEvidenceError if the evidence has zero mass.
JointDistribution condition(const JointDistribution& dist,
                            const std::vector<std::pair<std::string, int>>& evidence);

// Shannon entropy (bits) of the marginal over vars.
double entropy(const JointDistribution& dist, const std::vector<std::string>& vars);

// I(A;B) in bits. Sets must be disjoint and non-empty. Values in [-1e-12, 0)
// clamp to zero; anything lower raises IntegrityError.
double mutual_info(const JointDistribution& dist,
                   const std::vector<std::string>& vars_a,
                   const std::vector<std::string>& vars_b);

// I(A;B|C) in bits; C may be empty, all three pairwise disjoint.
double cond_mutual_info(const JointDistribution& dist,
                        const std::vector<std::string>& vars_a,
                        const std::vector<std::string>& vars_b,
                        const std::vector<std::string>& vars_c);

// Permute variables into the given order (every schema name exactly once).
JointDistribution reorder(const JointDistribution& dist,
                          const std::vector<std::string>& order);

// Replace the axis block [start, start+count) by a single composite variable
// whose value is the row-major combination of the merged axes. Because the
// block is contiguous, the tensor is reused unchanged.
JointDistribution merge_adjacent(const JointDistribution& dist, int start, int count,
                                 const std::string& name, Role role);

// Bitmask over feature positions 0..n-1 (not schema positions).
class SubsetKey {
 public:
  SubsetKey() = default;
  explicit SubsetKey(std::uint32_t bits) : bits_(bits) {}
  static SubsetKey full(int n);

  std::uint32_t bits() const { return bits_; }
  bool empty() const { return bits_ == 0; }
  bool contains(int i) const { return (bits_ >> i) & 1u; }
  int count() const;
  SubsetKey with(int i) const { return SubsetKey(bits_ | (1u << i)); }
  SubsetKey without(int i) const { return SubsetKey(bits_ & ~(1u << i)); }
  bool subset_of(SubsetKey other) const { return (bits_ & ~other.bits_) == 0; }
  std::vector<int> members() const;  // ascending

  auto operator<=>(const SubsetKey&) const = default;

 private:
  std::uint32_t bits_ = 0;
};

namespace detail {

// Neumaier compensated accumulation; keeps entropy sums well under the
// 1e-9 identity tolerances even on million-cell tensors.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }
};

// Marginal tensor over the given axes (row-major over axes order, which must
// be ascending by schema position for schema-consistent results).
Eigen::VectorXd project(const JointDistribution& dist, const std::vector<int>& axes);

// -sum p log2 p over one dense tensor.
double entropy_of_tensor(const Eigen::VectorXd& probs);

}  // namespace detail

}  // namespace fairsel
