#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairsel/distribution.hpp"
#include "fairsel/pid.hpp"

namespace fairsel {

// A joint distribution prepared for feature scoring: one label Y, one
// protected attribute A (multiple protected columns are flattened into a
// single composite at construction), and n >= 1 features, each with
// cardinality >= 2.
struct ScoringProblem {
  JointDistribution dist;
  std::vector<int> feature_axes;  // ascending schema positions
  int protected_axis = -1;
  int label_axis = -1;
  SolverConfig solver;

  int n_features() const { return static_cast<int>(feature_axes.size()); }
  const std::string& feature_name(int i) const {
    return dist.schema().var(feature_axes[static_cast<std::size_t>(i)]).name;
  }
  const std::string& protected_name() const {
    return dist.schema().var(protected_axis).name;
  }
  const std::string& label_name() const { return dist.schema().var(label_axis).name; }
};

ScoringProblem make_scoring_problem(JointDistribution dist, SolverConfig solver = {});

// Human-readable "{X1,X3}" form of a subset, used in reports and errors.
std::string subset_to_string(const ScoringProblem& prob, SubsetKey key);

// Merge the features selected by key into one composite variable placed at
// the first member's position; the composite value is the row-major
// combination over ascending feature index and every other variable is
// untouched. An empty key yields a constant cardinality-1 composite in
// front. The composite is named "_xs".
JointDistribution flatten_subset(const JointDistribution& dist, SubsetKey key);

// v^Acc(S) = I(Y; X_S | {A} union X_{S^c}) in bits; 0 for the empty set.
double accuracy_coefficient(const ScoringProblem& prob, SubsetKey key);

// v^D(S) = SI(Y; X_S, A) * I(X_S; A) * I(X_S; A|Y) in bits^3; 0 for the
// empty set. The shared-information factor comes from pid_decompose with
// T = Y, R1 = flattened X_S, R2 = A. Convergence failures are rethrown
// tagged with the offending subset.
double discrimination_coefficient(const ScoringProblem& prob, SubsetKey key);

// Subset-indexed values over the feature lattice. Both value families are
// non-negative and monotone non-decreasing along inclusion; the empty
// subset scores zero in both.
struct CoefficientTable {
  int n = 0;
  std::vector<double> acc;   // bits, indexed by SubsetKey bits
  std::vector<double> disc;  // bits^3
  std::vector<char> filled;
  // Decompositions keyed by subset. Couplings larger than the cache bound
  // are dropped (scalar parts kept) so full tables stay small in memory.
  std::unordered_map<std::uint32_t, PidResult> pid_cache;

  bool complete() const;
  bool has(SubsetKey key) const;
  double acc_at(SubsetKey key) const;   // TableError if unfilled
  double disc_at(SubsetKey key) const;  // TableError if unfilled
};

struct TableOptions {
  int exact_limit = 12;                 // full-lattice guard; hard cap 20
  std::int64_t coupling_cache_cells = 4096;
};

// Populate every subset of the lattice (2^n entries). Subsets are evaluated
// in parallel up to FAIRSEL_THREADS (default: hardware concurrency); each
// entry is pure and written once, so results are thread-count independent.
CoefficientTable coefficient_table(const ScoringProblem& prob,
                                   const TableOptions& options = {});

// Populate only the given subsets (duplicates allowed, computed once).
CoefficientTable coefficient_table(const ScoringProblem& prob,
                                   const std::vector<SubsetKey>& subsets,
                                   const TableOptions& options = {});

namespace detail {

// FAIRSEL_THREADS override, clamped to [1, 64]; hardware concurrency otherwise.
int resolve_threads();

// Runs fn(0..count-1) on up to resolve_threads() workers. The first exception
// thrown by any call aborts the remaining work and is rethrown here.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn);

// Discrimination value plus, when a decomposition solve actually ran, the
// full decomposition for caching. Subsets where a zero factor short-circuits
// the product skip the solve and leave solved = false.
struct DiscEval {
  double disc = 0.0;
  bool solved = false;
  PidResult pid;
};
DiscEval discrimination_eval(const ScoringProblem& prob, SubsetKey key);

}  // namespace detail

}  // namespace fairsel
