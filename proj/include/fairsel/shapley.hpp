#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairsel/coefficients.hpp"

namespace fairsel {

// Coalition weight |T|! (n-|T|-1)! / n! = 1 / (n * C(n-1, |T|)), with the
// binomial computed exactly in integers. ArgumentError unless
// 0 <= t_size <= n-1.
double shapley_weight(int t_size, int n);

enum class ValueKind { accuracy, discrimination };

// phi_i = sum over subsets T not containing i of weight(|T|, n) * (v(T u {i})
// - v(T)). TableError if the table does not cover every subset; SizeError
// outside 1..20 features.
std::vector<double> shapley_exact(const CoefficientTable& table, ValueKind kind);

struct MonteCarloEstimate {
  std::vector<double> phi;
  std::vector<double> std_err;  // sample standard deviation / sqrt(permutations)
};

// Permutation-sampling estimator of the Shapley value: permutation p comes
// from Rng::stream(seed, p), each one contributing the marginal gain
// value(prefix + i) - value(prefix) for every feature i. Accumulation runs
// in permutation-index order, so results are deterministic in (seed,
// permutations) and independent of thread count.
MonteCarloEstimate shapley_monte_carlo(const std::function<double(SubsetKey)>& value,
                                       int n, long permutations, std::uint64_t seed);

// F_i = phi_acc[i] - alpha * phi_d[i], no clamping. ArgumentError on length
// mismatch or negative alpha.
std::vector<double> fairness_score(const std::vector<double>& phi_acc,
                                   const std::vector<double>& phi_d, double alpha);

struct SelectionPolicy {
  enum class Kind { top_k, threshold };
  Kind kind = Kind::top_k;
  int k = 0;
  double tau = 0.0;

  static SelectionPolicy top_k(int k);
  static SelectionPolicy threshold(double tau);
};

// Feature indices sorted by descending score; ties broken by ascending index.
// ArgumentError if any score is not finite.
std::vector<int> rank_features(const std::vector<double>& scores);

struct ShapleyScores {
  std::string method;            // "exact" or "monte_carlo"
  std::vector<double> phi_acc;   // bits
  std::vector<double> phi_d;     // bits^3
  std::vector<double> fairness;  // phi_acc - alpha * phi_d
  double alpha = 1.0;
  std::vector<double> std_err_acc;   // empty in exact mode
  std::vector<double> std_err_disc;  // empty in exact mode
  std::uint64_t seed = 0;            // Monte Carlo only
  long permutations = 0;             // Monte Carlo only
};

// Ranked feature indices (descending fairness, ties by ascending index)
// surviving the policy: the k best for top_k (ArgumentError if k exceeds the
// feature count), or everything with fairness >= tau for threshold.
std::vector<int> rank_and_select(const ShapleyScores& scores,
                                 const SelectionPolicy& policy);

struct ScoreOptions {
  double alpha = 1.0;
  bool monte_carlo = false;
  long permutations = 20000;  // Monte Carlo only
  std::uint64_t seed = 1;     // Monte Carlo only
  TableOptions table;
};

// Full scoring pipeline. Exact mode builds the complete coefficient table
// and aggregates it; Monte Carlo mode samples one set of permutations,
// evaluates the distinct prefix subsets in parallel, then feeds both value
// families through the same permutations. When table_out is non-null it
// receives the evaluated table (complete in exact mode, prefix subsets only
// in Monte Carlo mode; left untouched beyond 20 features).
ShapleyScores score_features(const ScoringProblem& prob, const ScoreOptions& options = {},
                             CoefficientTable* table_out = nullptr);

}  // namespace fairsel
