#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairsel/dataset.hpp"
#include "fairsel/distribution.hpp"

namespace fairsel {

// Directed acyclic graph over one protected attribute A, features, and one
// label Y. Structural rules: A has no parents, A is never a parent of Y,
// and Y has no children.
struct CausalDag {
  VariableSchema schema;                  // node order
  std::vector<std::vector<int>> parents;  // per node, ascending node indices
};

// Builds and validates a DAG from (parent name, child name) edges.
CausalDag make_dag(VariableSchema schema,
                   const std::vector<std::pair<std::string, std::string>>& edges);

// Kahn's algorithm, always taking the lowest-index ready node, so the order
// is unique and deterministic.
std::vector<int> topological_order(const CausalDag& dag);

struct Cpt {
  std::vector<int> parents;  // ascending node indices, matching the DAG
  // One row per parent configuration (row-major over ascending parent
  // index), one column per node state; each row sums to 1 within 1e-12.
  Eigen::MatrixXd rows;
};

struct CausalModel {
  CausalDag dag;
  std::vector<Cpt> cpts;  // node order
  std::uint64_t seed = 0;
};

// Checks CPT shapes against the DAG and every row for non-negative entries
// summing to 1 within 1e-12. SchemaError / ArgumentError on violation.
void validate_model(const CausalModel& model);

// Every CPT row drawn from a symmetric Dirichlet(concentration); node i uses
// the generator stream (seed, i), so the model is a pure function of
// (dag, seed, concentration).
CausalModel random_cpts(const CausalDag& dag, std::uint64_t seed,
                        double concentration = 1.0);

// Dense product of the CPT factors. SizeError beyond 1e6 cells.
JointDistribution exact_joint(const CausalModel& model);

// m ancestral samples drawn from a single stream seeded by `seed`, rows in
// draw order, columns in node order.
Dataset forward_sample(const CausalModel& model, long m, std::uint64_t seed);

// Constructions realizing specific conditional-independence patterns:
//  - single_parent_y:      chain A -> X1 -> ... -> Xn -> Y; Y's one parent is Xn.
//  - single_child_a:       A -> X1, X1 -> Y and X1 -> Xj (j >= 2); A's one
//                          child X1 separates it from everything else.
//  - path_blocking:        A -> X1, A -> X2, X1 -> Y, X2 -> Y; {X1, X2}
//                          blocks every directed A-to-Y path; X3.. isolated.
//  - independent_feature:  A -> X1 -> Y with X2.. isolated noise.
// All variables are binary with full-support randomized noise levels drawn
// from per-node streams of `seed`.
enum class FixtureKind { single_parent_y, single_child_a, path_blocking, independent_feature };

FixtureKind fixture_from_string(const std::string& name);  // ArgumentError if unknown
std::string to_string(FixtureKind kind);

CausalModel make_fixture(FixtureKind kind, int n, std::uint64_t seed = 0);

// Five-feature demonstration model over binary nodes (A, X1..X5, Y) with
// edges A->X1, A->X5, X1->X2, X1->Y, X3->Y, X4->Y. X3 and X4 carry most of
// the label signal, X1 is the dominant protected-attribute proxy with a
// deliberately weak direct effect on Y, X2 is a noisy copy of X1, and X5 is
// a noisier proxy with no label path. Parameter ranges are fixed; draws come
// from per-node streams of `seed`.
CausalModel synthetic_standin(std::uint64_t seed);

// JSON document {nodes, edges, cpts, seed}; numeric round-trip is lossless.
nlohmann::ordered_json model_to_json(const CausalModel& model);
CausalModel model_from_json(const nlohmann::ordered_json& doc);

}  // namespace fairsel
