#include <doctest.h>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairsel/causal.hpp"
#include "fairsel/distribution.hpp"
#include "fairsel/errors.hpp"
#include "helpers.hpp"

using namespace fairsel;
using testutil::feat;
using testutil::label;
using testutil::prot;

namespace {

VariableSchema axy_schema() {
  return VariableSchema({prot("A"), feat("X1"), feat("X2"), label("Y")});
}

Cpt root_cpt(std::vector<double> p) {
  Cpt cpt;
  cpt.rows.resize(1, static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    cpt.rows(0, static_cast<Eigen::Index>(i)) = p[i];
  return cpt;
}

Cpt channel_cpt(int parent, const Eigen::MatrixXd& rows) {
  Cpt cpt;
  cpt.parents = {parent};
  cpt.rows = rows;
  return cpt;
}

Eigen::MatrixXd identity_channel() {
  Eigen::MatrixXd rows(2, 2);
  rows << 1.0, 0.0, 0.0, 1.0;
  return rows;
}

template <typename M>
bool same_matrix(const M& x, const M& y) {
  return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
}

}  // namespace

TEST_SUITE("causal") {

TEST_CASE("graph structural rules are enforced") {
  const auto schema = axy_schema();
  CHECK_THROWS_AS(make_dag(schema, {{"X1", "A"}}), SchemaError);
  CHECK_THROWS_AS(make_dag(schema, {{"A", "Y"}}), SchemaError);
  CHECK_THROWS_AS(make_dag(schema, {{"Y", "X1"}}), SchemaError);
  CHECK_THROWS_AS(make_dag(schema, {{"X1", "X2"}, {"X2", "X1"}}), ArgumentError);
  CHECK_THROWS_AS(make_dag(schema, {{"X1", "X1"}}), ArgumentError);
  CHECK_THROWS_AS(make_dag(schema, {{"X1", "X2"}, {"X1", "X2"}}), ArgumentError);
  CHECK_THROWS_AS(make_dag(VariableSchema({feat("X1"), label("Y")}), {}), SchemaError);
  CHECK_THROWS_AS(
      make_dag(VariableSchema({prot("A"), prot("B"), feat("X1"), label("Y")}), {}),
      SchemaError);
  CHECK_THROWS_AS(make_dag(VariableSchema({prot("A"), feat("X1")}), {}), SchemaError);
}

TEST_CASE("valid graphs keep sorted parent lists") {
  const CausalDag dag =
      make_dag(axy_schema(), {{"A", "X1"}, {"X2", "Y"}, {"X1", "Y"}, {"A", "X2"}});
  CHECK(dag.parents[0].empty());
  CHECK(dag.parents[1] == std::vector<int>{0});
  CHECK(dag.parents[2] == std::vector<int>{0});
  CHECK(dag.parents[3] == std::vector<int>{1, 2});
}

TEST_CASE("topological order takes the lowest ready index first") {
  // X2 has no parents, so it is ready from the start and beats X1's subtree.
  const CausalDag dag = make_dag(axy_schema(), {{"A", "X1"}, {"X1", "Y"}});
  CHECK(topological_order(dag) == std::vector<int>{0, 1, 2, 3});

  const CausalDag chain =
      make_dag(axy_schema(), {{"A", "X2"}, {"X2", "X1"}, {"X1", "Y"}});
  CHECK(topological_order(chain) == std::vector<int>{0, 2, 1, 3});
}

TEST_CASE("random conditional tables are deterministic stochastic matrices") {
  const CausalDag dag = make_dag(axy_schema(), {{"A", "X1"}, {"X1", "Y"}});
  const CausalModel a = random_cpts(dag, 42);
  const CausalModel b = random_cpts(dag, 42);
  const CausalModel c = random_cpts(dag, 43);

  bool all_equal = true;
  bool any_differs = false;
  for (std::size_t i = 0; i < a.cpts.size(); ++i) {
    if (!same_matrix(a.cpts[i].rows, b.cpts[i].rows)) all_equal = false;
    if (!same_matrix(a.cpts[i].rows, c.cpts[i].rows)) any_differs = true;
    for (Eigen::Index r = 0; r < a.cpts[i].rows.rows(); ++r) {
      CHECK(a.cpts[i].rows.row(r).minCoeff() >= 0.0);
      CHECK(std::abs(a.cpts[i].rows.row(r).sum() - 1.0) < 1e-12);
    }
  }
  CHECK(all_equal);
  CHECK(any_differs);
  CHECK_THROWS_AS(random_cpts(dag, 1, 0.0), ArgumentError);
}

TEST_CASE("high concentration pulls every row toward uniform") {
  std::vector<Variable> vars = {prot("A"), label("Y")};
  for (int i = 1; i <= 6; ++i) vars.insert(vars.begin() + i, {"X" + std::to_string(i), 3, Role::feature});
  const CausalDag dag = make_dag(VariableSchema(std::move(vars)), {});
  const CausalModel model = random_cpts(dag, 3, 1e4);
  for (const auto& cpt : model.cpts) {
    const double uniform = 1.0 / static_cast<double>(cpt.rows.cols());
    for (Eigen::Index r = 0; r < cpt.rows.rows(); ++r) {
      double tv = 0.0;
      for (Eigen::Index c = 0; c < cpt.rows.cols(); ++c)
        tv += 0.5 * std::abs(cpt.rows(r, c) - uniform);
      CHECK(tv < 0.05);
    }
  }
}

TEST_CASE("exact joint of a deterministic chain is a point mass") {
  const CausalDag dag = make_dag(axy_schema(), {{"A", "X1"}, {"X1", "Y"}});
  CausalModel model;
  model.dag = dag;
  model.cpts.resize(4);
  model.cpts[0] = root_cpt({1.0, 0.0});
  model.cpts[1] = channel_cpt(0, identity_channel());
  model.cpts[2] = root_cpt({0.0, 1.0});
  model.cpts[3] = channel_cpt(1, identity_channel());

  const JointDistribution d = exact_joint(model);
  const std::vector<int> hot = {0, 0, 1, 0};
  CHECK(d.prob(hot) == doctest::Approx(1.0).epsilon(1e-15));
  double mass = 0.0;
  for (double p : d.probs()) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact joint of independent uniform nodes is the uniform tensor") {
  const CausalDag dag = make_dag(axy_schema(), {});
  CausalModel model;
  model.dag = dag;
  model.cpts.resize(4);
  for (auto& cpt : model.cpts) cpt = root_cpt({0.5, 0.5});
  const JointDistribution d = exact_joint(model);
  for (double p : d.probs()) CHECK(p == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("exact joint marginals match ancestral propagation") {
  const CausalDag dag = make_dag(axy_schema(), {{"A", "X1"}, {"X1", "Y"}});
  const CausalModel model = random_cpts(dag, 11);
  const JointDistribution joint = exact_joint(model);

  // Hand propagation along the chain A -> X1 -> Y; X2 is a root.
  const auto& pa = model.cpts[0].rows;
  const auto& px1 = model.cpts[1].rows;
  const auto& py = model.cpts[3].rows;
  double x1_1 = pa(0, 0) * px1(0, 1) + pa(0, 1) * px1(1, 1);
  double y_1 = (1.0 - x1_1) * py(0, 1) + x1_1 * py(1, 1);

  const JointDistribution ma = marginalize(joint, {"A"});
  const JointDistribution mx1 = marginalize(joint, {"X1"});
  const JointDistribution mx2 = marginalize(joint, {"X2"});
  const JointDistribution my = marginalize(joint, {"Y"});
  CHECK(ma.probs()[1] == doctest::Approx(pa(0, 1)).epsilon(1e-12));
  CHECK(mx1.probs()[1] == doctest::Approx(x1_1).epsilon(1e-12));
  CHECK(mx2.probs()[1] == doctest::Approx(model.cpts[2].rows(0, 1)).epsilon(1e-12));
  CHECK(my.probs()[1] == doctest::Approx(y_1).epsilon(1e-12));
}

TEST_CASE("exact joint refuses state spaces beyond the dense cap") {
  std::vector<Variable> vars;
  vars.push_back({"A", 4, Role::protected_attr});
  for (int i = 1; i <= 8; ++i) vars.push_back({"X" + std::to_string(i), 4, Role::feature});
  vars.push_back({"Y", 4, Role::label});
  const CausalDag dag = make_dag(VariableSchema(std::move(vars)), {});
  const CausalModel model = random_cpts(dag, 0);
  CHECK_THROWS_AS(exact_joint(model), SizeError);
}

TEST_CASE("forward sampling is deterministic and matches the joint") {
  const CausalModel model = make_fixture(FixtureKind::path_blocking, 3, 21);
  CHECK_THROWS_AS(forward_sample(model, 0, 1), ArgumentError);

  const Dataset a = forward_sample(model, 200, 5);
  const Dataset b = forward_sample(model, 200, 5);
  CHECK(same_matrix(a.codes, b.codes));
  CHECK(a.provenance.rows_read == 200);
  CHECK(a.provenance.rows_dropped == 0);
  CHECK(a.provenance.source.find("forward_sample") != std::string::npos);

  const Dataset c = forward_sample(model, 200, 6);
  CHECK(!same_matrix(a.codes, c.codes));

  // Empirical cell frequencies approach the exact joint in total variation.
  const long m = 100000;
  const Dataset big = forward_sample(model, m, 9);
  const JointDistribution joint = exact_joint(model);
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(joint.cell_count());
  std::vector<int> idx(static_cast<std::size_t>(big.schema.size()));
  for (long r = 0; r < big.rows(); ++r) {
    for (int i = 0; i < big.schema.size(); ++i) idx[static_cast<std::size_t>(i)] = big.codes(r, i);
    freq[joint.to_linear(idx)] += 1.0 / static_cast<double>(m);
  }
  double tv = 0.0;
  for (std::int64_t cell = 0; cell < joint.cell_count(); ++cell)
    tv += 0.5 * std::abs(freq[cell] - joint.probs()[cell]);
  CHECK(tv < 0.02);
}

TEST_CASE("deterministic models sample constant records") {
  const CausalDag dag = make_dag(axy_schema(), {{"A", "X1"}, {"X1", "Y"}});
  CausalModel model;
  model.dag = dag;
  model.cpts.resize(4);
  model.cpts[0] = root_cpt({0.0, 1.0});
  model.cpts[1] = channel_cpt(0, identity_channel());
  model.cpts[2] = root_cpt({1.0, 0.0});
  model.cpts[3] = channel_cpt(1, identity_channel());
  const Dataset data = forward_sample(model, 50, 3);
  for (long r = 0; r < data.rows(); ++r) {
    CHECK(data.codes(r, 0) == 1);
    CHECK(data.codes(r, 1) == 1);
    CHECK(data.codes(r, 2) == 0);
    CHECK(data.codes(r, 3) == 1);
  }
}

TEST_CASE("fixture kinds parse and print") {
  CHECK(fixture_from_string("single_parent_y") == FixtureKind::single_parent_y);
  CHECK(fixture_from_string("path_blocking") == FixtureKind::path_blocking);
  CHECK(to_string(FixtureKind::single_child_a) == "single_child_a");
  CHECK(to_string(FixtureKind::independent_feature) == "independent_feature");
  CHECK_THROWS_AS(fixture_from_string("nope"), ArgumentError);
  CHECK_THROWS_AS(make_fixture(FixtureKind::single_parent_y, 1, 0), ArgumentError);
}

TEST_CASE("fixtures realize their separation patterns") {
  for (std::uint64_t seed : {0ull, 7ull}) {
    const JointDistribution chain =
        exact_joint(make_fixture(FixtureKind::single_parent_y, 3, seed));
    CHECK(cond_mutual_info(chain, {"Y"}, {"A", "X1", "X2"}, {"X3"}) < 1e-9);

    const JointDistribution star =
        exact_joint(make_fixture(FixtureKind::single_child_a, 3, seed));
    CHECK(cond_mutual_info(star, {"A"}, {"Y", "X2", "X3"}, {"X1"}) < 1e-9);

    const JointDistribution blocked =
        exact_joint(make_fixture(FixtureKind::path_blocking, 3, seed));
    CHECK(cond_mutual_info(blocked, {"A"}, {"Y"}, {"X1", "X2"}) < 1e-9);
    CHECK(mutual_info(blocked, {"X3"}, {"A", "X1", "X2", "Y"}) < 1e-9);

    const JointDistribution indep =
        exact_joint(make_fixture(FixtureKind::independent_feature, 3, seed));
    CHECK(mutual_info(indep, {"X2"}, {"A"}) < 1e-9);
    CHECK(mutual_info(indep, {"X2"}, {"Y"}) < 1e-9);
    CHECK(mutual_info(indep, {"X3"}, {"A", "X1", "Y"}) < 1e-9);
  }
}

TEST_CASE("demonstration model has the documented shape") {
  const CausalModel model = synthetic_standin(4);
  validate_model(model);
  const auto& schema = model.dag.schema;
  REQUIRE(schema.size() == 7);
  CHECK(schema.var(0).name == "A");
  CHECK(schema.var(6).name == "Y");
  CHECK(model.dag.parents[1] == std::vector<int>{0});  // A -> X1
  CHECK(model.dag.parents[2] == std::vector<int>{1});  // X1 -> X2
  CHECK(model.dag.parents[5] == std::vector<int>{0});  // A -> X5
  CHECK(model.dag.parents[6] == std::vector<int>{1, 3, 4});

  const CausalModel again = synthetic_standin(4);
  CHECK(model_to_json(model) == model_to_json(again));
  const CausalModel other = synthetic_standin(5);
  CHECK(model_to_json(model) != model_to_json(other));
}

TEST_CASE("model serialization round trips exactly") {
  const CausalModel model = random_cpts(
      make_dag(axy_schema(), {{"A", "X1"}, {"X1", "X2"}, {"X2", "Y"}}), 77);
  const nlohmann::ordered_json doc = model_to_json(model);
  const CausalModel back = model_from_json(doc);
  validate_model(back);
  CHECK(back.seed == model.seed);
  REQUIRE(back.cpts.size() == model.cpts.size());
  for (std::size_t i = 0; i < model.cpts.size(); ++i) {
    CHECK(back.cpts[i].parents == model.cpts[i].parents);
    CHECK(same_matrix(back.cpts[i].rows, model.cpts[i].rows));
  }
  CHECK(model_to_json(back) == doc);
}

TEST_CASE("malformed model documents are rejected") {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  CHECK_THROWS_AS(model_from_json(doc), ParseError);

  nlohmann::ordered_json bad = model_to_json(synthetic_standin(0));
  bad["edges"].push_back("A");  // not a [parent, child] pair
  CHECK_THROWS_AS(model_from_json(bad), ParseError);

  nlohmann::ordered_json missing = model_to_json(synthetic_standin(0));
  missing["cpts"].erase("Y");
  CHECK_THROWS_AS(model_from_json(missing), ParseError);
}

}  // TEST_SUITE
