#include "fairsel/causal.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <unordered_set>

#include "fairsel/errors.hpp"
#include "fairsel/rng.hpp"

namespace fairsel {

namespace {

// Row index of a parent configuration: row-major over ascending parent index.
std::int64_t parent_row(const std::vector<int>& parents, const std::vector<int>& cards,
                        std::span<const int> assignment) {
  std::int64_t row = 0;
  for (int p : parents) {
    row = row * cards[static_cast<std::size_t>(p)] + assignment[static_cast<std::size_t>(p)];
  }
  return row;
}

std::int64_t parent_config_count(const std::vector<int>& parents, const std::vector<int>& cards) {
  std::int64_t n = 1;
  for (int p : parents) {
    n *= cards[static_cast<std::size_t>(p)];
    if (n > 1'000'000) throw SizeError("conditional table has more than 1e6 rows");
  }
  return n;
}

Eigen::MatrixXd bernoulli_rows(double p1) {
  Eigen::MatrixXd rows(1, 2);
  rows << 1.0 - p1, p1;
  return rows;
}

// Binary symmetric channel: child copies its parent, flipped with
// probability eps.
Eigen::MatrixXd bsc_rows(double eps) {
  Eigen::MatrixXd rows(2, 2);
  rows << 1.0 - eps, eps, eps, 1.0 - eps;
  return rows;
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Variable feature_var(const std::string& name) { return {name, 2, Role::feature}; }

VariableSchema fixture_schema(int n) {
  std::vector<Variable> vars;
  vars.push_back({"A", 2, Role::protected_attr});
  for (int i = 1; i <= n; ++i) vars.push_back(feature_var("X" + std::to_string(i)));
  vars.push_back({"Y", 2, Role::label});
  return VariableSchema(std::move(vars));
}

}  // namespace

CausalDag make_dag(VariableSchema schema,
                   const std::vector<std::pair<std::string, std::string>>& edges) {
  const int n = schema.size();
  if (schema.protected_indices().size() != 1)
    throw SchemaError("causal graph needs exactly one protected node");
  const int a = schema.protected_indices().front();
  const int y = schema.label_index();

  std::vector<std::set<int>> parent_sets(static_cast<std::size_t>(n));
  std::vector<int> out_degree(static_cast<std::size_t>(n), 0);
  for (const auto& [pname, cname] : edges) {
    const int p = schema.index_of(pname);
    const int c = schema.index_of(cname);
    if (p == c) throw ArgumentError("self edge on '" + pname + "'");
    if (!parent_sets[static_cast<std::size_t>(c)].insert(p).second)
      throw ArgumentError("duplicate edge " + pname + " -> " + cname);
    ++out_degree[static_cast<std::size_t>(p)];
  }

  if (!parent_sets[static_cast<std::size_t>(a)].empty())
    throw SchemaError("protected node must have no parents");
  if (parent_sets[static_cast<std::size_t>(y)].count(a))
    throw SchemaError("protected node must not be a parent of the label");
  if (out_degree[static_cast<std::size_t>(y)] > 0)
    throw SchemaError("label node must have no children");

  CausalDag dag;
  dag.schema = std::move(schema);
  dag.parents.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    dag.parents.emplace_back(parent_sets[static_cast<std::size_t>(i)].begin(),
                             parent_sets[static_cast<std::size_t>(i)].end());
  topological_order(dag);  // rejects cycles
  return dag;
}

std::vector<int> topological_order(const CausalDag& dag) {
  const int n = dag.schema.size();
  std::vector<int> missing(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    missing[static_cast<std::size_t>(c)] =
        static_cast<int>(dag.parents[static_cast<std::size_t>(c)].size());
    for (int p : dag.parents[static_cast<std::size_t>(c)])
      children[static_cast<std::size_t>(p)].push_back(c);
  }

  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < n; ++i)
    if (missing[static_cast<std::size_t>(i)] == 0) ready.push(i);

  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!ready.empty()) {
    const int i = ready.top();
    ready.pop();
    order.push_back(i);
    for (int c : children[static_cast<std::size_t>(i)])
      if (--missing[static_cast<std::size_t>(c)] == 0) ready.push(c);
  }
  if (static_cast<int>(order.size()) != n) throw ArgumentError("causal graph has a cycle");
  return order;
}

void validate_model(const CausalModel& model) {
  const auto& schema = model.dag.schema;
  const auto cards = schema.cardinalities();
  if (static_cast<int>(model.cpts.size()) != schema.size())
    throw SchemaError("model needs one conditional table per node");
  if (model.dag.parents.size() != model.cpts.size())
    throw SchemaError("graph and tables disagree on node count");

  for (int i = 0; i < schema.size(); ++i) {
    const auto& cpt = model.cpts[static_cast<std::size_t>(i)];
    const auto& want = model.dag.parents[static_cast<std::size_t>(i)];
    if (cpt.parents != want)
      throw SchemaError("table parents for '" + schema.var(i).name +
                        "' do not match the graph");
    const std::int64_t configs = parent_config_count(want, cards);
    if (cpt.rows.rows() != configs || cpt.rows.cols() != cards[static_cast<std::size_t>(i)])
      throw SchemaError("table shape for '" + schema.var(i).name +
                        "' does not match parents and cardinality");
    for (Eigen::Index r = 0; r < cpt.rows.rows(); ++r) {
      double sum = 0.0;
      for (Eigen::Index c = 0; c < cpt.rows.cols(); ++c) {
        const double v = cpt.rows(r, c);
        if (!(v >= 0.0) || !std::isfinite(v))
          throw ArgumentError("table row for '" + schema.var(i).name +
                              "' has a negative or non-finite entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw ArgumentError("table row for '" + schema.var(i).name +
                            "' sums to " + std::to_string(sum) + ", expected 1");
    }
  }
}

CausalModel random_cpts(const CausalDag& dag, std::uint64_t seed, double concentration) {
  if (!(concentration > 0.0)) throw ArgumentError("concentration must be positive");
  const auto cards = dag.schema.cardinalities();

  CausalModel model;
  model.dag = dag;
  model.seed = seed;
  model.cpts.reserve(static_cast<std::size_t>(dag.schema.size()));
  for (int i = 0; i < dag.schema.size(); ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    const auto& parents = dag.parents[static_cast<std::size_t>(i)];
    const std::int64_t configs = parent_config_count(parents, cards);
    const int card = cards[static_cast<std::size_t>(i)];
    Cpt cpt;
    cpt.parents = parents;
    cpt.rows.resize(configs, card);
    for (std::int64_t r = 0; r < configs; ++r)
      cpt.rows.row(r) = rng.dirichlet(concentration, card).transpose();
    model.cpts.push_back(std::move(cpt));
  }
  validate_model(model);
  return model;
}

JointDistribution exact_joint(const CausalModel& model) {
  validate_model(model);
  const auto& schema = model.dag.schema;
  const std::int64_t cells = schema.cell_count();
  if (cells > 1'000'000)
    throw SizeError("joint state space exceeds 1e6 cells (" + std::to_string(cells) + ")");
  const auto cards = schema.cardinalities();

  Eigen::VectorXd probs(cells);
  std::vector<int> idx(static_cast<std::size_t>(schema.size()), 0);
  std::int64_t linear = 0;
  do {
    double p = 1.0;
    for (int i = 0; i < schema.size(); ++i) {
      const auto& cpt = model.cpts[static_cast<std::size_t>(i)];
      const std::int64_t row = parent_row(cpt.parents, cards, idx);
      p *= cpt.rows(row, idx[static_cast<std::size_t>(i)]);
    }
    probs[linear++] = p;
  } while (next_cell(idx, cards));

  return JointDistribution::from_tensor(schema, std::move(probs));
}

Dataset forward_sample(const CausalModel& model, long m, std::uint64_t seed) {
  if (m < 1) throw ArgumentError("sample count must be at least 1");
  validate_model(model);
  const auto& schema = model.dag.schema;
  const auto cards = schema.cardinalities();
  const std::vector<int> order = topological_order(model.dag);

  Rng rng(seed);
  Eigen::MatrixXi codes(m, schema.size());
  std::vector<int> record(static_cast<std::size_t>(schema.size()), 0);
  for (long r = 0; r < m; ++r) {
    for (int i : order) {
      const auto& cpt = model.cpts[static_cast<std::size_t>(i)];
      const std::int64_t row = parent_row(cpt.parents, cards, record);
      const double u = rng.uniform();
      const int card = cards[static_cast<std::size_t>(i)];
      double acc = 0.0;
      int value = card - 1;
      for (int c = 0; c < card; ++c) {
        acc += cpt.rows(row, c);
        if (u < acc) {
          value = c;
          break;
        }
      }
      record[static_cast<std::size_t>(i)] = value;
    }
    for (int i = 0; i < schema.size(); ++i) codes(r, i) = record[static_cast<std::size_t>(i)];
  }

  Dataset data;
  data.schema = schema;
  data.codes = std::move(codes);
  data.provenance.source = "forward_sample(seed=" + std::to_string(seed) + ")";
  data.provenance.rows_read = m;
  data.provenance.rows_dropped = 0;
  return data;
}

FixtureKind fixture_from_string(const std::string& name) {
  if (name == "single_parent_y") return FixtureKind::single_parent_y;
  if (name == "single_child_a") return FixtureKind::single_child_a;
  if (name == "path_blocking") return FixtureKind::path_blocking;
  if (name == "independent_feature") return FixtureKind::independent_feature;
  throw ArgumentError("unknown fixture '" + name +
                      "' (expected single_parent_y|single_child_a|path_blocking|"
                      "independent_feature)");
}

std::string to_string(FixtureKind kind) {
  switch (kind) {
    case FixtureKind::single_parent_y: return "single_parent_y";
    case FixtureKind::single_child_a: return "single_child_a";
    case FixtureKind::path_blocking: return "path_blocking";
    case FixtureKind::independent_feature: return "independent_feature";
  }
  throw ArgumentError("invalid fixture kind");
}

CausalModel make_fixture(FixtureKind kind, int n, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("fixtures need at least 2 features");
  VariableSchema schema = fixture_schema(n);
  const int y = n + 1;  // node order: A=0, X1..Xn=1..n, Y=n+1

  std::vector<std::pair<std::string, std::string>> edges;
  auto x = [](int i) { return "X" + std::to_string(i); };
  switch (kind) {
    case FixtureKind::single_parent_y:
      edges.push_back({"A", x(1)});
      for (int i = 2; i <= n; ++i) edges.push_back({x(i - 1), x(i)});
      edges.push_back({x(n), "Y"});
      break;
    case FixtureKind::single_child_a:
      edges.push_back({"A", x(1)});
      edges.push_back({x(1), "Y"});
      for (int i = 2; i <= n; ++i) edges.push_back({x(1), x(i)});
      break;
    case FixtureKind::path_blocking:
      edges.push_back({"A", x(1)});
      edges.push_back({"A", x(2)});
      edges.push_back({x(1), "Y"});
      edges.push_back({x(2), "Y"});
      break;
    case FixtureKind::independent_feature:
      edges.push_back({"A", x(1)});
      edges.push_back({x(1), "Y"});
      break;
  }

  CausalModel model;
  model.dag = make_dag(std::move(schema), edges);
  model.seed = seed;
  model.cpts.resize(static_cast<std::size_t>(n + 2));

  auto stream = [&](int node) { return Rng::stream(seed, static_cast<std::uint64_t>(node)); };
  auto set_cpt = [&](int node, Eigen::MatrixXd rows) {
    Cpt cpt;
    cpt.parents = model.dag.parents[static_cast<std::size_t>(node)];
    cpt.rows = std::move(rows);
    model.cpts[static_cast<std::size_t>(node)] = std::move(cpt);
  };

  {
    Rng rng = stream(0);
    set_cpt(0, bernoulli_rows(uniform_in(rng, 0.45, 0.55)));
  }
  switch (kind) {
    case FixtureKind::single_parent_y: {
      for (int i = 1; i <= n; ++i) {
        Rng rng = stream(i);
        set_cpt(i, bsc_rows(uniform_in(rng, 0.1, 0.3)));
      }
      Rng rng = stream(y);
      set_cpt(y, bsc_rows(uniform_in(rng, 0.1, 0.3)));
      break;
    }
    case FixtureKind::single_child_a: {
      for (int i = 1; i <= n; ++i) {
        Rng rng = stream(i);
        set_cpt(i, bsc_rows(uniform_in(rng, 0.1, 0.3)));
      }
      Rng rng = stream(y);
      set_cpt(y, bsc_rows(uniform_in(rng, 0.1, 0.3)));
      break;
    }
    case FixtureKind::path_blocking: {
      for (int i = 1; i <= 2; ++i) {
        Rng rng = stream(i);
        set_cpt(i, bsc_rows(uniform_in(rng, 0.1, 0.3)));
      }
      for (int i = 3; i <= n; ++i) {
        Rng rng = stream(i);
        set_cpt(i, bernoulli_rows(uniform_in(rng, 0.35, 0.65)));
      }
      Rng rng = stream(y);
      Eigen::MatrixXd rows(4, 2);  // parent rows over (X1, X2)
      for (int r = 0; r < 4; ++r) {
        const double p1 = uniform_in(rng, 0.1, 0.9);
        rows(r, 0) = 1.0 - p1;
        rows(r, 1) = p1;
      }
      set_cpt(y, std::move(rows));
      break;
    }
    case FixtureKind::independent_feature: {
      {
        Rng rng = stream(1);
        set_cpt(1, bsc_rows(uniform_in(rng, 0.1, 0.2)));
      }
      for (int i = 2; i <= n; ++i) {
        Rng rng = stream(i);
        set_cpt(i, bernoulli_rows(uniform_in(rng, 0.35, 0.65)));
      }
      Rng rng = stream(y);
      set_cpt(y, bsc_rows(uniform_in(rng, 0.1, 0.2)));
      break;
    }
  }

  validate_model(model);
  return model;
}

CausalModel synthetic_standin(std::uint64_t seed) {
  VariableSchema schema = fixture_schema(5);
  const std::vector<std::pair<std::string, std::string>> edges = {
      {"A", "X1"}, {"A", "X5"}, {"X1", "X2"}, {"X1", "Y"}, {"X3", "Y"}, {"X4", "Y"}};

  CausalModel model;
  model.dag = make_dag(std::move(schema), edges);
  model.seed = seed;
  model.cpts.resize(7);

  auto stream = [&](int node) { return Rng::stream(seed, static_cast<std::uint64_t>(node)); };
  auto set_cpt = [&](int node, Eigen::MatrixXd rows) {
    Cpt cpt;
    cpt.parents = model.dag.parents[static_cast<std::size_t>(node)];
    cpt.rows = std::move(rows);
    model.cpts[static_cast<std::size_t>(node)] = std::move(cpt);
  };

  {
    Rng rng = stream(0);
    set_cpt(0, bernoulli_rows(uniform_in(rng, 0.45, 0.55)));
  }
  {
    // X1: the strong protected proxy.
    Rng rng = stream(1);
    set_cpt(1, bsc_rows(uniform_in(rng, 0.06, 0.10)));
  }
  {
    // X2: a noisy copy of X1.
    Rng rng = stream(2);
    set_cpt(2, bsc_rows(uniform_in(rng, 0.30, 0.45)));
  }
  {
    Rng rng = stream(3);
    set_cpt(3, bernoulli_rows(uniform_in(rng, 0.45, 0.55)));
  }
  {
    Rng rng = stream(4);
    set_cpt(4, bernoulli_rows(uniform_in(rng, 0.45, 0.55)));
  }
  {
    // X5: a noisier proxy with no path to Y.
    Rng rng = stream(5);
    set_cpt(5, bsc_rows(uniform_in(rng, 0.30, 0.38)));
  }
  {
    // Y responds to X1, X3 and X4 through a linear probability on +/-1 coded
    // parents. Together X3 and X4 carry more probability swing than X1, but
    // d1 stays above each single remaining margin (d1 > d4 + skew and
    // d1 > |d4 - d3|), so the plug-in decision keeps depending on X1 whenever
    // X1 is observed, even with X3 or X4 marginalized out. Parent rows are
    // row-major over the ascending parent order (X1, X3, X4).
    Rng rng = stream(6);
    const double d3 = uniform_in(rng, 0.115, 0.125);
    const double d4 = d3 + uniform_in(rng, 0.032, 0.040);
    const double d1 = uniform_in(rng, 0.175, 0.185);
    Eigen::MatrixXd rows(8, 2);
    for (int r = 0; r < 8; ++r) {
      const double s1 = (r & 4) ? 1.0 : -1.0;
      const double s3 = (r & 2) ? 1.0 : -1.0;
      const double s4 = (r & 1) ? 1.0 : -1.0;
      const double p1 = 0.5 + d1 * s1 + d3 * s3 + d4 * s4;
      rows(r, 0) = 1.0 - p1;
      rows(r, 1) = p1;
    }
    set_cpt(6, std::move(rows));
  }

  validate_model(model);
  return model;
}

nlohmann::ordered_json model_to_json(const CausalModel& model) {
  validate_model(model);
  const auto& schema = model.dag.schema;

  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& v : schema.vars())
    nodes.push_back({{"name", v.name}, {"cardinality", v.cardinality}, {"role", to_string(v.role)}});

  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (int c = 0; c < schema.size(); ++c)
    for (int p : model.dag.parents[static_cast<std::size_t>(c)])
      edges.push_back({schema.var(p).name, schema.var(c).name});

  nlohmann::ordered_json cpts = nlohmann::ordered_json::object();
  for (int i = 0; i < schema.size(); ++i) {
    const auto& cpt = model.cpts[static_cast<std::size_t>(i)];
    nlohmann::ordered_json parents = nlohmann::ordered_json::array();
    for (int p : cpt.parents) parents.push_back(schema.var(p).name);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < cpt.rows.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < cpt.rows.cols(); ++c) row.push_back(cpt.rows(r, c));
      rows.push_back(std::move(row));
    }
    cpts[schema.var(i).name] = {{"parents", std::move(parents)}, {"rows", std::move(rows)}};
  }

  return {{"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"cpts", std::move(cpts)},
          {"seed", model.seed}};
}

CausalModel model_from_json(const nlohmann::ordered_json& doc) {
  try {
    std::vector<Variable> vars;
    for (const auto& node : doc.at("nodes")) {
      vars.push_back({node.at("name").get<std::string>(), node.at("cardinality").get<int>(),
                      role_from_string(node.at("role").get<std::string>())});
    }
    VariableSchema schema(std::move(vars));

    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw ParseError("model file: each edge must be a [parent, child] pair");
      edges.push_back({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
    }

    CausalModel model;
    model.dag = make_dag(schema, edges);
    model.seed = doc.value("seed", std::uint64_t{0});
    model.cpts.resize(static_cast<std::size_t>(schema.size()));

    const auto& cpts = doc.at("cpts");
    for (int i = 0; i < schema.size(); ++i) {
      const std::string& name = schema.var(i).name;
      if (!cpts.contains(name))
        throw ParseError("model file: missing conditional table for '" + name + "'");
      const auto& entry = cpts.at(name);
      Cpt cpt;
      for (const auto& pname : entry.at("parents"))
        cpt.parents.push_back(schema.index_of(pname.get<std::string>()));
      const auto& rows = entry.at("rows");
      if (!rows.is_array() || rows.empty())
        throw ParseError("model file: table rows for '" + name + "' must be a non-empty array");
      const auto ncols = rows.at(0).size();
      cpt.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncols));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows.at(r);
        if (row.size() != ncols)
          throw ParseError("model file: ragged table rows for '" + name + "'");
        for (std::size_t c = 0; c < ncols; ++c)
          cpt.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              row.at(c).get<double>();
      }
      model.cpts[static_cast<std::size_t>(i)] = std::move(cpt);
    }

    validate_model(model);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

}  // namespace fairsel
