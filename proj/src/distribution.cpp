#include "fairsel/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace fairsel {

namespace {

constexpr double kMassTolerance = 1e-9;
constexpr double kInfoClamp = 1e-12;

double clamp_information(double value, const char* what) {
  if (value >= 0.0) return value;
  if (value >= -kInfoClamp) return 0.0;
  throw IntegrityError(std::string(what) + " fell below -1e-12 bits: " +
                       std::to_string(value));
}

std::vector<int> resolve_indices(const VariableSchema& schema,
                                 const std::vector<std::string>& names,
                                 const char* what) {
  if (names.empty()) throw ArgumentError(std::string(what) + ": variable set is empty");
  std::vector<int> idx;
  idx.reserve(names.size());
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second)
      throw ArgumentError(std::string(what) + ": duplicate variable '" + name + "'");
    idx.push_back(schema.index_of(name));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> sorted_union(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

void require_disjoint(const std::vector<int>& a, const std::vector<int>& b,
                      const char* what) {
  for (int x : a)
    if (std::binary_search(b.begin(), b.end(), x))
      throw ArgumentError(std::string(what) + ": variable sets overlap");
}

}  // namespace

Role role_from_string(const std::string& s) {
  if (s == "feature") return Role::feature;
  if (s == "protected") return Role::protected_attr;
  if (s == "label") return Role::label;
  throw SchemaError("unknown role '" + s + "' (expected feature|protected|label)");
}

std::string to_string(Role role) {
  switch (role) {
    case Role::feature: return "feature";
    case Role::protected_attr: return "protected";
    case Role::label: return "label";
  }
  return "feature";
}

VariableSchema::VariableSchema(std::vector<Variable> vars) : vars_(std::move(vars)) {
  std::unordered_set<std::string> names;
  for (const auto& v : vars_) {
    if (v.name.empty()) throw SchemaError("variable with empty name");
    if (!names.insert(v.name).second)
      throw SchemaError("duplicate variable name '" + v.name + "'");
    if (v.cardinality < 1)
      throw SchemaError("variable '" + v.name + "' has cardinality " +
                        std::to_string(v.cardinality));
  }
}

bool VariableSchema::contains(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return true;
  return false;
}

int VariableSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return static_cast<int>(i);
  throw SchemaError("unknown variable '" + name + "'");
}

std::int64_t VariableSchema::cell_count() const {
  std::int64_t n = 1;
  for (const auto& v : vars_) n *= v.cardinality;
  return n;
}

std::vector<int> VariableSchema::cardinalities() const {
  std::vector<int> cards;
  cards.reserve(vars_.size());
  for (const auto& v : vars_) cards.push_back(v.cardinality);
  return cards;
}

std::vector<int> VariableSchema::feature_indices() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].role == Role::feature) idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<int> VariableSchema::protected_indices() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].role == Role::protected_attr) idx.push_back(static_cast<int>(i));
  return idx;
}

int VariableSchema::label_index() const {
  int found = -1;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].role != Role::label) continue;
    if (found >= 0) throw SchemaError("schema has more than one label variable");
    found = static_cast<int>(i);
  }
  if (found < 0) throw SchemaError("schema has no label variable");
  return found;
}

void VariableSchema::require_scoring_roles() const {
  label_index();
  if (protected_indices().empty())
    throw SchemaError("schema has no protected variable");
  for (const auto& v : vars_)
    if (v.cardinality < 2)
      throw SchemaError("variable '" + v.name + "' is degenerate (cardinality " +
                        std::to_string(v.cardinality) + ")");
}

std::vector<std::int64_t> row_major_strides(const std::vector<int>& cards) {
  std::vector<std::int64_t> strides(cards.size(), 1);
  for (int i = static_cast<int>(cards.size()) - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i) + 1] * cards[static_cast<std::size_t>(i) + 1];
  return strides;
}

bool next_cell(std::span<int> idx, std::span<const int> cards) {
  for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
    if (++idx[static_cast<std::size_t>(k)] < cards[static_cast<std::size_t>(k)]) return true;
    idx[static_cast<std::size_t>(k)] = 0;
  }
  return false;
}

JointDistribution JointDistribution::validated(VariableSchema schema,
                                               Eigen::VectorXd probs) {
  if (probs.size() != schema.cell_count())
    throw ArgumentError("tensor has " + std::to_string(probs.size()) +
                        " cells, schema expects " + std::to_string(schema.cell_count()));
  double total = 0.0;
  for (std::int64_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0))
      throw ArgumentError("probability at cell " + std::to_string(i) +
                          " is negative or NaN");
    total += probs[i];
  }
  if (std::abs(total - 1.0) > kMassTolerance)
    throw ArgumentError("probabilities sum to " + std::to_string(total) +
                        ", expected 1 within 1e-9");
  return from_tensor(std::move(schema), std::move(probs));
}

JointDistribution JointDistribution::from_tensor(VariableSchema schema,
                                                 Eigen::VectorXd probs) {
  if (probs.size() != schema.cell_count())
    throw ArgumentError("tensor shape does not match schema");
  JointDistribution d;
  d.schema_ = std::move(schema);
  d.probs_ = std::move(probs);
  d.strides_ = row_major_strides(d.schema_.cardinalities());
  return d;
}

std::int64_t JointDistribution::to_linear(std::span<const int> idx) const {
  std::int64_t cell = 0;
  for (std::size_t k = 0; k < strides_.size(); ++k) cell += idx[k] * strides_[k];
  return cell;
}

void JointDistribution::from_linear(std::int64_t cell, std::span<int> idx) const {
  for (std::size_t k = 0; k < strides_.size(); ++k) {
    idx[k] = static_cast<int>(cell / strides_[k]);
    cell %= strides_[k];
  }
}

void JointDistribution::normalize() {
  const double total = probs_.sum();
  if (!(total > 0.0)) throw ArgumentError("cannot normalize zero-mass tensor");
  probs_ /= total;
}

namespace detail {

Eigen::VectorXd project(const JointDistribution& dist, const std::vector<int>& axes) {
  const auto cards = dist.schema().cardinalities();
  std::int64_t out_cells = 1;
  for (int a : axes) out_cells *= cards[static_cast<std::size_t>(a)];

  std::vector<int> out_card(axes.size());
  for (std::size_t k = 0; k < axes.size(); ++k)
    out_card[k] = cards[static_cast<std::size_t>(axes[k])];
  const auto out_strides = row_major_strides(out_card);

  // Per input axis: stride of that axis in the output (0 when summed out).
  std::vector<std::int64_t> contrib(cards.size(), 0);
  for (std::size_t k = 0; k < axes.size(); ++k)
    contrib[static_cast<std::size_t>(axes[k])] = out_strides[k];

  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_cells);
  std::vector<int> idx(cards.size(), 0);
  const auto& probs = dist.probs();
  std::int64_t out_idx = 0;
  std::int64_t cell = 0;
  const std::int64_t total = dist.cell_count();
  while (cell < total) {
    out[out_idx] += probs[cell];
    ++cell;
    // Incremental odometer keeps the output index in sync without a
    // per-cell multi-index recomputation.
    for (int k = static_cast<int>(cards.size()) - 1; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      if (++idx[ku] < cards[ku]) {
        out_idx += contrib[ku];
        break;
      }
      idx[ku] = 0;
      out_idx -= contrib[ku] * (cards[ku] - 1);
    }
  }
  return out;
}

double entropy_of_tensor(const Eigen::VectorXd& probs) {
  CompensatedSum acc;
  for (std::int64_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > 0.0) acc.add(-p * std::log2(p));
  }
  return acc.value();
}

}  // namespace detail

JointDistribution marginalize(const JointDistribution& dist,
                              const std::vector<std::string>& keep) {
  const auto axes = resolve_indices(dist.schema(), keep, "marginalize");
  Eigen::VectorXd out = detail::project(dist, axes);
  std::vector<Variable> vars;
  vars.reserve(axes.size());
  for (int a : axes) vars.push_back(dist.schema().var(a));
  return JointDistribution::from_tensor(VariableSchema(std::move(vars)), std::move(out));
}

JointDistribution condition(const JointDistribution& dist,
                            const std::vector<std::pair<std::string, int>>& evidence) {
  if (evidence.empty()) throw ArgumentError("condition: evidence is empty");
  const auto& schema = dist.schema();
  std::vector<int> fixed_value(static_cast<std::size_t>(schema.size()), -1);
  for (const auto& [name, value] : evidence) {
    const int axis = schema.index_of(name);
    if (fixed_value[static_cast<std::size_t>(axis)] != -1)
      throw ArgumentError("condition: duplicate evidence for '" + name + "'");
    if (value < 0 || value >= schema.var(axis).cardinality)
      throw ArgumentError("condition: value " + std::to_string(value) +
                          " out of range for '" + name + "'");
    fixed_value[static_cast<std::size_t>(axis)] = value;
  }

  std::vector<Variable> kept_vars;
  std::vector<int> kept_axes;
  for (int a = 0; a < schema.size(); ++a) {
    if (fixed_value[static_cast<std::size_t>(a)] == -1) {
      kept_vars.push_back(schema.var(a));
      kept_axes.push_back(a);
    }
  }
  if (kept_vars.empty())
    throw ArgumentError("condition: evidence fixes every variable");

  std::vector<int> out_card;
  out_card.reserve(kept_axes.size());
  for (int a : kept_axes) out_card.push_back(schema.var(a).cardinality);
  const std::int64_t out_cells =
      VariableSchema(kept_vars).cell_count();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_cells);

  const auto cards = schema.cardinalities();
  std::vector<int> idx(cards.size(), 0);
  const auto out_strides = row_major_strides(out_card);
  double mass = 0.0;
  std::int64_t cell = 0;
  do {
    bool match = true;
    for (std::size_t k = 0; k < cards.size(); ++k) {
      if (fixed_value[k] != -1 && idx[k] != fixed_value[k]) {
        match = false;
        break;
      }
    }
    if (match) {
      std::int64_t out_idx = 0;
      for (std::size_t k = 0; k < kept_axes.size(); ++k)
        out_idx += idx[static_cast<std::size_t>(kept_axes[k])] * out_strides[k];
      out[out_idx] += dist.probs()[cell];
      mass += dist.probs()[cell];
    }
    ++cell;
  } while (next_cell(idx, cards));

  if (!(mass > 0.0))
    throw DegenerateEvidenceError("conditioning event has zero probability");
  out /= mass;
  return JointDistribution::from_tensor(VariableSchema(std::move(kept_vars)),
                                        std::move(out));
}

double entropy(const JointDistribution& dist, const std::vector<std::string>& vars) {
  const auto axes = resolve_indices(dist.schema(), vars, "entropy");
  return detail::entropy_of_tensor(detail::project(dist, axes));
}

namespace {

double entropy_axes(const JointDistribution& dist, const std::vector<int>& axes) {
  if (axes.empty()) return 0.0;
  return detail::entropy_of_tensor(detail::project(dist, axes));
}

}  // namespace

double mutual_info(const JointDistribution& dist,
                   const std::vector<std::string>& vars_a,
                   const std::vector<std::string>& vars_b) {
  const auto a = resolve_indices(dist.schema(), vars_a, "mutual_info");
  const auto b = resolve_indices(dist.schema(), vars_b, "mutual_info");
  require_disjoint(a, b, "mutual_info");
  const double value = entropy_axes(dist, a) + entropy_axes(dist, b) -
                       entropy_axes(dist, sorted_union(a, b));
  return clamp_information(value, "mutual information");
}

double cond_mutual_info(const JointDistribution& dist,
                        const std::vector<std::string>& vars_a,
                        const std::vector<std::string>& vars_b,
                        const std::vector<std::string>& vars_c) {
  if (vars_c.empty()) return mutual_info(dist, vars_a, vars_b);
  const auto a = resolve_indices(dist.schema(), vars_a, "cond_mutual_info");
  const auto b = resolve_indices(dist.schema(), vars_b, "cond_mutual_info");
  const auto c = resolve_indices(dist.schema(), vars_c, "cond_mutual_info");
  require_disjoint(a, b, "cond_mutual_info");
  require_disjoint(a, c, "cond_mutual_info");
  require_disjoint(b, c, "cond_mutual_info");
  // I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C); zero-mass conditioning
  // cells contribute nothing to any of the four terms.
  const double value = entropy_axes(dist, sorted_union(a, c)) +
                       entropy_axes(dist, sorted_union(b, c)) -
                       entropy_axes(dist, c) -
                       entropy_axes(dist, sorted_union(sorted_union(a, b), c));
  return clamp_information(value, "conditional mutual information");
}

JointDistribution reorder(const JointDistribution& dist,
                          const std::vector<std::string>& order) {
  const auto& schema = dist.schema();
  if (static_cast<int>(order.size()) != schema.size())
    throw ArgumentError("reorder: order must list every variable exactly once");
  std::vector<int> perm;  // new axis k comes from old axis perm[k]
  perm.reserve(order.size());
  std::unordered_set<std::string> seen;
  for (const auto& name : order) {
    if (!seen.insert(name).second)
      throw ArgumentError("reorder: duplicate variable '" + name + "'");
    perm.push_back(schema.index_of(name));
  }

  std::vector<Variable> vars;
  vars.reserve(perm.size());
  for (int a : perm) vars.push_back(schema.var(a));
  VariableSchema out_schema(std::move(vars));

  const auto cards = schema.cardinalities();
  const auto out_strides = row_major_strides(out_schema.cardinalities());
  // Per old axis: its stride in the output tensor.
  std::vector<std::int64_t> contrib(cards.size(), 0);
  for (std::size_t k = 0; k < perm.size(); ++k)
    contrib[static_cast<std::size_t>(perm[k])] = out_strides[k];

  Eigen::VectorXd out(dist.cell_count());
  std::vector<int> idx(cards.size(), 0);
  std::int64_t out_idx = 0;
  const std::int64_t total = dist.cell_count();
  for (std::int64_t cell = 0; cell < total; ++cell) {
    out[out_idx] = dist.probs()[cell];
    for (int k = static_cast<int>(cards.size()) - 1; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      if (++idx[ku] < cards[ku]) {
        out_idx += contrib[ku];
        break;
      }
      idx[ku] = 0;
      out_idx -= contrib[ku] * (cards[ku] - 1);
    }
  }
  return JointDistribution::from_tensor(std::move(out_schema), std::move(out));
}

JointDistribution merge_adjacent(const JointDistribution& dist, int start, int count,
                                 const std::string& name, Role role) {
  const auto& schema = dist.schema();
  if (start < 0 || count < 1 || start + count > schema.size())
    throw ArgumentError("merge_adjacent: block out of range");
  std::int64_t merged_card = 1;
  for (int a = start; a < start + count; ++a) merged_card *= schema.var(a).cardinality;
  if (merged_card > std::numeric_limits<int>::max())
    throw SizeError("merged variable cardinality overflows int");

  std::vector<Variable> vars;
  for (int a = 0; a < start; ++a) vars.push_back(schema.var(a));
  vars.push_back({name, static_cast<int>(merged_card), role});
  for (int a = start + count; a < schema.size(); ++a) vars.push_back(schema.var(a));
  // Row-major layout is preserved when adjacent axes merge, so the tensor
  // transfers untouched.
  return JointDistribution::from_tensor(VariableSchema(std::move(vars)), dist.probs());
}

SubsetKey SubsetKey::full(int n) {
  if (n < 0 || n > 31) throw ArgumentError("SubsetKey supports up to 31 features");
  return SubsetKey(n == 0 ? 0u : ((1u << n) - 1u));
}

int SubsetKey::count() const {
  std::uint32_t b = bits_;
  int c = 0;
  while (b) {
    b &= b - 1;
    ++c;
  }
  return c;
}

std::vector<int> SubsetKey::members() const {
  std::vector<int> out;
  for (int i = 0; i < 32; ++i)
    if (contains(i)) out.push_back(i);
  return out;
}

}  // namespace fairsel
