#include "fairsel/coefficients.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_set>
#include <utility>

#include "fairsel/errors.hpp"

namespace fairsel {

namespace {

// A multiplicative factor this small zeroes the discrimination product, so
// the decomposition solve is skipped entirely.
constexpr double kFactorFloor = 1e-13;

void require_valid_key(const ScoringProblem& prob, SubsetKey key) {
  if (!key.subset_of(SubsetKey::full(prob.n_features())))
    throw ArgumentError("subset key selects features beyond the problem's feature count");
}

// Move the given schema axes (ascending) into one contiguous block starting
// at the first of them; every other variable keeps its relative order.
JointDistribution block_reorder(const JointDistribution& dist, const std::vector<int>& axes) {
  const auto& schema = dist.schema();
  std::unordered_set<int> in_block(axes.begin(), axes.end());
  std::vector<std::string> order;
  order.reserve(static_cast<std::size_t>(schema.size()));
  for (int a = 0; a < schema.size(); ++a) {
    if (a == axes.front())
      for (int m : axes) order.push_back(schema.var(m).name);
    if (!in_block.count(a)) order.push_back(schema.var(a).name);
  }
  return reorder(dist, order);
}

}  // namespace

ScoringProblem make_scoring_problem(JointDistribution dist, SolverConfig solver) {
  dist.schema().require_scoring_roles();
  const auto prot = dist.schema().protected_indices();
  if (prot.size() > 1) {
    // Several protected columns act as a single composite attribute.
    dist = block_reorder(dist, prot);
    dist = merge_adjacent(dist, prot.front(), static_cast<int>(prot.size()), "_a",
                          Role::protected_attr);
  }

  ScoringProblem prob;
  prob.dist = std::move(dist);
  prob.solver = solver;
  const auto& schema = prob.dist.schema();
  prob.feature_axes = schema.feature_indices();
  prob.protected_axis = schema.protected_indices().front();
  prob.label_axis = schema.label_index();
  if (prob.feature_axes.empty())
    throw SchemaError("scoring requires at least one feature variable");
  if (prob.n_features() > 31) throw SizeError("scoring supports at most 31 features");
  return prob;
}

std::string subset_to_string(const ScoringProblem& prob, SubsetKey key) {
  require_valid_key(prob, key);
  std::string out = "{";
  bool first = true;
  for (int i : key.members()) {
    if (!std::exchange(first, false)) out += ",";
    out += prob.feature_name(i);
  }
  return out + "}";
}

JointDistribution flatten_subset(const JointDistribution& dist, SubsetKey key) {
  const auto feats = dist.schema().feature_indices();
  if (!key.subset_of(SubsetKey::full(static_cast<int>(feats.size()))))
    throw ArgumentError("subset key selects features beyond the schema's feature count");

  if (key.empty()) {
    // A leading cardinality-1 axis leaves the row-major layout untouched.
    std::vector<Variable> vars;
    vars.push_back({"_xs", 1, Role::feature});
    for (const auto& v : dist.schema().vars()) vars.push_back(v);
    return JointDistribution::from_tensor(VariableSchema(std::move(vars)), dist.probs());
  }

  std::vector<int> axes;
  axes.reserve(static_cast<std::size_t>(key.count()));
  for (int i : key.members()) axes.push_back(feats[static_cast<std::size_t>(i)]);
  JointDistribution moved = block_reorder(dist, axes);
  return merge_adjacent(moved, axes.front(), static_cast<int>(axes.size()), "_xs",
                        Role::feature);
}

double accuracy_coefficient(const ScoringProblem& prob, SubsetKey key) {
  require_valid_key(prob, key);
  if (key.empty()) return 0.0;

  std::vector<std::string> selected;
  for (int i : key.members()) selected.push_back(prob.feature_name(i));
  std::vector<std::string> given;
  given.push_back(prob.protected_name());
  for (int i = 0; i < prob.n_features(); ++i)
    if (!key.contains(i)) given.push_back(prob.feature_name(i));
  return cond_mutual_info(prob.dist, {prob.label_name()}, selected, given);
}

namespace detail {

DiscEval discrimination_eval(const ScoringProblem& prob, SubsetKey key) {
  require_valid_key(prob, key);
  DiscEval out;
  if (key.empty()) return out;

  const auto& schema = prob.dist.schema();
  std::unordered_set<int> selected_axes;
  for (int i : key.members())
    selected_axes.insert(prob.feature_axes[static_cast<std::size_t>(i)]);
  std::vector<std::string> keep;
  for (int a = 0; a < schema.size(); ++a)
    if (a == prob.label_axis || a == prob.protected_axis || selected_axes.count(a))
      keep.push_back(schema.var(a).name);

  const JointDistribution flat =
      flatten_subset(marginalize(prob.dist, keep), SubsetKey::full(key.count()));
  const std::string& y = prob.label_name();
  const std::string& a = prob.protected_name();

  const double leak = mutual_info(flat, {"_xs"}, {a});
  const double leak_given_y = cond_mutual_info(flat, {"_xs"}, {a}, {y});
  if (leak < kFactorFloor || leak_given_y < kFactorFloor) return out;

  try {
    PidResult pid = pid_decompose(make_pid_input(flat, y, "_xs", a), prob.solver);
    out.disc = pid.si * leak * leak_given_y;
    out.pid = std::move(pid);
    out.solved = true;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("subset " + subset_to_string(prob, key) + ": " + e.what(),
                           e.best_value(), e.objective_gap());
  }
  return out;
}

int resolve_threads() {
  if (const char* env = std::getenv("FAIRSEL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 64L));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 64u));
}

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn) {
  if (count <= 0) return;
  const int workers = static_cast<int>(
      std::min<std::int64_t>(count, static_cast<std::int64_t>(resolve_threads())));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&]() {
    while (!abort.load(std::memory_order_relaxed)) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        abort.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

double discrimination_coefficient(const ScoringProblem& prob, SubsetKey key) {
  return detail::discrimination_eval(prob, key).disc;
}

bool CoefficientTable::complete() const {
  if (static_cast<std::int64_t>(filled.size()) != (std::int64_t{1} << n)) return false;
  return std::all_of(filled.begin(), filled.end(), [](char f) { return f != 0; });
}

bool CoefficientTable::has(SubsetKey key) const {
  return key.bits() < filled.size() && filled[key.bits()] != 0;
}

double CoefficientTable::acc_at(SubsetKey key) const {
  if (!has(key)) throw TableError("accuracy value not computed for requested subset");
  return acc[key.bits()];
}

double CoefficientTable::disc_at(SubsetKey key) const {
  if (!has(key)) throw TableError("discrimination value not computed for requested subset");
  return disc[key.bits()];
}

CoefficientTable coefficient_table(const ScoringProblem& prob,
                                   const std::vector<SubsetKey>& subsets,
                                   const TableOptions& options) {
  const int n = prob.n_features();
  if (n > 20) throw SizeError("coefficient tables support at most 20 features");

  std::vector<SubsetKey> todo = subsets;
  for (SubsetKey k : todo) require_valid_key(prob, k);
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());

  CoefficientTable table;
  table.n = n;
  const std::size_t cells = std::size_t{1} << n;
  table.acc.assign(cells, 0.0);
  table.disc.assign(cells, 0.0);
  table.filled.assign(cells, 0);

  std::vector<double> accs(todo.size(), 0.0);
  std::vector<detail::DiscEval> evals(todo.size());
  detail::parallel_for(static_cast<std::int64_t>(todo.size()), [&](std::int64_t i) {
    const auto u = static_cast<std::size_t>(i);
    accs[u] = accuracy_coefficient(prob, todo[u]);
    detail::DiscEval ev = detail::discrimination_eval(prob, todo[u]);
    if (ev.solved && ev.pid.q_star.cell_count() > options.coupling_cache_cells)
      ev.pid.q_star = JointDistribution();
    evals[u] = std::move(ev);
  });

  for (std::size_t i = 0; i < todo.size(); ++i) {
    const std::uint32_t bits = todo[i].bits();
    table.acc[bits] = accs[i];
    table.disc[bits] = evals[i].disc;
    table.filled[bits] = 1;
    if (evals[i].solved) table.pid_cache.emplace(bits, std::move(evals[i].pid));
  }
  return table;
}

CoefficientTable coefficient_table(const ScoringProblem& prob, const TableOptions& options) {
  const int n = prob.n_features();
  if (n > 20) throw SizeError("full coefficient table supports at most 20 features");
  if (n > options.exact_limit)
    throw SizeError("full coefficient table over " + std::to_string(n) +
                    " features exceeds the exact limit of " +
                    std::to_string(options.exact_limit) +
                    "; raise the limit or score with sampling");

  std::vector<SubsetKey> keys;
  keys.reserve(std::size_t{1} << n);
  for (std::uint32_t b = 0; b < (std::uint32_t{1} << n); ++b) keys.emplace_back(b);
  return coefficient_table(prob, keys, options);
}

}  // namespace fairsel
