#include "fairsel/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "fairsel/errors.hpp"
#include "fairsel/rng.hpp"

namespace fairsel {

namespace {

// C(n, k) exactly; n <= 62 keeps every intermediate within uint64.
std::uint64_t binomial(int n, int k) {
  std::vector<std::uint64_t> row(static_cast<std::size_t>(n) + 1, 0);
  row[0] = 1;
  for (int i = 1; i <= n; ++i)
    for (int j = i; j >= 1; --j) row[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j) - 1];
  return row[static_cast<std::size_t>(k)];
}

}  // namespace

double shapley_weight(int t_size, int n) {
  if (n < 1 || t_size < 0 || t_size > n - 1)
    throw ArgumentError("shapley_weight requires 0 <= t_size <= n-1 and n >= 1");
  const double denom = static_cast<double>(n) * static_cast<double>(binomial(n - 1, t_size));
  return 1.0 / denom;
}

std::vector<double> shapley_exact(const CoefficientTable& table, ValueKind kind) {
  const int n = table.n;
  if (n < 1 || n > 20) throw SizeError("exact aggregation supports 1 to 20 features");
  if (!table.complete())
    throw TableError("exact aggregation needs a value for every subset");

  const std::vector<double>& v = kind == ValueKind::accuracy ? table.acc : table.disc;
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) weight[static_cast<std::size_t>(t)] = shapley_weight(t, n);

  std::vector<detail::CompensatedSum> phi(static_cast<std::size_t>(n));
  for (std::uint32_t s = 1; s < (std::uint32_t{1} << n); ++s) {
    const double w = weight[static_cast<std::size_t>(SubsetKey(s).count()) - 1];
    for (int i = 0; i < n; ++i) {
      if (!((s >> i) & 1u)) continue;
      phi[static_cast<std::size_t>(i)].add(w * (v[s] - v[s & ~(std::uint32_t{1} << i)]));
    }
  }

  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = phi[static_cast<std::size_t>(i)].value();
  return out;
}

MonteCarloEstimate shapley_monte_carlo(const std::function<double(SubsetKey)>& value,
                                       int n, long permutations, std::uint64_t seed) {
  if (n < 1 || n > 31) throw ArgumentError("feature count must be in 1..31");
  if (permutations < 2) throw ArgumentError("at least 2 permutations required");

  const auto un = static_cast<std::size_t>(n);
  std::vector<double> mean(un, 0.0), m2(un, 0.0);
  for (long p = 0; p < permutations; ++p) {
    const std::vector<int> perm = Rng::stream(seed, static_cast<std::uint64_t>(p)).permutation(n);
    std::uint32_t bits = 0;
    double prev = value(SubsetKey(0));
    for (int j = 0; j < n; ++j) {
      const int i = perm[static_cast<std::size_t>(j)];
      bits |= std::uint32_t{1} << i;
      const double cur = value(SubsetKey(bits));
      const double gain = cur - prev;
      prev = cur;
      const double delta = gain - mean[static_cast<std::size_t>(i)];
      mean[static_cast<std::size_t>(i)] += delta / static_cast<double>(p + 1);
      m2[static_cast<std::size_t>(i)] += delta * (gain - mean[static_cast<std::size_t>(i)]);
    }
  }

  MonteCarloEstimate est;
  est.phi = mean;
  est.std_err.resize(un);
  const double scale = static_cast<double>(permutations - 1) * static_cast<double>(permutations);
  for (std::size_t i = 0; i < un; ++i) est.std_err[i] = std::sqrt(std::max(0.0, m2[i]) / scale);
  return est;
}

std::vector<double> fairness_score(const std::vector<double>& phi_acc,
                                   const std::vector<double>& phi_d, double alpha) {
  if (phi_acc.size() != phi_d.size())
    throw ArgumentError("score arrays must have equal length");
  if (!(alpha >= 0.0)) throw ArgumentError("alpha must be non-negative");
  std::vector<double> f(phi_acc.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = phi_acc[i] - alpha * phi_d[i];
  return f;
}

SelectionPolicy SelectionPolicy::top_k(int k) {
  if (k < 0) throw ArgumentError("top-k requires k >= 0");
  SelectionPolicy p;
  p.kind = Kind::top_k;
  p.k = k;
  return p;
}

SelectionPolicy SelectionPolicy::threshold(double tau) {
  SelectionPolicy p;
  p.kind = Kind::threshold;
  p.tau = tau;
  return p;
}

std::vector<int> rank_features(const std::vector<double>& scores) {
  for (double s : scores)
    if (!std::isfinite(s)) throw ArgumentError("scores must be finite to rank");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

std::vector<int> rank_and_select(const ShapleyScores& scores,
                                 const SelectionPolicy& policy) {
  std::vector<int> order = rank_features(scores.fairness);
  if (policy.kind == SelectionPolicy::Kind::top_k) {
    if (policy.k < 0 || policy.k > static_cast<int>(order.size()))
      throw ArgumentError("top-k selection needs 0 <= k <= feature count");
    order.resize(static_cast<std::size_t>(policy.k));
    return order;
  }
  std::vector<int> kept;
  for (int i : order) {
    if (scores.fairness[static_cast<std::size_t>(i)] >= policy.tau) kept.push_back(i);
  }
  return kept;
}

ShapleyScores score_features(const ScoringProblem& prob, const ScoreOptions& options,
                             CoefficientTable* table_out) {
  if (!(options.alpha >= 0.0)) throw ArgumentError("alpha must be non-negative");
  const int n = prob.n_features();

  ShapleyScores out;
  out.alpha = options.alpha;

  if (!options.monte_carlo) {
    CoefficientTable table = coefficient_table(prob, options.table);
    out.method = "exact";
    out.phi_acc = shapley_exact(table, ValueKind::accuracy);
    out.phi_d = shapley_exact(table, ValueKind::discrimination);
    out.fairness = fairness_score(out.phi_acc, out.phi_d, options.alpha);
    if (table_out) *table_out = std::move(table);
    return out;
  }

  if (options.permutations < 2)
    throw ArgumentError("at least 2 permutations required");
  out.method = "monte_carlo";
  out.seed = options.seed;
  out.permutations = options.permutations;

  // Every subset the estimator will query is a prefix of some sampled
  // permutation; collect the distinct ones and evaluate them in parallel.
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<SubsetKey> distinct;
  auto note = [&](std::uint32_t bits) {
    if (slot.emplace(bits, distinct.size()).second) distinct.emplace_back(bits);
  };
  note(0);
  for (long p = 0; p < options.permutations; ++p) {
    const std::vector<int> perm =
        Rng::stream(options.seed, static_cast<std::uint64_t>(p)).permutation(n);
    std::uint32_t bits = 0;
    for (int j = 0; j < n; ++j) {
      bits |= std::uint32_t{1} << perm[static_cast<std::size_t>(j)];
      note(bits);
    }
  }

  std::vector<double> accs(distinct.size(), 0.0), discs(distinct.size(), 0.0);
  std::vector<detail::DiscEval> evals(distinct.size());
  detail::parallel_for(static_cast<std::int64_t>(distinct.size()), [&](std::int64_t i) {
    const auto u = static_cast<std::size_t>(i);
    accs[u] = accuracy_coefficient(prob, distinct[u]);
    detail::DiscEval ev = detail::discrimination_eval(prob, distinct[u]);
    if (ev.solved && ev.pid.q_star.cell_count() > options.table.coupling_cache_cells)
      ev.pid.q_star = JointDistribution();
    discs[u] = ev.disc;
    evals[u] = std::move(ev);
  });

  const auto acc_fn = [&](SubsetKey k) { return accs[slot.at(k.bits())]; };
  const auto disc_fn = [&](SubsetKey k) { return discs[slot.at(k.bits())]; };
  const MonteCarloEstimate ea = shapley_monte_carlo(acc_fn, n, options.permutations, options.seed);
  const MonteCarloEstimate ed = shapley_monte_carlo(disc_fn, n, options.permutations, options.seed);
  out.phi_acc = ea.phi;
  out.std_err_acc = ea.std_err;
  out.phi_d = ed.phi;
  out.std_err_disc = ed.std_err;
  out.fairness = fairness_score(out.phi_acc, out.phi_d, options.alpha);

  if (table_out && n <= 20) {
    CoefficientTable table;
    table.n = n;
    const std::size_t cells = std::size_t{1} << n;
    table.acc.assign(cells, 0.0);
    table.disc.assign(cells, 0.0);
    table.filled.assign(cells, 0);
    for (std::size_t i = 0; i < distinct.size(); ++i) {
      const std::uint32_t bits = distinct[i].bits();
      table.acc[bits] = accs[i];
      table.disc[bits] = discs[i];
      table.filled[bits] = 1;
      if (evals[i].solved) table.pid_cache.emplace(bits, std::move(evals[i].pid));
    }
    *table_out = std::move(table);
  }
  return out;
}

}  // namespace fairsel
