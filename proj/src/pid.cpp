#include "fairsel/pid.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fairsel {

namespace {

constexpr double kLn2 = 0.6931471805599453094172321215;

// ---------------------------------------------------------------------------
// Problem setup shared by the solver and the grid oracle.
//
// Variables are the masses q(t,r1,r2) of cells whose pair marginals
// P(t,r1) and P(t,r2) are both positive; the marginal constraints force
// every other cell to zero. Writing m(r1,r2) = sum_t q, the objective is
//
//   I_Q(T;R1|R2) = sum q ln q - sum m ln m + const(P)   [nats]
//
// where const(P) collects the (T,R2) and R2 entropies fixed on the
// constraint set. Its gradient is ln(q/m) and its Hessian is block diagonal
// over (r1,r2) groups: diag(1/q) - (1/m) 11^T per group, positive
// semidefinite everywhere, so the program is convex.
// ---------------------------------------------------------------------------

struct Cell {
  int t, r1, r2;
  int group;  // compacted (r1,r2) class
  int row_a;  // constraint id of (t,r1)
  int row_b;  // constraint id of (t,r2), -1 if dropped as redundant
};

struct PidProblem {
  int nt = 0, n1 = 0, n2 = 0;
  Eigen::VectorXd pt;   // target marginal
  Eigen::MatrixXd pt1;  // (t, r1) marginal
  Eigen::MatrixXd pt2;  // (t, r2) marginal

  std::vector<Cell> cells;
  std::vector<std::vector<int>> groups;  // group -> member cell ids
  Eigen::VectorXd b;
  int ncon = 0;
};

PidProblem build_problem(const PidInput& input) {
  const auto& schema = input.dist.schema();
  if (schema.size() != 3)
    throw ArgumentError("pid input must have exactly three variables (T, R1, R2)");

  PidProblem pr;
  pr.nt = schema.var(0).cardinality;
  pr.n1 = schema.var(1).cardinality;
  pr.n2 = schema.var(2).cardinality;

  const auto& p = input.dist.probs();
  for (std::int64_t i = 0; i < p.size(); ++i)
    if (!(p[i] >= 0.0)) throw ArgumentError("pid input has negative or NaN mass");

  pr.pt = Eigen::VectorXd::Zero(pr.nt);
  pr.pt1 = Eigen::MatrixXd::Zero(pr.nt, pr.n1);
  pr.pt2 = Eigen::MatrixXd::Zero(pr.nt, pr.n2);
  for (int t = 0; t < pr.nt; ++t)
    for (int r1 = 0; r1 < pr.n1; ++r1)
      for (int r2 = 0; r2 < pr.n2; ++r2) {
        const double mass = p[(static_cast<std::int64_t>(t) * pr.n1 + r1) * pr.n2 + r2];
        pr.pt[t] += mass;
        pr.pt1(t, r1) += mass;
        pr.pt2(t, r2) += mass;
      }

  // Constraint rows. Per positive-mass t the free cells form a complete
  // bipartite block, so exactly one of its marginal equations is redundant:
  // the last positive (t, r2) row is dropped.
  std::vector<std::vector<int>> row_a_id(static_cast<std::size_t>(pr.nt),
                                         std::vector<int>(static_cast<std::size_t>(pr.n1), -1));
  std::vector<std::vector<int>> row_b_id(static_cast<std::size_t>(pr.nt),
                                         std::vector<int>(static_cast<std::size_t>(pr.n2), -1));
  std::vector<double> rhs;
  for (int t = 0; t < pr.nt; ++t) {
    if (!(pr.pt[t] > 0.0)) continue;
    for (int r1 = 0; r1 < pr.n1; ++r1)
      if (pr.pt1(t, r1) > 0.0) {
        row_a_id[static_cast<std::size_t>(t)][static_cast<std::size_t>(r1)] =
            static_cast<int>(rhs.size());
        rhs.push_back(pr.pt1(t, r1));
      }
    int last_r2 = -1;
    for (int r2 = 0; r2 < pr.n2; ++r2)
      if (pr.pt2(t, r2) > 0.0) last_r2 = r2;
    for (int r2 = 0; r2 < pr.n2; ++r2)
      if (pr.pt2(t, r2) > 0.0 && r2 != last_r2) {
        row_b_id[static_cast<std::size_t>(t)][static_cast<std::size_t>(r2)] =
            static_cast<int>(rhs.size());
        rhs.push_back(pr.pt2(t, r2));
      }
  }
  pr.ncon = static_cast<int>(rhs.size());
  pr.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  std::vector<int> group_of(static_cast<std::size_t>(pr.n1) * static_cast<std::size_t>(pr.n2), -1);
  for (int t = 0; t < pr.nt; ++t) {
    if (!(pr.pt[t] > 0.0)) continue;
    for (int r1 = 0; r1 < pr.n1; ++r1) {
      if (!(pr.pt1(t, r1) > 0.0)) continue;
      for (int r2 = 0; r2 < pr.n2; ++r2) {
        if (!(pr.pt2(t, r2) > 0.0)) continue;
        const auto gk = static_cast<std::size_t>(r1) * static_cast<std::size_t>(pr.n2) +
                        static_cast<std::size_t>(r2);
        if (group_of[gk] < 0) {
          group_of[gk] = static_cast<int>(pr.groups.size());
          pr.groups.emplace_back();
        }
        Cell c;
        c.t = t;
        c.r1 = r1;
        c.r2 = r2;
        c.group = group_of[gk];
        c.row_a = row_a_id[static_cast<std::size_t>(t)][static_cast<std::size_t>(r1)];
        c.row_b = row_b_id[static_cast<std::size_t>(t)][static_cast<std::size_t>(r2)];
        pr.groups[static_cast<std::size_t>(c.group)].push_back(static_cast<int>(pr.cells.size()));
        pr.cells.push_back(c);
      }
    }
  }
  return pr;
}

Eigen::VectorXd group_marginals(const PidProblem& pr, const Eigen::VectorXd& x) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pr.groups.size()));
  for (std::size_t i = 0; i < pr.cells.size(); ++i)
    m[pr.cells[i].group] += x[static_cast<Eigen::Index>(i)];
  return m;
}

// I_Q(T;R1|R2) in bits, computed from the candidate's own marginals so the
// result is an exact functional of the returned coupling (in particular it
// cannot go negative through cancellation against constants of P).
double objective_bits(const PidProblem& pr, const Eigen::VectorXd& x) {
  const Eigen::VectorXd m = group_marginals(pr, x);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(pr.nt, pr.n2);
  Eigen::VectorXd j = Eigen::VectorXd::Zero(pr.n2);
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    k(c.t, c.r2) += x[static_cast<Eigen::Index>(i)];
    j[c.r2] += x[static_cast<Eigen::Index>(i)];
  }
  detail::CompensatedSum acc;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) acc.add(x[i] * std::log(x[i]));
  for (Eigen::Index g = 0; g < m.size(); ++g)
    if (m[g] > 0.0) acc.add(-m[g] * std::log(m[g]));
  for (int t = 0; t < pr.nt; ++t)
    for (int r2 = 0; r2 < pr.n2; ++r2)
      if (k(t, r2) > 0.0) acc.add(-k(t, r2) * std::log(k(t, r2)));
  for (int r2 = 0; r2 < pr.n2; ++r2)
    if (j[r2] > 0.0) acc.add(j[r2] * std::log(j[r2]));
  return acc.value() / kLn2;
}

Eigen::VectorXd product_coupling(const PidProblem& pr) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(pr.cells.size()));
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    x[static_cast<Eigen::Index>(i)] = pr.pt1(c.t, c.r1) * pr.pt2(c.t, c.r2) / pr.pt[c.t];
  }
  return x;
}

Eigen::VectorXd input_point(const PidProblem& pr, const PidInput& input) {
  const auto& p = input.dist.probs();
  Eigen::VectorXd x(static_cast<Eigen::Index>(pr.cells.size()));
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    x[static_cast<Eigen::Index>(i)] =
        p[(static_cast<std::int64_t>(c.t) * pr.n1 + c.r1) * pr.n2 + c.r2];
  }
  return x;
}

double feasibility_violation(const PidProblem& pr, const Eigen::VectorXd& x) {
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(pr.nt, pr.n1);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(pr.nt, pr.n2);
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    m1(c.t, c.r1) += x[static_cast<Eigen::Index>(i)];
    m2(c.t, c.r2) += x[static_cast<Eigen::Index>(i)];
  }
  const double v1 = (m1 - pr.pt1).cwiseAbs().maxCoeff();
  const double v2 = (m2 - pr.pt2).cwiseAbs().maxCoeff();
  return std::max(v1, v2);
}

// Dual and primal residuals of the barrier KKT system at (x, lambda):
//   r_dual = tau ln(x/m) - 1/x + A^T lambda,  r_pri = A x - b.
struct Residuals {
  Eigen::VectorXd dual;
  Eigen::VectorXd pri;
  double norm() const { return std::sqrt(dual.squaredNorm() + pri.squaredNorm()); }
};

Residuals residuals(const PidProblem& pr, double tau, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& lambda) {
  Residuals r;
  const Eigen::VectorXd m = group_marginals(pr, x);
  r.dual.resize(x.size());
  r.pri = -pr.b;
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    const auto ei = static_cast<Eigen::Index>(i);
    double d = tau * std::log(x[ei] / m[c.group]) - 1.0 / x[ei] + lambda[c.row_a];
    if (c.row_b >= 0) d += lambda[c.row_b];
    r.dual[ei] = d;
    r.pri[c.row_a] += x[ei];
    if (c.row_b >= 0) r.pri[c.row_b] += x[ei];
  }
  return r;
}

struct NewtonStep {
  Eigen::VectorXd dx;
  Eigen::VectorXd dlambda;
  double decrement_sq = 0.0;  // dx^T H dx, measures distance to the tau-center
  bool ok = false;
};

// Infeasible-start Newton step: solve
//   H dx + A^T dlambda = -r_dual,   A dx = -r_pri,
// so each step also cancels accumulated drift off the constraint manifold.
// The Hessian splits per (r1,r2) group as diag(d) - c 11^T with
// d = tau/x + 1/x^2 and c = tau/m, inverted by Sherman-Morrison; dlambda
// comes from a dense LDLT on the Schur complement A H^{-1} A^T.
NewtonStep newton_direction(const PidProblem& pr, double tau, const Eigen::VectorXd& x,
                            const Residuals& r) {
  NewtonStep step;
  const auto n = x.size();
  const Eigen::VectorXd m = group_marginals(pr, x);

  Eigen::VectorXd dinv(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dinv[i] = (x[i] * x[i]) / (tau * x[i] + 1.0);

  // Per-group Sherman-Morrison data: H_g^{-1} = Dinv + w (Dinv 1)(Dinv 1)^T
  // with w = c / denom and denom = sum_i (x_i/m) / (tau x_i + 1) > 0.
  const auto ngroups = pr.groups.size();
  Eigen::VectorXd w(static_cast<Eigen::Index>(ngroups));
  for (std::size_t g = 0; g < ngroups; ++g) {
    double denom = 0.0;
    for (int ci : pr.groups[g]) {
      const double xi = x[ci];
      denom += (xi / m[static_cast<Eigen::Index>(g)]) / (tau * xi + 1.0);
    }
    if (!(denom > 0.0)) return step;
    w[static_cast<Eigen::Index>(g)] = (tau / m[static_cast<Eigen::Index>(g)]) / denom;
  }

  const auto hinv_apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n);
    for (std::size_t g = 0; g < ngroups; ++g) {
      double dot = 0.0;
      for (int ci : pr.groups[g]) dot += dinv[ci] * v[ci];
      const double scale = w[static_cast<Eigen::Index>(g)] * dot;
      for (int ci : pr.groups[g]) out[ci] = dinv[ci] * (v[ci] + scale);
    }
    return out;
  };

  // Schur complement S = A H^{-1} A^T over the marginal constraints.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(pr.ncon, pr.ncon);
  for (std::size_t g = 0; g < ngroups; ++g) {
    const auto& members = pr.groups[g];
    const double wg = w[static_cast<Eigen::Index>(g)];
    for (std::size_t a = 0; a < members.size(); ++a) {
      const Cell& ca = pr.cells[static_cast<std::size_t>(members[a])];
      const double da = dinv[members[a]];
      for (std::size_t bidx = 0; bidx < members.size(); ++bidx) {
        const Cell& cb = pr.cells[static_cast<std::size_t>(members[bidx])];
        const double db = dinv[members[bidx]];
        double hij = wg * da * db;
        if (a == bidx) hij += da;
        s(ca.row_a, cb.row_a) += hij;
        if (cb.row_b >= 0) s(ca.row_a, cb.row_b) += hij;
        if (ca.row_b >= 0) {
          s(ca.row_b, cb.row_a) += hij;
          if (cb.row_b >= 0) s(ca.row_b, cb.row_b) += hij;
        }
      }
    }
  }

  // S dlambda = r_pri - A H^{-1} r_dual.
  const Eigen::VectorXd hd = hinv_apply(r.dual);
  Eigen::VectorXd rhs = r.pri;
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    const double v = hd[static_cast<Eigen::Index>(i)];
    rhs[c.row_a] -= v;
    if (c.row_b >= 0) rhs[c.row_b] -= v;
  }

  // At large tau the diagonal of S spans many orders of magnitude, so
  // equilibrate symmetrically and retry with growing jitter, accepting on a
  // residual check rather than the factorization's own verdict.
  const Eigen::VectorXd scale =
      s.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd ss = scale.asDiagonal() * s * scale.asDiagonal();
  const Eigen::VectorXd srhs = scale.asDiagonal() * rhs;
  const double rhs_scale = std::max(1.0, srhs.norm());
  bool solved = false;
  for (const double jitter : {0.0, 1e-13, 1e-9}) {
    Eigen::MatrixXd regularized = ss;
    regularized.diagonal().array() += jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(regularized);
    const Eigen::VectorXd y = ldlt.solve(srhs);
    if (!y.allFinite()) continue;
    if ((ss * y - srhs).norm() <= 1e-7 * rhs_scale) {
      step.dlambda = scale.asDiagonal() * y;
      solved = true;
      break;
    }
  }
  if (!solved) return step;

  Eigen::VectorXd z = r.dual;
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    z[static_cast<Eigen::Index>(i)] += step.dlambda[c.row_a];
    if (c.row_b >= 0) z[static_cast<Eigen::Index>(i)] += step.dlambda[c.row_b];
  }
  step.dx = -hinv_apply(z);
  if (!step.dx.allFinite()) return step;

  double dec = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    dec += step.dx[i] * step.dx[i] / dinv[i];
  for (std::size_t g = 0; g < ngroups; ++g) {
    double block = 0.0;
    for (int ci : pr.groups[g]) block += step.dx[ci];
    dec -= (tau / m[static_cast<Eigen::Index>(g)]) * block * block;
  }
  step.decrement_sq = std::max(0.0, dec);
  step.ok = true;
  return step;
}

struct SolveOutcome {
  Eigen::VectorXd x;
  double tau_reached = 1.0;
  double final_drift = 0.0;  // max marginal violation at exit
  long iterations = 0;
  bool hit_iteration_cap = false;
  bool stalled = false;
};

SolveOutcome run_barrier(const PidProblem& pr, const SolverConfig& cfg) {
  SolveOutcome out;
  out.x = product_coupling(pr);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(pr.ncon);
  const auto nfree = static_cast<double>(pr.cells.size());
  const double tol_nats = std::max(cfg.objective_tol, 1e-14) * kLn2;

  double tau = 1.0;
  constexpr double kTauFactor = 8.0;
  constexpr int kMaxStages = 80;
  constexpr int kMaxInner = 200;

  for (int stage = 0; stage < kMaxStages; ++stage) {
    bool centered = false;
    for (int k = 0; k < kMaxInner; ++k) {
      if (out.iterations >= cfg.max_iterations) {
        out.hit_iteration_cap = true;
        out.tau_reached = tau;
        return out;
      }
      const Residuals res = residuals(pr, tau, out.x, lambda);
      const double pri_inf = res.pri.size() ? res.pri.cwiseAbs().maxCoeff() : 0.0;
      const NewtonStep step = newton_direction(pr, tau, out.x, res);
      if (!step.ok) break;
      // Centered enough: feasibility at solve-noise level and a Newton
      // decrement contributing under 1% of the nfree/tau gap bound.
      if (pri_inf <= 1e-11 && step.decrement_sq <= 0.01 * nfree) {
        centered = true;
        break;
      }

      double alpha = 1.0;
      for (Eigen::Index i = 0; i < out.x.size(); ++i)
        if (step.dx[i] < 0.0)
          alpha = std::min(alpha, 0.995 * out.x[i] / (-step.dx[i]));
      const double rnorm0 = res.norm();
      int halvings = 0;
      bool accepted = false;
      while (halvings < 60) {
        const Eigen::VectorXd xt = out.x + alpha * step.dx;
        if (xt.minCoeff() > 0.0) {
          const Eigen::VectorXd lt = lambda + alpha * step.dlambda;
          if (residuals(pr, tau, xt, lt).norm() <= (1.0 - 0.25 * alpha) * rnorm0) {
            out.x = xt;
            lambda = lt;
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
        ++halvings;
      }
      if (!accepted) {
        // Residual norm at its floating-point floor; treat as centered if
        // the decrement is already small, otherwise give up on this stage.
        centered = step.decrement_sq <= 0.01 * nfree && pri_inf <= 1e-9;
        break;
      }
      ++out.iterations;
    }
    out.tau_reached = tau;
    if (!centered) {
      out.stalled = true;
      break;
    }
    if (nfree / tau <= tol_nats) break;
    tau *= kTauFactor;
    lambda *= kTauFactor;
  }
  out.final_drift = feasibility_violation(pr, out.x);
  return out;
}

JointDistribution assemble_q_star(const PidProblem& pr, const VariableSchema& schema,
                                  const Eigen::VectorXd& x) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(pr.nt) * pr.n1 * pr.n2);
  for (std::size_t i = 0; i < pr.cells.size(); ++i) {
    const auto& c = pr.cells[i];
    full[(static_cast<Eigen::Index>(c.t) * pr.n1 + c.r1) * pr.n2 + c.r2] =
        std::max(0.0, x[static_cast<Eigen::Index>(i)]);
  }
  return JointDistribution::from_tensor(schema, std::move(full));
}

}  // namespace

PidInput make_pid_input(const JointDistribution& dist, const std::string& t,
                        const std::string& r1, const std::string& r2) {
  if (dist.schema().size() != 3)
    throw ArgumentError("pid input requires a distribution over exactly three variables");
  return PidInput{reorder(dist, {t, r1, r2})};
}

UniqueInfoResult unique_information(const PidInput& input, const SolverConfig& config) {
  if (!(config.objective_tol > 0.0) || !(config.feasibility_tol > 0.0) ||
      config.max_iterations < 1)
    throw ArgumentError("invalid solver configuration");

  const PidProblem pr = build_problem(input);
  if (pr.cells.empty())
    throw ArgumentError("pid input has no probability mass");
  // The Newton step factors a dense ncon x ncon system; past this point the
  // memory and cubic factor cost stop being practical.
  if (pr.ncon > 2500)
    throw SizeError("joint alphabet too large for the exact decomposition solver (" +
                    std::to_string(pr.ncon) + " coupling constraints, limit 2500)");

  const SolveOutcome outcome = run_barrier(pr, config);

  // The returned point is the best of the barrier iterate, the product
  // coupling, and P itself, and its objective is evaluated from its own
  // marginals, so the value never exceeds I_P(T;R1|R2).
  Eigen::VectorXd candidates[3] = {outcome.x, product_coupling(pr),
                                   input_point(pr, input)};
  int best = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double obj = objective_bits(pr, candidates[i]);
    if (obj < best_obj) {
      best_obj = obj;
      best = i;
    }
  }

  // Certified bound on value - inf: the barrier term nfree/tau (with a 2%
  // centering allowance) plus a first-order allowance for the residual
  // drift of the marginals at exit.
  const double gap_bits =
      1.02 * static_cast<double>(pr.cells.size()) / (outcome.tau_reached * kLn2) +
      50.0 * outcome.final_drift;

  if (outcome.hit_iteration_cap) {
    std::ostringstream msg;
    msg << "unique_information: no convergence after " << outcome.iterations
        << " Newton steps (gap bound " << gap_bits << " bits)";
    throw ConvergenceError(msg.str(), best_obj, gap_bits);
  }
  if (outcome.stalled)
    throw ConvergenceError("unique_information: numerical stall before reaching "
                           "the requested objective tolerance",
                           best_obj, gap_bits);

  UniqueInfoResult result;
  if (best_obj < 0.0) {
    if (best_obj < -1e-12)
      throw IntegrityError("unique information evaluated below -1e-12 bits");
    best_obj = 0.0;
  }
  result.value = best_obj;
  result.iterations = outcome.iterations;
  result.objective_gap = gap_bits;

  const double violation = feasibility_violation(pr, candidates[best]);
  if (violation > config.feasibility_tol)
    throw IntegrityError("solver point violates marginal constraints by " +
                         std::to_string(violation));
  result.q_star = assemble_q_star(pr, input.dist.schema(), candidates[best]);
  return result;
}

PidResult pid_decompose(const PidInput& input, const SolverConfig& config) {
  const auto& schema = input.dist.schema();
  if (schema.size() != 3)
    throw ArgumentError("pid input requires a distribution over exactly three variables");
  const std::string t = schema.var(0).name;
  const std::string r1 = schema.var(1).name;
  const std::string r2 = schema.var(2).name;

  const UniqueInfoResult ui = unique_information(input, config);
  const double i_t_r1 = mutual_info(input.dist, {t}, {r1});
  const double i_t_r2 = mutual_info(input.dist, {t}, {r2});
  const double i_joint = mutual_info(input.dist, {t}, {r1, r2});

  const double ui_1 = ui.value;
  const double si = i_t_r1 - ui_1;
  const double ui_2 = i_t_r2 - si;
  const double ci = i_joint - ui_1 - ui_2 - si;

  const auto clamp_part = [&](double v, const char* part) {
    if (v >= 0.0) return v;
    if (v >= -config.clamp_threshold) return 0.0;
    throw IntegrityError(std::string("pid component ") + part + " = " +
                         std::to_string(v) + " below -clamp_threshold");
  };

  PidResult result;
  result.ui_1 = clamp_part(ui_1, "ui_1");
  result.ui_2 = clamp_part(ui_2, "ui_2");
  result.si = clamp_part(si, "si");
  result.ci = clamp_part(ci, "ci");
  result.q_star = ui.q_star;
  result.iterations = ui.iterations;
  result.objective_gap = ui.objective_gap;
  return result;
}

// ---------------------------------------------------------------------------
// Grid oracle
// ---------------------------------------------------------------------------

namespace {

struct GridSearch {
  const PidProblem& pr;
  std::vector<int> block_ts;          // t values with positive mass
  std::vector<std::size_t> cell_block;  // cell id -> block index
  std::vector<Eigen::MatrixXd> c;     // conditional couplings, one per block
  std::vector<Eigen::VectorXd> row_rem, col_rem;
  // Optional refinement windows per block: same shape as c.
  const std::vector<Eigen::MatrixXd>* centers = nullptr;
  double window = 0.0;
  double step;
  Eigen::VectorXd work;  // unconditional masses over free cells
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_c;
  long leaves = 0;

  explicit GridSearch(const PidProblem& problem, double grid_step)
      : pr(problem), step(grid_step) {
    for (int t = 0; t < pr.nt; ++t)
      if (pr.pt[t] > 0.0) block_ts.push_back(t);
    cell_block.resize(pr.cells.size());
    for (std::size_t ci = 0; ci < pr.cells.size(); ++ci) {
      std::size_t bi = 0;
      while (block_ts[bi] != pr.cells[ci].t) ++bi;
      cell_block[ci] = bi;
    }
    c.assign(block_ts.size(), Eigen::MatrixXd::Zero(pr.n1, pr.n2));
    row_rem.assign(block_ts.size(), Eigen::VectorXd::Zero(pr.n1));
    col_rem.assign(block_ts.size(), Eigen::VectorXd::Zero(pr.n2));
    work.resize(static_cast<Eigen::Index>(pr.cells.size()));
  }

  void run() {
    descend_block(0);
    if (leaves == 0)
      throw IntegrityError("grid search visited no feasible point");
  }

  void descend_block(std::size_t bi) {
    if (bi == block_ts.size()) {
      evaluate();
      return;
    }
    const int t = block_ts[bi];
    for (int r1 = 0; r1 < pr.n1; ++r1)
      row_rem[bi][r1] = pr.pt1(t, r1) / pr.pt[t];
    for (int r2 = 0; r2 < pr.n2; ++r2)
      col_rem[bi][r2] = pr.pt2(t, r2) / pr.pt[t];
    descend_cell(bi, 0, 0);
  }

  void descend_cell(std::size_t bi, int i, int j) {
    // Forced trailing row closes the block. Checked before the trailing
    // column so a single-column coupling (n2 == 1) still closes here.
    if (i == pr.n1 - 1) {
      Eigen::VectorXd saved = col_rem[bi];
      bool ok = true;
      for (int jj = 0; jj < pr.n2; ++jj) {
        if (col_rem[bi][jj] < -1e-12) {
          ok = false;
          break;
        }
        c[bi](pr.n1 - 1, jj) = std::max(0.0, col_rem[bi][jj]);
      }
      if (ok) {
        col_rem[bi].setZero();
        descend_block(bi + 1);
      }
      col_rem[bi] = saved;
      return;
    }
    // Forced trailing column of each row.
    if (j == pr.n2 - 1) {
      const double forced = row_rem[bi][i];
      if (forced < -1e-12 || forced > col_rem[bi][pr.n2 - 1] + 1e-12) return;
      const double v = std::max(0.0, forced);
      c[bi](i, pr.n2 - 1) = v;
      row_rem[bi][i] -= v;
      col_rem[bi][pr.n2 - 1] -= v;
      descend_cell(bi, i + 1, 0);
      row_rem[bi][i] += v;
      col_rem[bi][pr.n2 - 1] += v;
      return;
    }

    const double cap = std::min(row_rem[bi][i], col_rem[bi][j]);
    if (cap < -1e-12) return;
    double lo = 0.0, hi = std::max(0.0, cap);
    if (centers) {
      const double center = (*centers)[bi](i, j);
      lo = std::max(lo, center - window);
      hi = std::min(hi, center + window);
      if (lo > hi) return;
    }
    const auto steps = static_cast<long>(std::floor((hi - lo) / step));
    for (long k = 0; k <= steps + 1; ++k) {
      const double v = (k <= steps) ? lo + static_cast<double>(k) * step : hi;
      if (k > steps && steps >= 0 && hi - (lo + static_cast<double>(steps) * step) < step * 1e-9)
        break;  // hi already on the lattice
      c[bi](i, j) = v;
      row_rem[bi][i] -= v;
      col_rem[bi][j] -= v;
      if (row_rem[bi][i] >= -1e-12 && col_rem[bi][j] >= -1e-12)
        descend_cell(bi, i, j + 1);
      row_rem[bi][i] += v;
      col_rem[bi][j] += v;
    }
  }

  void evaluate() {
    ++leaves;
    for (std::size_t ci = 0; ci < pr.cells.size(); ++ci) {
      const Cell& cell = pr.cells[ci];
      work[static_cast<Eigen::Index>(ci)] =
          pr.pt[cell.t] * c[cell_block[ci]](cell.r1, cell.r2);
    }
    const double obj = objective_bits(pr, work);
    if (obj < best) {
      best = obj;
      best_c = c;
    }
  }
};

}  // namespace

double brute_force_ui(const PidInput& input, double grid_step) {
  if (!(grid_step > 0.0) || grid_step > 0.5)
    throw ArgumentError("grid_step must lie in (0, 0.5]");
  const PidProblem pr = build_problem(input);
  const std::int64_t alphabet =
      static_cast<std::int64_t>(pr.nt) * pr.n1 * pr.n2;
  if (alphabet > 64)
    throw SizeError("brute_force_ui supports |T|*|R1|*|R2| <= 64, got " +
                    std::to_string(alphabet));

  long free_dims = 0;
  for (int t = 0; t < pr.nt; ++t)
    if (pr.pt[t] > 0.0) free_dims += static_cast<long>(pr.n1 - 1) * (pr.n2 - 1);
  const double leaf_estimate =
      std::pow(1.0 / grid_step + 2.0, static_cast<double>(free_dims));
  if (leaf_estimate > 5e7)
    throw SizeError("grid too fine for the free dimension count; coarsen grid_step");

  GridSearch coarse(pr, grid_step);
  coarse.run();

  if (free_dims > 0 && free_dims <= 6) {
    GridSearch fine(pr, grid_step / 32.0);
    fine.centers = &coarse.best_c;
    fine.window = grid_step;
    fine.run();
    return std::min(coarse.best, fine.best);
  }
  return coarse.best;
}

}  // namespace fairsel
