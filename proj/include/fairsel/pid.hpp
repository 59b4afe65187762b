#pragma once

#include <cstdint>
#include <string>

#include "fairsel/distribution.hpp"

namespace fairsel {

// Joint distribution over exactly three variables in the fixed order
// (T, R1, R2): axis 0 is the target, axis 1 the primary source, axis 2 the
// conditioning source.
struct PidInput {
  JointDistribution dist;
};

// Permutes dist so the named variables land in (T, R1, R2) order.
PidInput make_pid_input(const JointDistribution& dist, const std::string& t,
                        const std::string& r1, const std::string& r2);

struct SolverConfig {
  double objective_tol = 1e-10;   // bits; barrier suboptimality target
  double feasibility_tol = 1e-9;  // max marginal violation allowed in q_star
  long max_iterations = 100000;   // total Newton steps across barrier stages
  double clamp_threshold = 1e-9;  // negative decomposition parts above this clamp to 0
};

struct UniqueInfoResult {
  double value = 0.0;          // UI(T; R1 \ R2) in bits
  JointDistribution q_star;    // minimizing coupling over (T, R1, R2)
  long iterations = 0;         // Newton steps spent
  // Certified first-order bound on value minus the true minimum, in bits:
  // the barrier term (driven below objective_tol) plus an allowance for the
  // residual marginal drift of the returned coupling.
  double objective_gap = 0.0;
};

// min over Q in the constraint set {Q_(T,R1) = P_(T,R1), Q_(T,R2) = P_(T,R2)}
// of I_Q(T; R1 | R2). The feasible set factors, per target value t with
// positive mass, into the transportation polytope coupling P(r1|t) with
// P(r2|t); cells forced to zero by a zero pair marginal are eliminated up
// front. The convex objective is minimized by a log-barrier interior-point
// method with damped Newton steps; see solver notes in pid.cpp.
UniqueInfoResult unique_information(const PidInput& input, const SolverConfig& config = {});

struct PidResult {
  double ui_1 = 0.0;  // unique information of R1 about T
  double ui_2 = 0.0;  // unique information of R2 about T
  double si = 0.0;    // shared information
  double ci = 0.0;    // complementary (synergistic) information
  JointDistribution q_star;
  long iterations = 0;
  double objective_gap = 0.0;
};

// Full bivariate decomposition. ui_1 comes from the solver; the rest follow
// from the accounting identities
//   si = I(T;R1) - ui_1,  ui_2 = I(T;R2) - si,
//   ci = I(T;R1,R2) - ui_1 - ui_2 - si.
// Parts in [-clamp_threshold, 0) clamp to zero; lower raises IntegrityError.
PidResult pid_decompose(const PidInput& input, const SolverConfig& config = {});

// Independent check oracle: exhaustive search over a discretization of the
// per-t transportation polytopes at the given resolution, followed by one
// local refinement pass at grid_step/32 around the best coarse point. Only
// defined for |T|*|R1|*|R2| <= 64 (SizeError beyond). The returned value is
// the objective at an exactly feasible grid point, so it upper-bounds the
// true minimum.
double brute_force_ui(const PidInput& input, double grid_step);

}  // namespace fairsel
