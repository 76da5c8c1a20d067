#pragma once

#include "shf/orbits.hpp"
#include "shf/types.hpp"

namespace shf::control {

// Relative weight of the injection error against the burn cost in J.
// The element deltas are nondimensionalized (dp scaled by p0) so a residual
// of 1e-4 costs like a centimeter-per-second burn at this default.
inline constexpr double kDefaultC1 = 1e8;

// Two-point boundary value problem for the linearized two-burn transfer.
// target_delta is (dp/p0, df, dg, dh, dk, dL_req) where dL_req is the
// longitude correction left after ballistic coasting, wrapped to (-pi, pi].
struct TransferProblem {
  orbits::MeeState oe_initial;
  orbits::MeeState oe_final;
  double tof_s = 0.0;
  Vec6 target_delta = Vec6::Zero();
  double L_window_lo = 0.0;  // L_0
  double L_window_hi = 0.0;  // ballistic L_f (unwrapped from L_0)

  static TransferProblem build(const orbits::MeeState& pre,
                               const orbits::MeeState& post, double tof_s);
};

struct TwoBurnSolution {
  Vec3 dv1 = Vec3::Zero();  // RTN at L1, km/s
  Vec3 dv2 = Vec3::Zero();  // RTN at L2, km/s
  double L1 = 0.0;
  double L2 = 0.0;
  double cost_km_s = 0.0;   // P = |dv1| + |dv2|
  double objective = 0.0;   // J at (L1, L2)
  Vec6 injection_residual = Vec6::Zero();
  Mat6 augmented = Mat6::Zero();  // A' = [A(oe_0,L1) | A(oe_f,L2)]
  double condition = 1.0;         // of the normal matrix
};

// First-order element change of an RTN impulse (raw units, includes the
// L row).
Vec6 linear_delta_oe(const orbits::MeeState& state, const Vec3& dv_rtn);

// Closed-form optimal burn pair for fixed longitudes (stationarity of J).
TwoBurnSolution solve_two_burn(const TransferProblem& problem, double L1,
                               double L2, double c1);

// Coarse grid (24 nodes per revolution) over the feasible triangle
// L_0 <= L1 <= L2 <= L_f followed by projected gradient descent.
TwoBurnSolution optimize_longitudes(const TransferProblem& problem, double c1);

// Same search restricted to a sub-window of feasible burn longitudes.
TwoBurnSolution optimize_longitudes_in_window(const TransferProblem& problem,
                                              double c1, double window_lo,
                                              double window_hi);

// The control distance metric P between two orbits over a time of flight.
double control_distance(const orbits::MeeState& pre_orbit,
                        const orbits::MeeState& post_orbit, double tof_s,
                        double c1 = kDefaultC1);

}  // namespace shf::control
