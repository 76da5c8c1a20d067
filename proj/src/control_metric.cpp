#include "shf/control_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "shf/constants.hpp"

namespace shf::control {

namespace c = shf::constants;
using orbits::MeeState;

TransferProblem TransferProblem::build(const MeeState& pre, const MeeState& post,
                                       double tof_s) {
  pre.validate();
  post.validate();
  if (!(tof_s > 0.0)) throw std::domain_error("TransferProblem: tof > 0");

  TransferProblem tp;
  tp.oe_initial = pre;
  tp.oe_final = post;
  tp.tof_s = tof_s;
  tp.L_window_lo = pre.L;
  tp.L_window_hi = orbits::kepler_propagate(pre, tof_s).L;

  tp.target_delta[0] = (post.p - pre.p) / pre.p;
  tp.target_delta[1] = post.f - pre.f;
  tp.target_delta[2] = post.g - pre.g;
  tp.target_delta[3] = post.h - pre.h;
  tp.target_delta[4] = post.k - pre.k;
  // phasing correction left after ballistic coasting
  tp.target_delta[5] =
      c::wrap_pi(c::wrap_pi(post.L) - c::wrap_pi(tp.L_window_hi));
  return tp;
}

Vec6 linear_delta_oe(const MeeState& state, const Vec3& dv_rtn) {
  return orbits::sensitivity_matrix(state) * dv_rtn;
}

namespace {

// Per-burn sensitivity in the nondimensional target space: the p row is
// scaled by p0 and the sixth row couples the immediate L change with the
// downstream drift caused by the burn's semi-major-axis change.
Mat63 burn_matrix(const MeeState& orbit_elements, double L, double p_ref,
                  double time_remaining_s) {
  MeeState at_burn = orbit_elements;
  at_burn.L = L;
  const Mat63 A = orbits::sensitivity_matrix(at_burn);
  const double n = orbits::mean_motion(at_burn);
  const double dn_dp = -1.5 * n / at_burn.p;

  Mat63 out;
  out.row(0) = A.row(0) / p_ref;
  out.row(1) = A.row(1);
  out.row(2) = A.row(2);
  out.row(3) = A.row(3);
  out.row(4) = A.row(4);
  out.row(5) = A.row(5) + dn_dp * time_remaining_s * A.row(0);
  return out;
}

struct Objective {
  const TransferProblem* tp;
  double c1;

  // time from the window start to true longitude L along the initial orbit
  double time_at(double L) const {
    return orbits::time_between_longitudes(tp->oe_initial, tp->L_window_lo, L);
  }

  TwoBurnSolution solve(double L1, double L2) const {
    const double trem1 = std::max(0.0, tp->tof_s - time_at(L1));
    const double trem2 = std::max(0.0, tp->tof_s - time_at(L2));
    const Mat63 B1 =
        burn_matrix(tp->oe_initial, L1, tp->oe_initial.p, trem1);
    const Mat63 B2 = burn_matrix(tp->oe_final, L2, tp->oe_initial.p, trem2);
    Eigen::Matrix<double, 6, 6> Ap;
    Ap.leftCols<3>() = B1;
    Ap.rightCols<3>() = B2;

    const Mat6 M = Mat6::Identity() + c1 * Ap.transpose() * Ap;
    const Vec6 b = c1 * Ap.transpose() * tp->target_delta;
    Eigen::LDLT<Mat6> ldlt(M);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("solve_two_burn: normal matrix factorization failed");
    Vec6 x = ldlt.solve(b);
    x += ldlt.solve(b - M * x);  // iterative refinement
    x += ldlt.solve(b - M * x);

    TwoBurnSolution sol;
    sol.dv1 = x.head<3>();
    sol.dv2 = x.tail<3>();
    sol.L1 = L1;
    sol.L2 = L2;
    sol.cost_km_s = sol.dv1.norm() + sol.dv2.norm();
    sol.injection_residual = tp->target_delta - Ap * x;
    sol.augmented = Ap;
    sol.objective =
        x.squaredNorm() + c1 * sol.injection_residual.squaredNorm();
    const auto d = ldlt.vectorD();
    const double dmin = d.minCoeff(), dmax = d.maxCoeff();
    if (!(dmin > 0.0) || !std::isfinite(dmax))
      throw std::runtime_error("solve_two_burn: singular normal matrix, cond ~ " +
                               std::to_string(dmax / std::max(dmin, 1e-300)));
    sol.condition = dmax / dmin;
    return sol;
  }

  double value(double L1, double L2) const { return solve(L1, L2).objective; }
};

struct Point2 {
  double L1, L2;
};

Point2 project_feasible(Point2 p, double lo, double hi) {
  p.L1 = std::clamp(p.L1, lo, hi);
  p.L2 = std::clamp(p.L2, lo, hi);
  if (p.L1 > p.L2) {
    const double mid = std::clamp(0.5 * (p.L1 + p.L2), lo, hi);
    p.L1 = p.L2 = mid;
  }
  return p;
}

// Nelder-Mead on the projected objective; picks up the slack where the
// gradient descent crawls along nearly flat valley floors.
Point2 simplex_polish(const Objective& obj, Point2 x0, double lo, double hi,
                      double* j_out) {
  const double span = std::max(hi - lo, 1e-9);
  const auto fn = [&](double l1, double l2) {
    const Point2 p = project_feasible({l1, l2}, lo, hi);
    return obj.value(p.L1, p.L2);
  };
  std::array<Point2, 3> xs{{x0,
                            {x0.L1 + 0.02 * span, x0.L2},
                            {x0.L1, x0.L2 + 0.02 * span}}};
  std::array<double, 3> fs{fn(xs[0].L1, xs[0].L2), fn(xs[1].L1, xs[1].L2),
                           fn(xs[2].L1, xs[2].L2)};
  auto order = [&] {
    for (int i = 0; i < 2; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (fs[j] < fs[i]) {
          std::swap(fs[i], fs[j]);
          std::swap(xs[i], xs[j]);
        }
  };
  order();
  for (int it = 0; it < 400; ++it) {
    const double cx = 0.5 * (xs[0].L1 + xs[1].L1);
    const double cy = 0.5 * (xs[0].L2 + xs[1].L2);
    const Point2 refl{cx + (cx - xs[2].L1), cy + (cy - xs[2].L2)};
    const double fr = fn(refl.L1, refl.L2);
    if (fr < fs[0]) {
      const Point2 exp_{cx + 2.0 * (cx - xs[2].L1), cy + 2.0 * (cy - xs[2].L2)};
      const double fe = fn(exp_.L1, exp_.L2);
      if (fe < fr) {
        xs[2] = exp_;
        fs[2] = fe;
      } else {
        xs[2] = refl;
        fs[2] = fr;
      }
    } else if (fr < fs[1]) {
      xs[2] = refl;
      fs[2] = fr;
    } else {
      const Point2 con{cx + 0.5 * (xs[2].L1 - cx), cy + 0.5 * (xs[2].L2 - cy)};
      const double fc = fn(con.L1, con.L2);
      if (fc < fs[2]) {
        xs[2] = con;
        fs[2] = fc;
      } else {
        for (int i = 1; i < 3; ++i) {
          xs[i].L1 = xs[0].L1 + 0.5 * (xs[i].L1 - xs[0].L1);
          xs[i].L2 = xs[0].L2 + 0.5 * (xs[i].L2 - xs[0].L2);
          fs[i] = fn(xs[i].L1, xs[i].L2);
        }
      }
    }
    order();
    const double size = std::abs(xs[1].L1 - xs[0].L1) +
                        std::abs(xs[2].L1 - xs[0].L1) +
                        std::abs(xs[1].L2 - xs[0].L2) +
                        std::abs(xs[2].L2 - xs[0].L2);
    if (size < 1e-12 * span) break;
  }
  *j_out = fs[0];
  return project_feasible(xs[0], lo, hi);
}

Point2 gradient_descent(const Objective& obj, Point2 x0, double lo, double hi,
                        double prune_above, double* j_out) {
  const double span = std::max(hi - lo, 1e-9);
  const double fd = 1e-7 * span;
  double jx = obj.value(x0.L1, x0.L2);
  Point2 x = x0;
  double step0 = span / 8.0;

  for (int iter = 0; iter < 300; ++iter) {
    // abandon starts that stay dominated by an already-found optimum
    if (iter >= 6 && jx > prune_above) break;

    const auto at = [&](double d1, double d2) {
      const Point2 p = project_feasible({x.L1 + d1, x.L2 + d2}, lo, hi);
      return obj.value(p.L1, p.L2);
    };
    const double g1 = (at(fd, 0) - at(-fd, 0)) / (2.0 * fd);
    const double g2 = (at(0, fd) - at(0, -fd)) / (2.0 * fd);
    const double gnorm = std::hypot(g1, g2);
    if (gnorm == 0.0) break;

    double alpha = step0 / gnorm;
    bool improved = false;
    double accepted_step = 0.0;
    for (int ls = 0; ls < 80; ++ls) {
      const Point2 trial =
          project_feasible({x.L1 - alpha * g1, x.L2 - alpha * g2}, lo, hi);
      const double jt = obj.value(trial.L1, trial.L2);
      if (jt < jx - 1e-4 * alpha * gnorm * gnorm) {
        improved = true;
        accepted_step = alpha * gnorm;
        x = trial;
        jx = jt;
        break;
      }
      alpha *= 0.5;
      if (alpha * gnorm < 1e-15 * span) break;
    }
    if (!improved) break;
    // quadratic tail: a step of 1e-8 span moves J by far less than the
    // 1e-12-absolute comparisons downstream
    if (accepted_step < 1e-8 * span) break;
    step0 = std::max(step0 * 0.7, 1e-12 * span);
  }
  *j_out = jx;
  return x;
}

}  // namespace

TwoBurnSolution solve_two_burn(const TransferProblem& problem, double L1,
                               double L2, double c1) {
  if (!(problem.L_window_lo <= L1 + 1e-12 && L1 <= L2 + 1e-12 &&
        L2 <= problem.L_window_hi + 1e-12))
    throw std::domain_error("solve_two_burn: longitudes outside the window");
  Objective obj{&problem, c1};
  return obj.solve(L1, L2);
}

TwoBurnSolution optimize_longitudes_in_window(const TransferProblem& problem,
                                              double c1, double lo, double hi) {
  if (!(problem.tof_s > 0.0)) throw std::domain_error("optimize_longitudes: tof");
  if (!(problem.L_window_lo <= lo && lo <= hi && hi <= problem.L_window_hi))
    throw std::domain_error("optimize_longitudes: window outside feasible range");
  Objective obj{&problem, c1};

  if (problem.target_delta.norm() == 0.0) {
    // degenerate minimum; tie-break at the smallest longitudes
    return obj.solve(lo, lo);
  }

  const int per_rev = 24;
  const int n_nodes = std::max(
      3, static_cast<int>(std::ceil(per_rev * (hi - lo) / c::kTwoPi)) + 1);
  std::vector<double> nodes(n_nodes);
  for (int i = 0; i < n_nodes; ++i)
    nodes[i] = lo + (hi - lo) * i / (n_nodes - 1.0);

  // precompute per-node burn data: the first-burn matrix depends on L1 only
  // and the second-burn matrix on L2 only
  std::vector<Mat63> b1(n_nodes), b2(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    const double trem = std::max(0.0, problem.tof_s - obj.time_at(nodes[i]));
    b1[i] = burn_matrix(problem.oe_initial, nodes[i], problem.oe_initial.p, trem);
    b2[i] = burn_matrix(problem.oe_final, nodes[i], problem.oe_initial.p, trem);
  }
  const auto grid_value = [&](int i, int j) {
    Eigen::Matrix<double, 6, 6> Ap;
    Ap.leftCols<3>() = b1[i];
    Ap.rightCols<3>() = b2[j];
    const Mat6 M = Mat6::Identity() + c1 * Ap.transpose() * Ap;
    const Vec6 b = c1 * Ap.transpose() * problem.target_delta;
    const Vec6 x = M.ldlt().solve(b);
    return x.squaredNorm() + c1 * (problem.target_delta - Ap * x).squaredNorm();
  };

  struct GridHit {
    double j;
    Point2 p;
  };
  std::vector<GridHit> hits;
  hits.reserve(static_cast<std::size_t>(n_nodes) * (n_nodes + 1) / 2);
  for (int i = 0; i < n_nodes; ++i)
    for (int j = i; j < n_nodes; ++j)
      hits.push_back({grid_value(i, j), {nodes[i], nodes[j]}});
  std::sort(hits.begin(), hits.end(),
            [](const GridHit& a, const GridHit& b) { return a.j < b.j; });
  const double grid_best = hits.front().j;

  // descend from the best few grid nodes; keep the overall winner
  Point2 best = hits.front().p;
  double best_j = grid_best;
  const int starts = std::min<std::size_t>(4, hits.size());
  for (int s = 0; s < starts; ++s) {
    double jd;
    const double prune =
        s == 0 ? std::numeric_limits<double>::infinity()
               : best_j + std::max(1e-14, 1e-9 * std::abs(best_j));
    const Point2 xd = gradient_descent(obj, hits[s].p, lo, hi, prune, &jd);
    if (jd < best_j ||
        (jd <= best_j + 1e-15 * std::max(1.0, best_j) &&
         (xd.L1 < best.L1 || (xd.L1 == best.L1 && xd.L2 < best.L2)))) {
      best_j = jd;
      best = xd;
    }
  }

  {
    double jp;
    const Point2 polished = simplex_polish(obj, best, lo, hi, &jp);
    if (jp < best_j) {
      best_j = jp;
      best = polished;
    }
  }

  TwoBurnSolution sol = obj.solve(best.L1, best.L2);
  // the descent starts at the best grid node and never accepts an increase
  if (sol.objective > grid_best + 1e-15 * std::max(1.0, grid_best))
    sol = obj.solve(hits.front().p.L1, hits.front().p.L2);
  return sol;
}

TwoBurnSolution optimize_longitudes(const TransferProblem& problem, double c1) {
  return optimize_longitudes_in_window(problem, c1, problem.L_window_lo,
                                       problem.L_window_hi);
}

double control_distance(const MeeState& pre_orbit, const MeeState& post_orbit,
                        double tof_s, double c1) {
  const TransferProblem tp = TransferProblem::build(pre_orbit, post_orbit, tof_s);
  return optimize_longitudes(tp, c1).cost_km_s;
}

}  // namespace shf::control
