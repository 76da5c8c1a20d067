#include "shf/admissible_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shf/constants.hpp"
#include "shf/parallel.hpp"

namespace shf::region {

namespace c = shf::constants;
using obs::Attributable;
using orbits::MeeState;

void RegionThresholds::validate() const {
  if (!(0.0 < p_min_km_s && p_min_km_s <= p_max_km_s))
    throw std::domain_error("RegionThresholds: 0 < p_min <= p_max");
  if (k_p < 1.0) throw std::domain_error("RegionThresholds: k_p >= 1");
}

double admissible_threshold(double p_centroid_km_s, const RegionThresholds& th) {
  th.validate();
  if (p_centroid_km_s < 0.0)
    throw std::domain_error("admissible_threshold: p_centroid >= 0");
  return std::min(th.p_max_km_s,
                  std::max(th.p_min_km_s, th.k_p * p_centroid_km_s));
}

double control_distance_at(const MeeState& pre_orbit, const Attributable& attr,
                           double tof_s, double rho_km, double rho_rate_km_s,
                           double c1) {
  if (rho_km <= 0.0) return std::numeric_limits<double>::infinity();
  try {
    orbits::CartesianState cart =
        obs::state_from_range(attr, rho_km, rho_rate_km_s);
    cart.srp_coeff = pre_orbit.srp_coeff;
    const MeeState post = orbits::cart_to_mee(cart);
    return control::control_distance(pre_orbit, post, tof_s, c1);
  } catch (const std::domain_error&) {
    // hyperbolic or otherwise unreachable geometry
    return std::numeric_limits<double>::infinity();
  }
}

namespace {

struct RangePair {
  double rho;
  double rho_rate;
};

RangePair range_of(const orbits::CartesianState& state, const Attributable& attr) {
  Vec3 rs, vs;
  obs::site_state_eci(attr.site, attr.epoch_s, rs, vs);
  const Vec3 d = state.position_km - rs;
  const double rho = d.norm();
  return {rho, d.dot(state.velocity_km_s - vs) / rho};
}

// squared observation residual of the (i, nu)-adjusted orbit
struct CentroidObjective {
  orbits::ClassicalElements base;
  double srp_coeff;
  const Attributable* attr;

  orbits::CartesianState state_at(double inc, double nu) const {
    orbits::ClassicalElements el = base;
    el.i = inc;
    el.nu = nu;
    return orbits::mee_to_cart(
        orbits::mee_from_classical(el, srp_coeff, attr->epoch_s));
  }

  double value(double inc, double nu) const {
    const Attributable pred =
        obs::measure(state_at(inc, nu), attr->site, attr->epoch_s);
    Vec4 r = attr->z() - pred.z();
    r[0] = c::wrap_pi(r[0]);
    return r.squaredNorm();
  }

  Vec4 residual(double inc, double nu) const {
    const Attributable pred =
        obs::measure(state_at(inc, nu), attr->site, attr->epoch_s);
    Vec4 r = attr->z() - pred.z();
    r[0] = c::wrap_pi(r[0]);
    return r;
  }
};

struct NmPoint {
  double x, y, f;
};

// 2-D Nelder-Mead with standard coefficients; returns the best vertex.
template <class F>
NmPoint nelder_mead_2d(const F& fn, double x0, double y0, double dx, double dy,
                       int max_iter) {
  std::array<NmPoint, 3> s{{{x0, y0, fn(x0, y0)},
                            {x0 + dx, y0, fn(x0 + dx, y0)},
                            {x0, y0 + dy, fn(x0, y0 + dy)}}};
  auto order = [&] {
    std::sort(s.begin(), s.end(),
              [](const NmPoint& a, const NmPoint& b) { return a.f < b.f; });
  };
  order();
  for (int it = 0; it < max_iter; ++it) {
    const double cx = 0.5 * (s[0].x + s[1].x);
    const double cy = 0.5 * (s[0].y + s[1].y);
    const double rx = cx + (cx - s[2].x), ry = cy + (cy - s[2].y);
    const double fr = fn(rx, ry);
    if (fr < s[0].f) {
      const double ex = cx + 2.0 * (cx - s[2].x), ey = cy + 2.0 * (cy - s[2].y);
      const double fe = fn(ex, ey);
      s[2] = fe < fr ? NmPoint{ex, ey, fe} : NmPoint{rx, ry, fr};
    } else if (fr < s[1].f) {
      s[2] = {rx, ry, fr};
    } else {
      const double kx = cx + 0.5 * (s[2].x - cx), ky = cy + 0.5 * (s[2].y - cy);
      const double fk = fn(kx, ky);
      if (fk < s[2].f) {
        s[2] = {kx, ky, fk};
      } else {  // shrink
        for (int i = 1; i < 3; ++i) {
          s[i].x = s[0].x + 0.5 * (s[i].x - s[0].x);
          s[i].y = s[0].y + 0.5 * (s[i].y - s[0].y);
          s[i].f = fn(s[i].x, s[i].y);
        }
      }
    }
    order();
    const double size = std::abs(s[2].x - s[0].x) + std::abs(s[1].x - s[0].x) +
                        std::abs(s[2].y - s[0].y) + std::abs(s[1].y - s[0].y);
    if (size < 1e-13 && std::abs(s[2].f - s[0].f) < 1e-30) break;
  }
  return s[0];
}

}  // namespace

CentroidResult centroid(const MeeState& pre_orbit, const Attributable& attr,
                        double tof_s) {
  if (!(tof_s > 0.0)) throw std::domain_error("centroid: tof > 0");
  const MeeState ballistic = orbits::kepler_propagate(pre_orbit, tof_s);

  CentroidObjective obj;
  obj.base = orbits::classical_from_mee(ballistic);
  obj.srp_coeff = pre_orbit.srp_coeff;
  obj.attr = &attr;
  const double i0 = obj.base.i;
  const double nu0 = obj.base.nu;

  double box_i = 2.0 * c::kDegToRad;
  double box_nu = 5.0 * c::kDegToRad;

  for (int attempt = 0; attempt < 2; ++attempt) {
    // 36x36 seed grid
    double bi = i0, bnu = nu0, bf = std::numeric_limits<double>::infinity();
    const int n = 36;
    for (int a = 0; a < n; ++a) {
      const double inc =
          std::max(1e-7, i0 - box_i + 2.0 * box_i * a / (n - 1.0));
      for (int b = 0; b < n; ++b) {
        const double nu = nu0 - box_nu + 2.0 * box_nu * b / (n - 1.0);
        const double f = obj.value(inc, nu);
        if (f < bf) {
          bf = f;
          bi = inc;
          bnu = nu;
        }
      }
    }

    const auto fn = [&](double x, double y) {
      return obj.value(std::max(1e-7, x), y);
    };
    NmPoint best = nelder_mead_2d(fn, bi, bnu, 0.1 * c::kDegToRad,
                                  0.1 * c::kDegToRad, 400);

    // Gauss-Newton polish: drive the residual gradient below 1e-10
    double inc = std::max(1e-7, best.x), nu = best.y, fval = best.f;
    for (int it = 0; it < 40; ++it) {
      const double hstep = 1e-8;
      const Vec4 r = obj.residual(inc, nu);
      Eigen::Matrix<double, 4, 2> J;
      J.col(0) = (obj.residual(inc + hstep, nu) - obj.residual(inc - hstep, nu)) /
                 (2.0 * hstep);
      J.col(1) = (obj.residual(inc, nu + hstep) - obj.residual(inc, nu - hstep)) /
                 (2.0 * hstep);
      const Vec2 grad = 2.0 * J.transpose() * r;
      if (grad.norm() < 1e-12) break;
      const Mat2 JtJ = J.transpose() * J;
      const Vec2 step = -JtJ.ldlt().solve(J.transpose() * r);
      double scale = 1.0;
      bool ok = false;
      for (int ls = 0; ls < 30; ++ls) {
        const double ti = std::max(1e-7, inc + scale * step[0]);
        const double tn = nu + scale * step[1];
        const double tf = obj.value(ti, tn);
        if (tf < fval) {
          inc = ti;
          nu = tn;
          fval = tf;
          ok = true;
          break;
        }
        scale *= 0.5;
      }
      if (!ok) break;
    }

    // failure when the solution sits on the search box edge
    const bool on_edge = std::abs(inc - (i0 - box_i)) < 1e-6 ||
                         std::abs(inc - (i0 + box_i)) < 1e-6 ||
                         std::abs(nu - (nu0 - box_nu)) < 1e-6 ||
                         std::abs(nu - (nu0 + box_nu)) < 1e-6;
    if (on_edge && attempt == 0) {
      box_i *= 2.0;
      box_nu *= 2.0;
      continue;
    }
    if (on_edge)
      throw CentroidFailure("centroid: no interior residual minimum");

    const orbits::CartesianState adjusted = obj.state_at(inc, nu);
    const RangePair rp = range_of(adjusted, attr);

    // materialize through the attributable so h(x*) = z exactly
    orbits::CartesianState star =
        obs::state_from_range(attr, rp.rho, rp.rho_rate);
    star.srp_coeff = pre_orbit.srp_coeff;

    CentroidResult out;
    out.state = orbits::cart_to_mee(star);
    out.rho_km = rp.rho;
    out.rho_rate_km_s = rp.rho_rate;
    out.delta_i_rad = inc - i0;
    out.delta_nu_rad = nu - nu0;
    out.residual = fval;
    return out;
  }
  throw CentroidFailure("centroid: unreachable");
}

XOptResult x_opt(const MeeState& pre_orbit, const Attributable& attr,
                 double tof_s, const AdmissibleRegion* box, double c1) {
  double rho_lo, rho_hi, rr_lo, rr_hi;
  if (box != nullptr) {
    rho_lo = box->lo[4];
    rho_hi = box->hi[4];
    rr_lo = box->lo[5];
    rr_hi = box->hi[5];
  } else {
    RangePair center{};
    try {
      const CentroidResult cr = centroid(pre_orbit, attr, tof_s);
      center = {cr.rho_km, cr.rho_rate_km_s};
    } catch (const CentroidFailure&) {
      const MeeState ballistic = orbits::kepler_propagate(pre_orbit, tof_s);
      center = range_of(orbits::mee_to_cart(ballistic), attr);
    }
    rho_lo = center.rho - 500.0;
    rho_hi = center.rho + 500.0;
    rr_lo = center.rho_rate - 0.5;
    rr_hi = center.rho_rate + 0.5;
  }
  rho_lo = std::max(rho_lo, 1.0);
  if (rho_hi - rho_lo < 2.0) rho_hi = rho_lo + 2.0;
  if (rr_hi - rr_lo < 2e-3) {
    rr_lo -= 1e-3;
    rr_hi += 1e-3;
  }

  const int n = 41;
  std::vector<double> p_grid(n * n);
  parallel_for(p_grid.size(), [&](std::size_t idx) {
    const int i = static_cast<int>(idx) / n;
    const int j = static_cast<int>(idx) % n;
    const double rho = rho_lo + (rho_hi - rho_lo) * i / (n - 1.0);
    const double rr = rr_lo + (rr_hi - rr_lo) * j / (n - 1.0);
    p_grid[idx] = control_distance_at(pre_orbit, attr, tof_s, rho, rr, c1);
  });
  std::size_t best_idx = 0;
  for (std::size_t idx = 1; idx < p_grid.size(); ++idx)
    if (p_grid[idx] < p_grid[best_idx]) best_idx = idx;
  const double rho0 =
      rho_lo + (rho_hi - rho_lo) * (best_idx / n) / (n - 1.0);
  const double rr0 = rr_lo + (rr_hi - rr_lo) * (best_idx % n) / (n - 1.0);

  const auto fn = [&](double rho, double rr) {
    return control_distance_at(pre_orbit, attr, tof_s, rho, rr, c1);
  };
  NmPoint nm = nelder_mead_2d(fn, rho0, rr0, (rho_hi - rho_lo) / (n - 1.0),
                              (rr_hi - rr_lo) / (n - 1.0), 300);
  // restart with a small simplex to polish past any stagnation
  nm = nelder_mead_2d(fn, nm.x, nm.y, 1e-4 * (rho_hi - rho_lo),
                      1e-4 * (rr_hi - rr_lo), 200);

  XOptResult out;
  out.rho_km = nm.x;
  out.rho_rate_km_s = nm.y;
  out.p_km_s = std::min(nm.f, p_grid[best_idx]);
  if (nm.f > p_grid[best_idx]) {
    out.rho_km = rho0;
    out.rho_rate_km_s = rr0;
  }
  orbits::CartesianState cart =
      obs::state_from_range(attr, out.rho_km, out.rho_rate_km_s);
  cart.srp_coeff = pre_orbit.srp_coeff;
  out.state = orbits::cart_to_mee(cart);
  return out;
}

AdmissibleRegion orthotope_bounds(const CentroidResult& centroid_result,
                                  const Attributable& attr,
                                  const MeeState& pre_orbit, double tof_s,
                                  const RegionThresholds& th, double c1) {
  th.validate();
  AdmissibleRegion region;
  region.rho_center_km = centroid_result.rho_km;
  region.rho_rate_center_km_s = centroid_result.rho_rate_km_s;
  region.centroid_state = centroid_result.state;
  region.pre_orbit = pre_orbit;
  region.tof_s = tof_s;
  region.p_centroid_km_s = control::control_distance(pre_orbit, centroid_result.state,
                                            tof_s, c1);
  region.p_adm_km_s = admissible_threshold(region.p_centroid_km_s, th);

  // observable dimensions: centroid value +- 3 sigma
  const Vec4 z = attr.z();
  for (int i = 0; i < 4; ++i) {
    const double s = 3.0 * std::sqrt(attr.covariance(i, i));
    region.lo[i] = z[i] - s;
    region.hi[i] = z[i] + s;
  }

  const double rho_c = centroid_result.rho_km;
  const double rr_c = centroid_result.rho_rate_km_s;
  const double p_adm = region.p_adm_km_s;

  // degenerate: the centroid itself is inadmissible
  if (region.p_centroid_km_s > p_adm) {
    region.lo[4] = region.hi[4] = rho_c;
    region.lo[5] = region.hi[5] = rr_c;
    region.capped = {true, true, true, true};
    return region;
  }

  // 4 axis searches: -rho, +rho, -rho_rate, +rho_rate
  std::array<double, 4> caps = {std::max(1.0, rho_c - kRhoSearchCap),
                                rho_c + kRhoSearchCap, rr_c - kRhoRateSearchCap,
                                rr_c + kRhoRateSearchCap};
  std::array<double, 4> bounds{};
  std::array<bool, 4> capped{};

  parallel_for(4, [&](std::size_t dir) {
    const bool is_rho = dir < 2;
    const double from = is_rho ? rho_c : rr_c;
    const double cap = caps[dir];
    const auto p_at = [&](double v) {
      return is_rho
                 ? control_distance_at(pre_orbit, attr, tof_s, v, rr_c, c1)
                 : control_distance_at(pre_orbit, attr, tof_s, rho_c, v, c1);
    };

    const int n_march = 64;
    double prev = from;
    double crossing_lo = from, crossing_hi = from;
    bool found = false;
    for (int i = 1; i <= n_march; ++i) {
      const double v = from + (cap - from) * i / static_cast<double>(n_march);
      if (p_at(v) > p_adm) {
        crossing_lo = prev;
        crossing_hi = v;
        found = true;
        break;
      }
      prev = v;
    }
    if (!found) {
      bounds[dir] = cap;
      capped[dir] = true;
      return;
    }
    // bisect the first crossing until P is within 1e-3 * P_adm
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (crossing_lo + crossing_hi);
      const double p = p_at(mid);
      if (std::abs(p - p_adm) <= 1e-3 * p_adm) {
        crossing_lo = crossing_hi = mid;
        break;
      }
      (p > p_adm ? crossing_hi : crossing_lo) = mid;
    }
    bounds[dir] = 0.5 * (crossing_lo + crossing_hi);
    capped[dir] = false;
  });

  region.lo[4] = bounds[0];
  region.hi[4] = bounds[1];
  region.lo[5] = bounds[2];
  region.hi[5] = bounds[3];
  region.capped = capped;

  for (int i = 0; i < 6; ++i)
    if (!(region.lo[i] <= region.hi[i]))
      throw std::runtime_error("orthotope_bounds: inverted bounds");
  return region;
}

bool contains(const AdmissibleRegion& region, const Vec4& attr_point,
              double rho_km, double rho_rate_km_s) {
  // alpha is an angle: compare on the box branch
  const double a_center = 0.5 * (region.lo[0] + region.hi[0]);
  const double a_half = 0.5 * (region.hi[0] - region.lo[0]);
  if (std::abs(c::wrap_pi(attr_point[0] - a_center)) > a_half) return false;
  for (int i = 1; i < 4; ++i)
    if (attr_point[i] < region.lo[i] || attr_point[i] > region.hi[i])
      return false;
  if (rho_km < region.lo[4] || rho_km > region.hi[4]) return false;
  if (rho_rate_km_s < region.lo[5] || rho_rate_km_s > region.hi[5]) return false;
  return true;
}

}  // namespace shf::region
