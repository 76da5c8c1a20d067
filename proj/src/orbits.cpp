#include "shf/orbits.hpp"

#include <algorithm>
#include <cmath>

#include "shf/constants.hpp"
#include "shf/rng.hpp"

namespace shf::orbits {

namespace c = shf::constants;

void MeeState::validate() const {
  if (!(p > 0.0)) throw std::domain_error("MeeState: p must be positive");
  if (!(f * f + g * g < 1.0))
    throw std::domain_error("MeeState: orbit must be elliptic (f^2+g^2 < 1)");
  if (!std::isfinite(h) || !std::isfinite(k) || !std::isfinite(L))
    throw std::domain_error("MeeState: non-finite element");
  if (srp_coeff < 0.0) throw std::domain_error("MeeState: B must be >= 0");
}

void ForceModelConfig::validate() const {
  if (zonal_degree != 0 && (zonal_degree < 2 || zonal_degree > 6))
    throw std::domain_error("ForceModelConfig: zonal_degree in {0,2..6}");
  if (accel_psd_sqrt < 0.0 || noise_step_s <= 0.0)
    throw std::domain_error("ForceModelConfig: bad noise description");
}

// ---------------------------------------------------------------------------
// Element conversions
// ---------------------------------------------------------------------------

MeeState cart_to_mee(const CartesianState& state) {
  const Vec3& r = state.position_km;
  const Vec3& v = state.velocity_km_s;
  const double rmag = r.norm();
  if (rmag <= 0.0) throw std::domain_error("cart_to_mee: zero position");
  const Vec3 hv = r.cross(v);
  const double hmag = hv.norm();
  if (hmag <= 0.0) throw std::domain_error("cart_to_mee: rectilinear orbit");

  const double p = hmag * hmag / c::kMuEarth;
  const Vec3 ev = v.cross(hv) / c::kMuEarth - r / rmag;
  const double ecc = ev.norm();
  if (ecc >= 1.0)
    throw std::domain_error("cart_to_mee: orbit not elliptic (e >= 1)");

  const Vec3 w = hv / hmag;
  const double denom = 1.0 + w.z();
  if (denom < 1e-9)
    throw std::domain_error("cart_to_mee: retrograde singularity (i = pi)");
  const double k = w.x() / denom;
  const double h = -w.y() / denom;

  const double s2 = 1.0 + h * h + k * k;
  const Vec3 fhat((1.0 - k * k + h * h) / s2, 2.0 * k * h / s2, -2.0 * k / s2);
  const Vec3 ghat(2.0 * k * h / s2, (1.0 + k * k - h * h) / s2, 2.0 * h / s2);

  const double f = ev.dot(fhat);
  const double g = ev.dot(ghat);
  const Vec3 rhat = r / rmag;
  const double L = std::atan2(rhat.dot(ghat), rhat.dot(fhat));

  MeeState out;
  out.p = p;
  out.f = f;
  out.g = g;
  out.h = h;
  out.k = k;
  out.L = L;
  out.srp_coeff = state.srp_coeff;
  out.epoch_s = state.epoch_s;
  out.validate();
  return out;
}

CartesianState mee_to_cart(const MeeState& state) {
  state.validate();
  const double p = state.p, f = state.f, g = state.g, h = state.h, k = state.k;
  const double L = state.L;
  const double cosL = std::cos(L), sinL = std::sin(L);
  const double alpha2 = h * h - k * k;
  const double s2 = 1.0 + h * h + k * k;
  const double w = 1.0 + f * cosL + g * sinL;
  const double r = p / w;
  const double sqmup = std::sqrt(c::kMuEarth / p);

  CartesianState out;
  out.position_km =
      Vec3(r / s2 * (cosL + alpha2 * cosL + 2.0 * h * k * sinL),
           r / s2 * (sinL - alpha2 * sinL + 2.0 * h * k * cosL),
           2.0 * r / s2 * (h * sinL - k * cosL));
  out.velocity_km_s =
      Vec3(-sqmup / s2 *
               (sinL + alpha2 * sinL - 2.0 * h * k * cosL + g - 2.0 * f * h * k +
                alpha2 * g),
           -sqmup / s2 *
               (-cosL + alpha2 * cosL + 2.0 * h * k * sinL - f + 2.0 * g * h * k +
                alpha2 * f),
           2.0 * sqmup / s2 * (h * cosL + k * sinL + f * h + g * k));
  out.srp_coeff = state.srp_coeff;
  out.epoch_s = state.epoch_s;
  return out;
}

ClassicalElements classical_from_mee(const MeeState& state) {
  ClassicalElements el;
  el.e = state.eccentricity();
  el.a = state.semi_major_axis();
  el.i = 2.0 * std::atan(std::sqrt(state.h * state.h + state.k * state.k));
  el.raan = std::atan2(state.k, state.h);
  const double lon_peri = std::atan2(state.g, state.f);
  el.argp = c::wrap_pi(lon_peri - el.raan);
  el.nu = state.L - lon_peri;  // unwrapped
  return el;
}

MeeState mee_from_classical(const ClassicalElements& el, double srp_coeff,
                            double epoch_s) {
  MeeState out;
  out.p = el.a * (1.0 - el.e * el.e);
  const double lon_peri = el.raan + el.argp;
  out.f = el.e * std::cos(lon_peri);
  out.g = el.e * std::sin(lon_peri);
  const double t = std::tan(0.5 * el.i);
  out.h = t * std::cos(el.raan);
  out.k = t * std::sin(el.raan);
  out.L = lon_peri + el.nu;
  out.srp_coeff = srp_coeff;
  out.epoch_s = epoch_s;
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Kepler propagation
// ---------------------------------------------------------------------------

namespace {

double kepler_solve(double mean_anomaly, double e) {
  // mean_anomaly assumed in (-pi, pi]
  double E = mean_anomaly + e * std::sin(mean_anomaly);
  for (int i = 0; i < 60; ++i) {
    const double fval = E - e * std::sin(E) - mean_anomaly;
    const double fp = 1.0 - e * std::cos(E);
    const double dE = fval / fp;
    E -= dE;
    if (std::abs(dE) < 1e-15) break;
  }
  return E;
}

double ecc_from_true(double nu, double e) {
  return 2.0 * std::atan2(std::sqrt(1.0 - e) * std::sin(0.5 * nu),
                          std::sqrt(1.0 + e) * std::cos(0.5 * nu));
}

double true_from_ecc(double E, double e) {
  return 2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(0.5 * E),
                          std::sqrt(1.0 - e) * std::cos(0.5 * E));
}

// Unwrapped mean anomaly matching the revolution count of the unwrapped
// true anomaly `nu`.
double mean_from_true_unwrapped(double nu, double e) {
  const double nu_w = c::wrap_pi(nu);
  const double rev = std::round((nu - nu_w) / c::kTwoPi);
  const double E = ecc_from_true(nu_w, e);
  const double M = E - e * std::sin(E);
  return M + c::kTwoPi * rev;
}

}  // namespace

double mean_motion(const MeeState& state) {
  const double a = state.semi_major_axis();
  return std::sqrt(c::kMuEarth / (a * a * a));
}

double orbital_period(const MeeState& state) {
  return c::kTwoPi / mean_motion(state);
}

MeeState kepler_propagate(const MeeState& state, double dt_s) {
  state.validate();
  if (!std::isfinite(dt_s)) throw std::domain_error("kepler_propagate: dt");
  const double e = state.eccentricity();
  const double n = mean_motion(state);
  const double lon_peri = std::atan2(state.g, state.f);

  const double nu0 = state.L - lon_peri;
  const double M0 = mean_from_true_unwrapped(nu0, e);
  const double M1 = M0 + n * dt_s;
  const double M1_w = c::wrap_pi(M1);
  const double rev = std::round((M1 - M1_w) / c::kTwoPi);
  const double E1 = kepler_solve(M1_w, e);
  const double nu1 = true_from_ecc(E1, e) + c::kTwoPi * rev;

  MeeState out = state;
  out.L = lon_peri + nu1;
  out.epoch_s = state.epoch_s + dt_s;
  return out;
}

double time_between_longitudes(const MeeState& state, double L_from,
                               double L_to) {
  const double e = state.eccentricity();
  const double lon_peri = std::atan2(state.g, state.f);
  const double m_from = mean_from_true_unwrapped(L_from - lon_peri, e);
  const double m_to = mean_from_true_unwrapped(L_to - lon_peri, e);
  return (m_to - m_from) / mean_motion(state);
}

// ---------------------------------------------------------------------------
// Gauss variational equations
// ---------------------------------------------------------------------------

Mat63 sensitivity_matrix(const MeeState& state) {
  state.validate();
  const double p = state.p, f = state.f, g = state.g, h = state.h, k = state.k;
  const double cosL = std::cos(state.L), sinL = std::sin(state.L);
  const double w = 1.0 + f * cosL + g * sinL;
  const double s2 = 1.0 + h * h + k * k;
  const double root = std::sqrt(p / c::kMuEarth);
  const double hk = h * sinL - k * cosL;

  Mat63 A = Mat63::Zero();
  A(0, 1) = 2.0 * p / w * root;
  A(1, 0) = root * sinL;
  A(1, 1) = root * ((w + 1.0) * cosL + f) / w;
  A(1, 2) = -root * g * hk / w;
  A(2, 0) = -root * cosL;
  A(2, 1) = root * ((w + 1.0) * sinL + g) / w;
  A(2, 2) = root * f * hk / w;
  A(3, 2) = root * s2 * cosL / (2.0 * w);
  A(4, 2) = root * s2 * sinL / (2.0 * w);
  A(5, 2) = root * hk / w;
  return A;
}

// ---------------------------------------------------------------------------
// Frames, ephemerides, perturbations
// ---------------------------------------------------------------------------

double earth_rotation_angle(double epoch_s) {
  return c::wrap_two_pi(c::kEraAtJ2000 + c::kEarthRotationRate * epoch_s);
}

Vec3 sun_position_eci(double epoch_s) {
  // Low-precision analytic solar position (sub-degree accuracy).
  const double d = epoch_s / c::kSecondsPerDay;
  const double mean_lon = c::kDegToRad * (280.460 + 0.9856474 * d);
  const double mean_anom = c::kDegToRad * (357.528 + 0.9856003 * d);
  const double ecl_lon = mean_lon + c::kDegToRad * (1.915 * std::sin(mean_anom) +
                                                    0.020 * std::sin(2.0 * mean_anom));
  const double dist_au =
      1.00014 - 0.01671 * std::cos(mean_anom) - 0.00014 * std::cos(2.0 * mean_anom);
  const double r = dist_au * c::kAstronomicalUnit;
  const double ce = std::cos(c::kObliquity), se = std::sin(c::kObliquity);
  return Vec3(r * std::cos(ecl_lon), r * ce * std::sin(ecl_lon),
              r * se * std::sin(ecl_lon));
}

Vec3 moon_position_eci(double epoch_s) {
  // Truncated lunar series; adequate for desk-scale lunisolar perturbations.
  const double d = epoch_s / c::kSecondsPerDay;
  const double L0 = c::kDegToRad * (218.31617 + 13.17639648 * d);
  const double l = c::kDegToRad * (134.96292 + 13.06499295 * d);
  const double ls = c::kDegToRad * (357.52543 + 0.98560026 * d);
  const double F = c::kDegToRad * (93.27283 + 13.22935027 * d);
  const double D = c::kDegToRad * (297.85027 + 12.19074911 * d);

  const double lon =
      L0 + c::kDegToRad * (6.28875 * std::sin(l) + 1.27401 * std::sin(2.0 * D - l) +
                           0.65831 * std::sin(2.0 * D) + 0.21362 * std::sin(2.0 * l) -
                           0.18512 * std::sin(ls) - 0.11433 * std::sin(2.0 * F));
  const double lat =
      c::kDegToRad * (5.12819 * std::sin(F) + 0.27787 * std::sin(l + F) +
                      0.28060 * std::sin(l - F) - 0.17324 * std::sin(F - 2.0 * D));
  const double r = 385000.56 - 20905.36 * std::cos(l) -
                   3699.11 * std::cos(2.0 * D - l) - 2955.97 * std::cos(2.0 * D);

  const double cb = std::cos(lat), sb = std::sin(lat);
  const Vec3 ecl(r * cb * std::cos(lon), r * cb * std::sin(lon), r * sb);
  const double ce = std::cos(c::kObliquity), se = std::sin(c::kObliquity);
  return Vec3(ecl.x(), ce * ecl.y() - se * ecl.z(), se * ecl.y() + ce * ecl.z());
}

Mat3 rtn_frame(const Vec3& r, const Vec3& v) {
  const Vec3 rhat = r.normalized();
  const Vec3 nhat = r.cross(v).normalized();
  const Vec3 that = nhat.cross(rhat);
  Mat3 m;
  m.col(0) = rhat;
  m.col(1) = that;
  m.col(2) = nhat;
  return m;
}

CartesianState apply_impulse_rtn(const CartesianState& state, const Vec3& dv_rtn) {
  CartesianState out = state;
  out.velocity_km_s += rtn_frame(state.position_km, state.velocity_km_s) * dv_rtn;
  return out;
}

double illumination_fraction(const Vec3& pos_km, const Vec3& sun_km) {
  const Vec3 to_sun = sun_km - pos_km;
  const double rs = to_sun.norm();
  const double r = pos_km.norm();
  const double a = std::asin(std::min(1.0, c::kSunRadius / rs));
  const double b = std::asin(std::min(1.0, c::kEarthRadius / r));
  const double cgam =
      std::clamp((-pos_km).dot(to_sun) / (r * rs), -1.0, 1.0);
  const double cs = std::acos(cgam);
  if (cs >= a + b) return 1.0;
  if (cs <= b - a) return 0.0;
  if (cs <= a - b) return 1.0 - (b * b) / (a * a);
  // circle-circle overlap of the apparent disks
  const double x = (cs * cs + a * a - b * b) / (2.0 * cs);
  const double y = std::sqrt(std::max(0.0, a * a - x * x));
  const double area = a * a * std::acos(std::clamp(x / a, -1.0, 1.0)) +
                      b * b * std::acos(std::clamp((cs - x) / b, -1.0, 1.0)) -
                      cs * y;
  return std::clamp(1.0 - area / (c::kPi * a * a), 0.0, 1.0);
}

bool in_cylindrical_shadow(const Vec3& pos_km, const Vec3& sun_km) {
  const Vec3 shat = sun_km.normalized();
  const double along = pos_km.dot(shat);
  if (along >= 0.0) return false;
  const Vec3 perp = pos_km - along * shat;
  return perp.norm() < c::kEarthRadius;
}

namespace {

double legendre_p(int l, double u, double& dp) {
  // returns P_l(u), writes dP_l/du
  double p0 = 1.0, p1 = u;
  double d0 = 0.0, d1 = 1.0;
  if (l == 0) {
    dp = 0.0;
    return 1.0;
  }
  for (int n = 2; n <= l; ++n) {
    const double p2 = ((2.0 * n - 1.0) * u * p1 - (n - 1.0) * p0) / n;
    const double d2 = d0 + (2.0 * n - 1.0) * p1;
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  dp = d1;
  return p1;
}

Vec3 zonal_acceleration(const Vec3& r, int max_degree) {
  if (max_degree < 2) return Vec3::Zero();
  static const double J[7] = {0.0, 0.0, c::kJ2, c::kJ3, c::kJ4, c::kJ5, c::kJ6};
  const double rmag = r.norm();
  const double u = r.z() / rmag;
  const Vec3 rhat = r / rmag;
  const Vec3 zhat = Vec3::UnitZ();
  Vec3 acc = Vec3::Zero();
  double re_over_r_pow = 1.0;
  for (int l = 2; l <= max_degree; ++l) {
    re_over_r_pow = std::pow(c::kEarthRadius / rmag, l);
    double dp;
    const double pl = legendre_p(l, u, dp);
    const double common = c::kMuEarth * J[l] * re_over_r_pow / (rmag * rmag);
    acc += common * (((l + 1.0) * pl + u * dp) * rhat - dp * zhat);
  }
  return acc;
}

Vec3 third_body_acceleration(const Vec3& r, const Vec3& body_pos, double mu_body) {
  const Vec3 d = body_pos - r;
  const double dn = d.norm();
  const double bn = body_pos.norm();
  return mu_body * (d / (dn * dn * dn) - body_pos / (bn * bn * bn));
}

Vec3 srp_acceleration(const Vec3& r, const Vec3& sun, double srp_coeff,
                      EclipseModel eclipse) {
  if (srp_coeff <= 0.0) return Vec3::Zero();
  const Vec3 from_sun = r - sun;
  const double d = from_sun.norm();
  double nu = 1.0;
  if (eclipse == EclipseModel::Conical) nu = illumination_fraction(r, sun);
  if (nu <= 0.0) return Vec3::Zero();
  const double au_sq = c::kAstronomicalUnit / d;
  const double accel =
      c::kSrpPressure * srp_coeff * nu * au_sq * au_sq * 1e-3;  // km/s^2
  return accel * from_sun / d;
}

struct MeeDynamics {
  ForceModelConfig cfg;
  double srp_coeff = 0.0;
  double epoch0 = 0.0;
  Vec3 extra_rtn_accel = Vec3::Zero();  // constant within one noise window

  Vec6 operator()(double t_rel, const Vec6& y) const {
    MeeState s;
    s.p = y[0];
    s.f = y[1];
    s.g = y[2];
    s.h = y[3];
    s.k = y[4];
    s.L = y[5];
    s.srp_coeff = srp_coeff;
    s.epoch_s = epoch0 + t_rel;
    const CartesianState cart = mee_to_cart(s);
    if (cart.position_km.norm() <= c::kEarthRadius)
      throw PropagationError("propagation below Earth surface", s.epoch_s);

    Vec3 acc = zonal_acceleration(cart.position_km, cfg.zonal_degree);
    const bool needs_sun = cfg.third_bodies.count(ThirdBody::Sun) > 0 ||
                           cfg.srp_enabled;
    Vec3 sun = Vec3::Zero();
    if (needs_sun) sun = sun_position_eci(s.epoch_s);
    if (cfg.third_bodies.count(ThirdBody::Sun))
      acc += third_body_acceleration(cart.position_km, sun, c::kMuSun);
    if (cfg.third_bodies.count(ThirdBody::Moon))
      acc += third_body_acceleration(cart.position_km,
                                     moon_position_eci(s.epoch_s), c::kMuMoon);
    if (cfg.srp_enabled)
      acc += srp_acceleration(cart.position_km, sun, srp_coeff, cfg.eclipse);

    const Mat3 rtn = rtn_frame(cart.position_km, cart.velocity_km_s);
    const Vec3 acc_rtn = rtn.transpose() * acc + extra_rtn_accel;

    const Mat63 A = sensitivity_matrix(s);
    Vec6 dydt = A * acc_rtn;
    const double w = 1.0 + s.f * std::cos(s.L) + s.g * std::sin(s.L);
    dydt[5] += std::sqrt(c::kMuEarth * s.p) * (w / s.p) * (w / s.p);
    return dydt;
  }
};

// Dormand-Prince 5(4) with standard coefficients and elementwise
// atol + rtol*|y| error control.
template <class Rhs>
Vec6 integrate_dp54(const Rhs& rhs, Vec6 y, double t0, double t1, double rtol,
                    double atol) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  if (span == 0.0) return y;
  const double dir = span > 0.0 ? 1.0 : -1.0;
  double t = t0;
  double hstep = dir * std::min(std::abs(span), 600.0);
  Vec6 k1 = rhs(t, y);
  int rejected_in_a_row = 0;

  while (dir * (t1 - t) > 0.0) {
    if (std::abs(hstep) > std::abs(t1 - t)) hstep = t1 - t;
    if (std::abs(hstep) < 1e-9 * std::max(1.0, std::abs(t)))
      throw PropagationError("integrator step underflow", t);

    const Vec6 k2 = rhs(t + c2 * hstep, y + hstep * (a21 * k1));
    const Vec6 k3 = rhs(t + c3 * hstep, y + hstep * (a31 * k1 + a32 * k2));
    const Vec6 k4 = rhs(t + c4 * hstep, y + hstep * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec6 k5 = rhs(t + c5 * hstep,
                        y + hstep * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec6 k6 =
        rhs(t + hstep,
            y + hstep * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec6 ynew =
        y + hstep * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec6 k7 = rhs(t + hstep, ynew);
    const Vec6 err_vec =
        hstep * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err = std::max(err, std::abs(err_vec[i]) / sc);
    }

    if (err <= 1.0) {
      t += hstep;
      y = ynew;
      k1 = k7;  // FSAL
      rejected_in_a_row = 0;
      const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      hstep *= std::clamp(grow, 0.2, 5.0);
    } else {
      ++rejected_in_a_row;
      if (rejected_in_a_row > 60)
        throw PropagationError("integrator cannot satisfy tolerance", t);
      hstep *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
    }
  }
  return y;
}

}  // namespace

MeeState perturbed_propagate(const MeeState& state, double dt_s,
                             const ForceModelConfig& cfg,
                             std::optional<std::uint64_t> noise_seed) {
  state.validate();
  cfg.validate();
  if (!std::isfinite(dt_s)) throw std::domain_error("perturbed_propagate: dt");
  const bool noisy = noise_seed.has_value() && cfg.accel_psd_sqrt > 0.0;
  if (dt_s < 0.0 && noisy)
    throw std::domain_error("perturbed_propagate: negative dt with noise");
  if (dt_s == 0.0) return state;

  MeeDynamics dyn;
  dyn.cfg = cfg;
  dyn.srp_coeff = state.srp_coeff;
  dyn.epoch0 = state.epoch_s;

  Vec6 y = state.elements();
  if (!noisy) {
    y = integrate_dp54(dyn, y, 0.0, dt_s, 1e-10, 1e-12);
  } else {
    // Noise windows are nominal [i*step, (i+1)*step) from the start epoch;
    // the draw for window i depends only on (seed, i), so propagating part
    // of a window reproduces the prefix of the full realization.
    const double sigma = cfg.accel_psd_sqrt / std::sqrt(cfg.noise_step_s);
    double t = 0.0;
    std::uint64_t window = 0;
    while (t < dt_s) {
      const double t_next = std::min(dt_s, (window + 1) * cfg.noise_step_s);
      Rng rng = Rng::derive(*noise_seed, 0x6e6f6973ULL, window);
      dyn.extra_rtn_accel = sigma * rng.normal3();
      y = integrate_dp54(dyn, y, t, t_next, 1e-10, 1e-12);
      t = t_next;
      ++window;
    }
  }

  MeeState out = state;
  out.p = y[0];
  out.f = y[1];
  out.g = y[2];
  out.h = y[3];
  out.k = y[4];
  out.L = y[5];
  out.epoch_s = state.epoch_s + dt_s;
  return out;
}

double geo_mean_longitude(const MeeState& state) {
  const CartesianState cart = mee_to_cart(state);
  const double inertial_lon =
      std::atan2(cart.position_km.y(), cart.position_km.x());
  return c::wrap_pi(inertial_lon - earth_rotation_angle(state.epoch_s));
}

}  // namespace shf::orbits
