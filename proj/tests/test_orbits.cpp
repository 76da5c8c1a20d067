#include "shf/orbits.hpp"

#include <cmath>

#include "doctest.h"
#include "shf/constants.hpp"
#include "shf/rng.hpp"
#include "test_util.hpp"

using namespace shf;
using namespace shf::orbits;
namespace c = shf::constants;

TEST_SUITE_BEGIN("orbits");

TEST_CASE("cart_to_mee circular equatorial") {
  const double a = 20000.0;
  CartesianState s;
  s.position_km = Vec3(a, 0, 0);
  s.velocity_km_s = Vec3(0, std::sqrt(c::kMuEarth / a), 0);
  const MeeState m = cart_to_mee(s);
  CHECK(m.p == doctest::Approx(a).epsilon(1e-12));
  CHECK(std::abs(m.f) < 1e-14);
  CHECK(std::abs(m.g) < 1e-14);
  CHECK(std::abs(m.h) < 1e-14);
  CHECK(std::abs(m.k) < 1e-14);
  CHECK(std::abs(c::wrap_pi(m.L)) < 1e-14);
}

TEST_CASE("cart_to_mee GEO radius from period") {
  // a = (mu T^2 / 4 pi^2)^(1/3) with T the sidereal day
  const double a = std::cbrt(c::kMuEarth * c::kSiderealDay * c::kSiderealDay /
                             (4.0 * c::kPi * c::kPi));
  CHECK(a == doctest::Approx(42164.17).epsilon(1e-6));
  CartesianState s;
  s.position_km = Vec3(a, 0, 0);
  s.velocity_km_s = Vec3(0, std::sqrt(c::kMuEarth / a), 0);
  const MeeState m = cart_to_mee(s);
  CHECK(m.p == doctest::Approx(42164.17).epsilon(1e-6));
  CHECK(std::abs(m.f) < 1e-14);
  CHECK(std::abs(m.g) < 1e-14);
}

TEST_CASE("cart_to_mee rejects hyperbolic and retrograde input") {
  CartesianState s;
  s.position_km = Vec3(20000.0, 0, 0);
  s.velocity_km_s = Vec3(0, 2.0 * std::sqrt(c::kMuEarth / 20000.0), 0);
  CHECK_THROWS_AS((void)cart_to_mee(s), std::domain_error);

  s.velocity_km_s = Vec3(0, -std::sqrt(c::kMuEarth / 20000.0), 0);  // i = pi
  CHECK_THROWS_AS((void)cart_to_mee(s), std::domain_error);
}

TEST_CASE("mee_to_cart axis case and angle periodicity") {
  MeeState m;
  m.p = 15000.0;
  m.L = 0.0;
  const CartesianState s = mee_to_cart(m);
  CHECK((s.position_km - Vec3(15000.0, 0, 0)).norm() < 1e-9);
  CHECK((s.velocity_km_s - Vec3(0, std::sqrt(c::kMuEarth / 15000.0), 0)).norm() <
        1e-12);

  MeeState m2 = m;
  m2.L += c::kTwoPi;
  const CartesianState s2 = mee_to_cart(m2);
  CHECK((s2.position_km - s.position_km).norm() < 1e-8);
  CHECK((s2.velocity_km_s - s.velocity_km_s).norm() < 1e-12);
}

TEST_CASE("round trip cart<->mee on random elliptic states") {
  Rng rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const MeeState m = test::random_elliptic_mee(rng);
    const CartesianState s = mee_to_cart(m);
    const MeeState m2 = cart_to_mee(s);
    const CartesianState s2 = mee_to_cart(m2);
    const double pos_err =
        (s2.position_km - s.position_km).norm() / s.position_km.norm();
    const double vel_err =
        (s2.velocity_km_s - s.velocity_km_s).norm() / s.velocity_km_s.norm();
    REQUIRE(pos_err < 1e-9);
    REQUIRE(vel_err < 1e-9);
  }
}

TEST_CASE("kepler_propagate basics") {
  MeeState m;
  m.p = 42164.0;
  m.L = 0.3;

  SUBCASE("dt = 0 is the identity") {
    const MeeState out = kepler_propagate(m, 0.0);
    CHECK(out.L == m.L);
    CHECK(out.p == m.p);
  }

  SUBCASE("circular orbit advances 2 pi per period") {
    const double T = orbital_period(m);
    const MeeState out = kepler_propagate(m, T);
    CHECK(std::abs(out.L - m.L - c::kTwoPi) < 1e-10);
    CHECK(out.p == m.p);  // bitwise
    CHECK(out.f == m.f);
  }

  SUBCASE("monotone unwrapping") {
    double prev = m.L;
    for (int i = 1; i <= 40; ++i) {
      const MeeState out = kepler_propagate(m, i * 7000.0);
      CHECK(out.L > prev);
      prev = out.L;
    }
  }
}

TEST_CASE("kepler_propagate eccentric half period vs RK oracle") {
  ClassicalElements el;
  el.a = 26000.0;
  el.e = 0.1;
  el.i = 0.4;
  el.raan = 1.0;
  el.argp = -0.7;
  el.nu = 0.0;  // perigee
  const MeeState m = mee_from_classical(el, 0.0, 0.0);
  const double T = orbital_period(m);

  const MeeState prop = kepler_propagate(m, 0.5 * T);
  // true anomaly at apogee
  const ClassicalElements el2 = classical_from_mee(prop);
  CHECK(std::abs(c::wrap_pi(el2.nu - c::kPi)) < 1e-10);

  const CartesianState oracle =
      test::rk4_two_body(mee_to_cart(m), 0.5 * T, 200000);
  const MeeState oracle_mee = cart_to_mee(oracle);
  CHECK(std::abs(prop.L - (oracle_mee.L + c::kTwoPi *
                                              std::round((prop.L - oracle_mee.L) /
                                                         c::kTwoPi))) < 1e-8);
}

TEST_CASE("perturbed_propagate two-body degenerates to kepler") {
  Rng rng(7);
  const MeeState m = test::random_near_geo(rng);
  ForceModelConfig cfg;  // two-body
  const MeeState num = perturbed_propagate(m, 5000.0, cfg);
  const MeeState kep = kepler_propagate(m, 5000.0);
  CHECK(num.p == kep.p);
  CHECK(num.f == kep.f);
  CHECK(num.g == kep.g);
  CHECK(num.h == kep.h);
  CHECK(num.k == kep.k);
  CHECK(std::abs(num.L - kep.L) < 1e-9 * std::abs(kep.L) + 1e-12);
}

TEST_CASE("perturbed_propagate J2 secular RAAN drift") {
  ClassicalElements el;
  el.a = c::geostationary_radius();
  el.e = 0.001;
  el.i = 5.0 * c::kDegToRad;
  el.raan = 0.2;
  el.argp = 0.1;
  el.nu = 0.0;
  MeeState m = mee_from_classical(el, 0.0, 0.0);

  ForceModelConfig cfg;
  cfg.zonal_degree = 2;

  // sample at the same orbital phase so short-period terms cancel
  const double T = orbital_period(m);
  const int n_rev = 10;
  std::vector<double> raans;
  MeeState cur = m;
  raans.push_back(classical_from_mee(cur).raan);
  for (int i = 0; i < n_rev; ++i) {
    cur = perturbed_propagate(cur, T, cfg);
    raans.push_back(classical_from_mee(cur).raan);
  }
  // linear fit slope (rad per revolution)
  double sxy = 0.0, sxx = 0.0;
  const double xm = 0.5 * n_rev;
  double ym = 0.0;
  for (double r : raans) ym += r;
  ym /= raans.size();
  for (int i = 0; i <= n_rev; ++i) {
    sxy += (i - xm) * (raans[i] - ym);
    sxx += (i - xm) * (i - xm);
  }
  const double slope_per_sec = (sxy / sxx) / T;

  const double n = mean_motion(m);
  const double analytic = -1.5 * c::kJ2 * n *
                          std::pow(c::kEarthRadius / m.p, 2) * std::cos(el.i);
  CHECK(test::rel_err(slope_per_sec, analytic) < 0.01);
}

TEST_CASE("perturbed_propagate noise determinism") {
  Rng rng(99);
  const MeeState m = test::random_near_geo(rng);
  ForceModelConfig cfg;
  cfg.zonal_degree = 2;
  cfg.accel_psd_sqrt = 1e-9;
  const MeeState a = perturbed_propagate(m, 40000.0, cfg, 1234u);
  const MeeState b = perturbed_propagate(m, 40000.0, cfg, 1234u);
  CHECK(a.p == b.p);
  CHECK(a.f == b.f);
  CHECK(a.g == b.g);
  CHECK(a.h == b.h);
  CHECK(a.k == b.k);
  CHECK(a.L == b.L);

  const MeeState d = perturbed_propagate(m, 40000.0, cfg, 1235u);
  CHECK(d.L != a.L);

  // prefix-window reproducibility: half-span propagation matches the long one
  // restarted is not required, but the first half must use the same draws, so
  // propagating 20000 s twice with aligned windows equals propagating 40000 s
  // when the step divides both spans and noise windows are re-anchored; here
  // we only require seed determinism of the partial span.
  const MeeState e1 = perturbed_propagate(m, 20000.0, cfg, 1234u);
  const MeeState e2 = perturbed_propagate(m, 20000.0, cfg, 1234u);
  CHECK(e1.L == e2.L);
}

TEST_CASE("two-body propagation conserves energy and momentum") {
  Rng rng(31);
  ForceModelConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const MeeState m = test::random_elliptic_mee(rng, 0.5, 60.0);
    const CartesianState s0 = mee_to_cart(m);
    const double E0 = 0.5 * s0.velocity_km_s.squaredNorm() -
                      c::kMuEarth / s0.position_km.norm();
    const double H0 = s0.position_km.cross(s0.velocity_km_s).norm();
    const MeeState out = perturbed_propagate(m, 10.0 * orbital_period(m), cfg);
    const CartesianState s1 = mee_to_cart(out);
    const double E1 = 0.5 * s1.velocity_km_s.squaredNorm() -
                      c::kMuEarth / s1.position_km.norm();
    const double H1 = s1.position_km.cross(s1.velocity_km_s).norm();
    CHECK(test::rel_err(E1, E0) < 1e-10);
    CHECK(test::rel_err(H1, H0) < 1e-10);
  }
}

TEST_CASE("propagation is time reversible without noise") {
  Rng rng(77);
  ForceModelConfig cfg;
  cfg.zonal_degree = 4;
  cfg.third_bodies = {ThirdBody::Sun, ThirdBody::Moon};
  for (int trial = 0; trial < 3; ++trial) {
    const MeeState m = test::random_near_geo(rng);
    const MeeState fwd = perturbed_propagate(m, 86400.0, cfg);
    const MeeState back = perturbed_propagate(fwd, -86400.0, cfg);
    CHECK(test::rel_err(back.p, m.p) < 1e-8);
    CHECK(std::abs(back.f - m.f) < 1e-8);
    CHECK(std::abs(back.g - m.g) < 1e-8);
    CHECK(std::abs(back.h - m.h) < 1e-8);
    CHECK(std::abs(back.k - m.k) < 1e-8);
    CHECK(std::abs(back.L - m.L) < 1e-8);
  }
}

TEST_CASE("sensitivity_matrix structure") {
  MeeState m;
  m.p = 42164.0;
  m.L = 0.9;
  const Mat63 A = sensitivity_matrix(m);
  CHECK(A(0, 0) == 0.0);  // radial burn cannot change p

  // normal burn at the ascending node leaves p, f, g untouched
  MeeState incl;
  incl.p = 42164.0;
  incl.h = 0.02;
  incl.k = 0.015;
  incl.L = std::atan2(incl.k, incl.h);  // L = raan
  const Mat63 An = sensitivity_matrix(incl);
  CHECK(std::abs(An(0, 2)) < 1e-16);
  CHECK(std::abs(An(1, 2)) < 1e-16);
  CHECK(std::abs(An(2, 2)) < 1e-16);
  CHECK(An(3, 2) != 0.0);
  CHECK(An(4, 2) != 0.0);
}

TEST_CASE("sensitivity_matrix matches finite differences of impulses") {
  Rng rng(5150);
  const double step = 1e-7;  // km/s
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const MeeState m = test::random_elliptic_mee(rng, 0.7, 120.0);
    const CartesianState cart = mee_to_cart(m);
    const Mat63 A = sensitivity_matrix(m);
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 dv = Vec3::Zero();
      dv[axis] = step;
      const MeeState plus = cart_to_mee(apply_impulse_rtn(cart, dv));
      const MeeState minus = cart_to_mee(apply_impulse_rtn(cart, -dv));
      const Vec6 fd = (plus.elements() - minus.elements()) / (2.0 * step);
      for (int row = 0; row < 6; ++row) {
        const double an = A(row, axis);
        if (an == 0.0) continue;  // structural zeros
        // 1e-5 relative to the row scale; the floor covers finite-difference
        // rounding noise (~eps/step) on entries far below the row scale
        const double row_scale = A.row(row).cwiseAbs().maxCoeff();
        const double tol = std::max(1e-5 * row_scale, 5e-9);
        REQUIRE(std::abs(fd[row] - an) < tol);
        ++checked;
      }
    }
  }
  CHECK(checked >= 9000);
}

TEST_CASE("sensitivity tangential burn at GEO vs nonlinear application") {
  Rng rng(42);
  const MeeState m = test::random_near_geo(rng);
  const CartesianState cart = mee_to_cart(m);
  const double dv = 1e-6;
  const MeeState after = cart_to_mee(apply_impulse_rtn(cart, Vec3(0, dv, 0)));
  const Vec6 linear = sensitivity_matrix(m) * Vec3(0, dv, 0);
  const Vec6 nonlinear = after.elements() - m.elements();
  for (int i = 0; i < 6; ++i) {
    if (std::abs(linear[i]) < 1e-18) continue;
    CHECK(std::abs(nonlinear[i] - linear[i]) <
          1e-6 * std::abs(linear[i]) + 1e-18);
  }
}

TEST_CASE("geo_mean_longitude") {
  // epoch at which the Earth rotation angle is exactly zero
  const double t0 = (c::kTwoPi - c::kEraAtJ2000) / c::kEarthRotationRate;
  CHECK(std::abs(earth_rotation_angle(t0)) < 1e-9);

  const double a = c::geostationary_radius();
  CartesianState s;
  s.position_km = Vec3(a, 0, 0);  // above Greenwich when ERA = 0
  s.velocity_km_s = Vec3(0, std::sqrt(c::kMuEarth / a), 0);
  s.epoch_s = t0;
  const MeeState m = cart_to_mee(s);
  CHECK(std::abs(geo_mean_longitude(m)) < 1e-9);

  // one sidereal day later the same inertial state maps to the same longitude
  MeeState m2 = m;
  m2.epoch_s = t0 + c::kSiderealDay;
  CHECK(std::abs(geo_mean_longitude(m2) - geo_mean_longitude(m)) < 1e-6);
}

TEST_CASE("shadow and illumination helpers") {
  const Vec3 sun(c::kAstronomicalUnit, 0, 0);
  CHECK(in_cylindrical_shadow(Vec3(-42164.0, 0, 0), sun));
  CHECK(!in_cylindrical_shadow(Vec3(42164.0, 0, 0), sun));
  CHECK(!in_cylindrical_shadow(Vec3(-42164.0, 2.0 * c::kEarthRadius, 0), sun));
  CHECK(illumination_fraction(Vec3(42164.0, 0, 0), sun) == doctest::Approx(1.0));
  CHECK(illumination_fraction(Vec3(-8000.0, 0, 0), sun) == doctest::Approx(0.0));
  // grazing geometry is partially lit
  const double frac =
      illumination_fraction(Vec3(-42164.0, c::kEarthRadius, 0), sun);
  CHECK(frac > 0.0);
  CHECK(frac < 1.0);
}

TEST_SUITE_END();
