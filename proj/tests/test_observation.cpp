#include "shf/observation.hpp"

#include <cmath>

#include "doctest.h"
#include "shf/constants.hpp"
#include "shf/rng.hpp"
#include "shf/stats.hpp"
#include "test_util.hpp"

using namespace shf;
using namespace shf::obs;
namespace c = shf::constants;

namespace {

SensorSite test_site() {
  SensorSite s;
  s.name = "tenerife";
  s.latitude_rad = 28.3 * c::kDegToRad;
  s.longitude_rad = -16.5 * c::kDegToRad;
  s.altitude_km = 2.39;
  s.elevation_mask_rad = 20.0 * c::kDegToRad;
  s.noise_sigma_rad = c::kArcsecToRad;
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("observation");

TEST_CASE("line_of_sight basics") {
  Attributable a;
  a.site = test_site();
  SUBCASE("x axis") {
    const auto [w, wdot] = line_of_sight(a);
    CHECK((w - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK(wdot.norm() < 1e-15);
  }
  SUBCASE("rate substitution") {
    a.alpha = 0.5 * c::kPi;
    a.alpha_rate = 1e-4;
    const auto [w, wdot] = line_of_sight(a);
    CHECK((w - Vec3(0, 1, 0)).norm() < 1e-15);
    CHECK((wdot - Vec3(-1e-4, 0, 0)).norm() < 1e-18);
  }
}

TEST_CASE("line_of_sight rate matches finite difference") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Attributable a;
    a.site = test_site();
    a.alpha = rng.uniform(-c::kPi, c::kPi);
    a.delta = rng.uniform(-1.4, 1.4);
    a.alpha_rate = rng.uniform(-1e-3, 1e-3);
    a.delta_rate = rng.uniform(-1e-3, 1e-3);
    const auto [w, wdot] = line_of_sight(a);
    const double dt = 1e-3;
    Attributable ap = a, am = a;
    ap.alpha += 0.5 * dt * a.alpha_rate;
    ap.delta += 0.5 * dt * a.delta_rate;
    am.alpha -= 0.5 * dt * a.alpha_rate;
    am.delta -= 0.5 * dt * a.delta_rate;
    const Vec3 fd = (line_of_sight(ap).first - line_of_sight(am).first) / dt;
    REQUIRE((fd - wdot).norm() < 1e-9);
    REQUIRE(std::abs(w.norm() - 1.0) < 1e-15);
    REQUIRE(std::abs(w.dot(wdot)) < 1e-12);
  }
}

TEST_CASE("measure of a zenith object with matched velocity") {
  const SensorSite site = test_site();
  const double epoch = 1000.0;
  Vec3 rs, vs;
  site_state_eci(site, epoch, rs, vs);
  const Vec3 up = site_zenith_eci(site, epoch);
  orbits::CartesianState s;
  s.position_km = rs + 1000.0 * up;
  s.velocity_km_s = vs;  // zero relative velocity
  s.epoch_s = epoch;
  const Attributable a = measure(s, site, epoch);
  const auto [w, wdot] = line_of_sight(a);
  CHECK((w - up).norm() < 1e-12);
  // relative velocity is zero, so both apparent rates collapse
  CHECK(std::abs(a.alpha_rate) < 1e-15);
  CHECK(std::abs(a.delta_rate) < 1e-15);
  CHECK(wdot.norm() < 1e-15);
}

TEST_CASE("measure at the site position is degenerate") {
  const SensorSite site = test_site();
  Vec3 rs, vs;
  site_state_eci(site, 0.0, rs, vs);
  orbits::CartesianState s;
  s.position_km = rs;
  s.velocity_km_s = vs;
  CHECK_THROWS_AS((void)measure(s, site, 0.0), std::domain_error);
}

TEST_CASE("measure / state_from_range round trip") {
  Rng rng(17);
  const SensorSite site = test_site();
  for (int trial = 0; trial < 1000; ++trial) {
    const orbits::MeeState m = test::random_near_geo(rng);
    orbits::CartesianState s = orbits::mee_to_cart(m);
    s.epoch_s = rng.uniform(0.0, 1e7);
    const Attributable a = measure(s, site, s.epoch_s);
    Vec3 rs, vs;
    site_state_eci(site, s.epoch_s, rs, vs);
    const Vec3 d = s.position_km - rs;
    const double rho = d.norm();
    const double rho_rate = d.normalized().dot(s.velocity_km_s - vs);
    const orbits::CartesianState back = state_from_range(a, rho, rho_rate);
    REQUIRE((back.position_km - s.position_km).norm() <
            1e-9 * s.position_km.norm());
    REQUIRE((back.velocity_km_s - s.velocity_km_s).norm() <
            1e-9 * s.velocity_km_s.norm());
  }
}

TEST_CASE("two sites see the same object with opposite parallax") {
  SensorSite west = test_site();
  west.longitude_rad = -30.0 * c::kDegToRad;
  SensorSite east = test_site();
  east.longitude_rad = 30.0 * c::kDegToRad;
  west.latitude_rad = east.latitude_rad = 0.0;

  // epoch with zero Earth rotation angle: ECEF = ECI
  const double epoch = (c::kTwoPi - c::kEraAtJ2000) / c::kEarthRotationRate;
  orbits::CartesianState s;
  s.position_km = Vec3(c::geostationary_radius(), 0, 0);
  s.velocity_km_s = Vec3(0, 3.0747, 0);
  const Attributable from_west = measure(s, west, epoch);
  const Attributable from_east = measure(s, east, epoch);
  CHECK(from_west.alpha > 0.0);
  CHECK(from_east.alpha < 0.0);
  CHECK(from_west.alpha > from_east.alpha);
}

TEST_CASE("state_from_range direct formulas") {
  Attributable a;
  a.site = test_site();
  a.epoch_s = 5000.0;
  a.alpha = 0.3;
  a.delta = -0.1;
  Vec3 rs, vs;
  site_state_eci(a.site, a.epoch_s, rs, vs);
  const auto [w, wdot] = line_of_sight(a);

  const orbits::CartesianState s = state_from_range(a, 40000.0, 0.0);
  CHECK((s.position_km - (rs + 40000.0 * w)).norm() < 1e-12);

  // zero rates: wdot = 0 and rho_rate = 0 leave only the site velocity
  CHECK(wdot.norm() == 0.0);
  CHECK((s.velocity_km_s - vs).norm() < 1e-15);

  CHECK_THROWS_AS((void)state_from_range(a, -5.0, 0.0), std::domain_error);
}

TEST_CASE("attributable_from_track recovers a linear signal exactly") {
  Track t;
  t.site = test_site();
  const double a0 = 0.4, a1 = 3e-5, d0 = -0.2, d1 = -1e-5;
  for (int i = 0; i < 20; ++i) {
    const double tt = 100.0 + 3.0 * i;
    t.points.push_back({tt, a0 + a1 * tt, d0 + d1 * tt});
  }
  const Attributable a = attributable_from_track(t);
  const double tm = a.epoch_s;
  CHECK(a.alpha == doctest::Approx(a0 + a1 * tm).epsilon(1e-14));
  CHECK(a.delta == doctest::Approx(d0 + d1 * tm).epsilon(1e-14));
  CHECK(a.alpha_rate == doctest::Approx(a1).epsilon(1e-12));
  CHECK(a.delta_rate == doctest::Approx(d1).epsilon(1e-12));

  // covariance scales with sigma^2
  Track t2 = t;
  t2.site.noise_sigma_rad *= 3.0;
  const Attributable a2 = attributable_from_track(t2);
  CHECK(a2.covariance(0, 0) == doctest::Approx(9.0 * a.covariance(0, 0)));
  CHECK(a2.covariance(2, 2) == doctest::Approx(9.0 * a.covariance(2, 2)));

  Track bad;
  bad.site = t.site;
  bad.points = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  CHECK_THROWS_AS((void)attributable_from_track(bad), std::invalid_argument);
}

TEST_CASE("attributable rate variance follows the OLS formula") {
  Track t;
  t.site = test_site();
  const int n = 60;
  const double span = 360.0;
  for (int i = 0; i < n; ++i)
    t.points.push_back({i * span / (n - 1), 0.0, 0.0});
  const Attributable a = attributable_from_track(t);
  const double sigma = t.site.noise_sigma_rad;
  const double approx = sigma * std::sqrt(12.0 / (n * span * span));
  CHECK(test::rel_err(std::sqrt(a.covariance(2, 2)), approx) < 0.05);

  // doubling the duration at fixed n divides the rate variance by 4
  Track t2;
  t2.site = t.site;
  for (int i = 0; i < n; ++i)
    t2.points.push_back({i * 2.0 * span / (n - 1), 0.0, 0.0});
  const Attributable a2 = attributable_from_track(t2);
  CHECK(test::rel_err(a2.covariance(2, 2), a.covariance(2, 2) / 4.0) < 0.05);
}

TEST_CASE("noisy attributable residuals are chi-square(4) consistent") {
  Rng rng(2718);
  const SensorSite site = test_site();
  const double a0 = 0.4, a1 = 2e-5, d0 = -0.2, d1 = -1e-5;
  std::vector<double> d2;
  for (int rep = 0; rep < 1000; ++rep) {
    Track t;
    t.site = site;
    for (int i = 0; i < 30; ++i) {
      const double tt = 10.0 * i;
      t.points.push_back({tt, a0 + a1 * tt + site.noise_sigma_rad * rng.normal(),
                          d0 + d1 * tt + site.noise_sigma_rad * rng.normal()});
    }
    const Attributable a = attributable_from_track(t);
    Vec4 truth(a0 + a1 * a.epoch_s, d0 + d1 * a.epoch_s, a1, d1);
    const Vec4 r = a.z() - truth;
    d2.push_back(r.dot(a.covariance.inverse() * r));
  }
  const auto ks = stats::ks_chi2(d2, 4.0);
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("attributable covariance is SPD and Monte Carlo calibrated") {
  Rng rng(31415);
  const SensorSite site = test_site();
  Track base;
  base.site = site;
  for (int i = 0; i < 25; ++i) base.points.push_back({7.0 * i, 0.1, 0.2});
  const Attributable nominal = attributable_from_track(base);
  nominal.validate();  // SPD via Cholesky

  std::vector<double> slopes;
  for (int rep = 0; rep < 400; ++rep) {
    Track t = base;
    for (auto& p : t.points) {
      p.alpha += site.noise_sigma_rad * rng.normal();
      p.delta += site.noise_sigma_rad * rng.normal();
    }
    slopes.push_back(attributable_from_track(t).alpha_rate);
  }
  const double mc_var = stats::sample_variance(slopes);
  CHECK(test::rel_err(mc_var, nominal.covariance(2, 2)) < 0.25);
}

TEST_CASE("visibility gating") {
  const SensorSite site = test_site();
  const double epoch = (c::kTwoPi - c::kEraAtJ2000) / c::kEarthRotationRate;
  const Vec3 sun = orbits::sun_position_eci(epoch);

  // object on the anti-sun axis inside the shadow cylinder
  orbits::CartesianState shadowed;
  shadowed.position_km = -42164.0 * sun.normalized();
  shadowed.velocity_km_s = Vec3(0, 3.0747, 0);
  CHECK_FALSE(visibility(shadowed, site, sun, epoch));

  // object below the horizon (opposite side of the Earth from the site)
  Vec3 rs, vs;
  site_state_eci(site, epoch, rs, vs);
  orbits::CartesianState below;
  below.position_km = -42164.0 * rs.normalized();
  below.velocity_km_s = Vec3(0, 3.0747, 0);
  CHECK_FALSE(visibility(below, site, sun, epoch));
}

TEST_CASE("attributable CSV round trip") {
  const SensorSite site = test_site();
  std::vector<Attributable> attrs;
  Rng rng(55);
  for (int i = 0; i < 5; ++i) {
    Attributable a;
    a.site = site;
    a.epoch_s = 1000.0 * i;
    a.alpha = rng.uniform(-3.0, 3.0);
    a.delta = rng.uniform(-1.0, 1.0);
    a.alpha_rate = rng.uniform(-1e-4, 1e-4);
    a.delta_rate = rng.uniform(-1e-4, 1e-4);
    a.covariance = Mat4::Identity() * 1e-10;
    attrs.push_back(a);
  }
  const auto path = std::filesystem::temp_directory_path() / "attr_rt.csv";
  save_attributables_csv(path, attrs);
  const auto loaded = load_attributables_csv(path, {site});
  REQUIRE(loaded.size() == attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    CHECK(loaded[i].alpha == attrs[i].alpha);
    CHECK(loaded[i].epoch_s == attrs[i].epoch_s);
    CHECK((loaded[i].covariance - attrs[i].covariance).norm() == 0.0);
  }
  std::filesystem::remove(path);
}

TEST_SUITE_END();
