#include "shf/particle_filter.hpp"

#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "shf/constants.hpp"
#include "shf/rng.hpp"
#include "test_util.hpp"

using namespace shf;
using namespace shf::pf;
namespace c = shf::constants;

namespace {

obs::SensorSite pf_site() {
  obs::SensorSite s;
  s.name = "site";
  s.latitude_rad = 0.6;
  s.longitude_rad = -0.2;
  s.noise_sigma_rad = c::kArcsecToRad;
  return s;
}

MeePopulation make_population(std::size_t n, std::uint64_t seed) {
  Rng rng(77);
  const orbits::MeeState mean = test::random_near_geo(rng);
  Mat7 cov = Mat7::Zero();
  cov.diagonal() << 25.0, 1e-8, 1e-8, 1e-9, 1e-9, 1e-7, 1e-6;
  return sample_gaussian_population(mean, cov, n, seed, "test");
}

}  // namespace

TEST_SUITE_BEGIN("particle_filter");

TEST_CASE("ess formulas") {
  CHECK(ess({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(4.0));
  CHECK(ess({1.0, 0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(ess({0.5, 0.25, 0.25}) == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("systematic resample tracks expected counts") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(20);
    for (auto& x : w) x = rng.uniform() + 1e-3;
    normalize_weights(w);
    const auto idx = systematic_resample(w, rng.uniform());
    std::vector<int> counts(w.size(), 0);
    for (auto i : idx) counts[i]++;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double expected = w[i] * static_cast<double>(idx.size());
      REQUIRE(counts[i] >= static_cast<int>(std::floor(expected)) - 0);
      REQUIRE(counts[i] <= static_cast<int>(std::ceil(expected)) + 0);
    }
  }
}

TEST_CASE("gaussian population sampling recovers moments") {
  const auto pop = make_population(20000, 42);
  const Vec7 m = pop.mean();
  const Mat7 cov = pop.covariance();
  CHECK(std::abs(cov(0, 0) - 25.0) < 1.0);
  CHECK(std::abs(cov(1, 1) - 1e-8) < 5e-10);
  CHECK(std::abs(m[6] - pop.particles[0].srp_coeff) < 1.0);  // finite
}

TEST_CASE("predict basics") {
  const auto pop = make_population(50, 7);
  orbits::ForceModelConfig cfg;

  SUBCASE("dt = 0 is the identity on states") {
    const auto out = predict(pop, 0.0, cfg);
    CHECK(out.dropped == 0);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      CHECK(out.population.particles[i].p == pop.particles[i].p);
      CHECK(out.population.particles[i].L == pop.particles[i].L);
    }
  }

  SUBCASE("single particle without noise equals the propagator") {
    MeePopulation single;
    single.particles = {pop.particles[0]};
    single.weights = {1.0};
    single.rng_seed = 1;
    const auto out = predict(single, 5000.0, cfg, false);
    const auto direct = orbits::perturbed_propagate(pop.particles[0], 5000.0, cfg);
    CHECK(out.population.particles[0].L == direct.L);
    CHECK(out.population.particles[0].p == direct.p);
  }
}

TEST_CASE("predict is deterministic across worker counts") {
  const auto pop = make_population(64, 99);
  orbits::ForceModelConfig cfg;
  cfg.zonal_degree = 2;
  cfg.accel_psd_sqrt = 1e-8;

  setenv("SHF_THREADS", "1", 1);
  const auto serial = predict(pop, 20000.0, cfg);
  setenv("SHF_THREADS", "4", 1);
  const auto parallel = predict(pop, 20000.0, cfg);
  unsetenv("SHF_THREADS");

  for (std::size_t i = 0; i < pop.size(); ++i) {
    REQUIRE(serial.population.particles[i].p ==
            parallel.population.particles[i].p);
    REQUIRE(serial.population.particles[i].L ==
            parallel.population.particles[i].L);
  }
}

TEST_CASE("update_weights follows Bayes rule") {
  const obs::SensorSite site = pf_site();
  const auto pop = make_population(2, 3);

  // an attributable consistent with particle 0
  obs::Attributable attr = obs::measure(orbits::mee_to_cart(pop.particles[0]),
                                        site, pop.particles[0].epoch_s);
  Mat4 cov = Mat4::Zero();
  cov.diagonal() << 1e-10, 1e-10, 1e-14, 1e-14;
  attr.covariance = cov;

  SUBCASE("single particle keeps weight one and reports its likelihood") {
    MeePopulation single;
    single.particles = {pop.particles[0]};
    single.weights = {1.0};
    const auto out = update_weights(single, attr);
    CHECK(out.population.weights[0] == doctest::Approx(1.0));
    const auto ll = log_likelihoods(single, attr);
    CHECK(out.log_evidence == doctest::Approx(ll[0]).epsilon(1e-12));
  }

  SUBCASE("weight ratio equals the likelihood ratio") {
    const auto out = update_weights(pop, attr);
    const auto ll = log_likelihoods(pop, attr);
    const double got = std::log(out.population.weights[0] /
                                out.population.weights[1]);
    const double want = ll[0] - ll[1] + std::log(pop.weights[0] / pop.weights[1]);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("particle filter matches a Kalman filter on a linear system") {
  // 2-state constant-velocity system, position measured
  const double q = 1e-4, r = 0.25;
  const Mat2 F = (Mat2() << 1.0, 1.0, 0.0, 1.0).finished();
  const Mat2 Q = q * Mat2::Identity();
  Rng rng(2025);

  // truth + measurements
  const int n_steps = 30;
  Vec2 truth(0.0, 0.1);
  std::vector<double> zs;
  for (int k = 0; k < n_steps; ++k) {
    truth = F * truth + std::sqrt(q) * Vec2(rng.normal(), rng.normal());
    zs.push_back(truth[0] + std::sqrt(r) * rng.normal());
  }

  // Kalman reference
  Vec2 xk(0.0, 0.0);
  Mat2 Pk = Mat2::Identity();
  std::vector<Vec2> kf_means;
  std::vector<Mat2> kf_covs;
  for (int k = 0; k < n_steps; ++k) {
    xk = F * xk;
    Pk = F * Pk * F.transpose() + Q;
    const double s = Pk(0, 0) + r;
    const Vec2 gain = Pk.col(0) / s;
    xk += gain * (zs[k] - xk[0]);
    Pk -= gain * Pk.row(0);
    kf_means.push_back(xk);
    kf_covs.push_back(Pk);
  }

  // bootstrap PF with the shared weight/resample core
  const std::size_t n_particles = 20000;
  std::vector<Vec2> parts(n_particles);
  std::vector<double> w(n_particles, 1.0 / n_particles);
  for (auto& p : parts) p = Vec2(rng.normal(), rng.normal());
  Vec2 pf_mean = Vec2::Zero();
  Mat2 pf_cov = Mat2::Zero();
  for (int k = 0; k < n_steps; ++k) {
    std::vector<double> logw(n_particles);
    for (std::size_t i = 0; i < n_particles; ++i) {
      parts[i] = F * parts[i] + std::sqrt(q) * Vec2(rng.normal(), rng.normal());
      const double resid = zs[k] - parts[i][0];
      logw[i] = std::log(w[i]) - 0.5 * resid * resid / r;
    }
    const double lse = log_sum_exp(logw);
    for (std::size_t i = 0; i < n_particles; ++i)
      w[i] = std::exp(logw[i] - lse);
    normalize_weights(w);
    if (ess(w) < 0.5 * n_particles) {
      const auto idx = systematic_resample(w, rng.uniform());
      std::vector<Vec2> nxt(n_particles);
      for (std::size_t i = 0; i < n_particles; ++i) nxt[i] = parts[idx[i]];
      parts.swap(nxt);
      std::fill(w.begin(), w.end(), 1.0 / n_particles);
    }
    pf_mean = Vec2::Zero();
    for (std::size_t i = 0; i < n_particles; ++i) pf_mean += w[i] * parts[i];
    pf_cov = Mat2::Zero();
    for (std::size_t i = 0; i < n_particles; ++i) {
      const Vec2 d = parts[i] - pf_mean;
      pf_cov += w[i] * d * d.transpose();
    }
  }

  const Vec2 kf_mean = kf_means.back();
  const Mat2 kf_cov = kf_covs.back();
  CHECK(std::abs(pf_mean[0] - kf_mean[0]) < 0.1 * std::sqrt(kf_cov(0, 0)));
  CHECK(std::abs(pf_mean[1] - kf_mean[1]) < 0.1 * std::sqrt(kf_cov(1, 1)));
  CHECK(test::rel_err(pf_cov(0, 0), kf_cov(0, 0)) < 0.15);
}

TEST_CASE("regularized_resample") {
  auto pop = make_population(4000, 11);

  SUBCASE("no-op above the ESS threshold") {
    const auto out = regularized_resample(pop, 10.0);
    CHECK(out.particles[17].L == pop.particles[17].L);
    CHECK(out.draw_counter == pop.draw_counter);
  }

  SUBCASE("resampling restores uniform weights and inflates covariance") {
    // skew the weights so ESS drops below the threshold
    Rng rng(13);
    double s = 0.0;
    for (auto& w : pop.weights) {
      w = std::exp(3.0 * rng.normal());
      s += w;
    }
    for (auto& w : pop.weights) w /= s;

    const Mat7 pre_cov = pop.covariance();
    const auto out = regularized_resample(pop, 0.9 * pop.size());
    CHECK(ess(out.weights) == doctest::Approx(pop.size()));

    const double n = static_cast<double>(pop.size());
    const double h2 = std::pow(4.0 / (8.0 * n), 0.2);
    const Mat7 post_cov = out.covariance();
    for (int d = 0; d < 6; ++d) {
      const double expected = pre_cov(d, d) * (1.0 + h2);
      CHECK(test::rel_err(post_cov(d, d), expected) < 0.10);
    }
  }
}

TEST_SUITE_END();
