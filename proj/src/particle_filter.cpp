#include "shf/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shf/constants.hpp"
#include "shf/parallel.hpp"
#include "shf/rng.hpp"

namespace shf::pf {

namespace c = shf::constants;

double ess(const std::vector<double>& weights) {
  double s2 = 0.0;
  for (double w : weights) s2 += w * w;
  if (s2 <= 0.0) throw std::invalid_argument("ess: zero weights");
  return 1.0 / s2;
}

void normalize_weights(std::vector<double>& weights) {
  double s = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("normalize_weights: negative weight");
    s += w;
  }
  if (!(s > 0.0)) throw std::invalid_argument("normalize_weights: zero total");
  for (double& w : weights) w /= s;
}

std::vector<std::size_t> systematic_resample(const std::vector<double>& weights,
                                             double u0) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  double cum = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (u0 + static_cast<double>(i)) / static_cast<double>(n);
    while (u > cum && j + 1 < n) cum += weights[++j];
    idx[i] = j;
  }
  return idx;
}

double log_sum_exp(const std::vector<double>& log_values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : log_values) s += std::exp(v - m);
  return m + std::log(s);
}

void MeePopulation::validate() const {
  if (particles.empty() || particles.size() != weights.size())
    throw std::invalid_argument("MeePopulation: empty or size mismatch");
  double s = 0.0;
  for (double w : weights) s += w;
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("MeePopulation: weights not normalized");
}

namespace {

Vec7 particle_vec(const orbits::MeeState& s, double L_ref) {
  Vec7 v;
  v << s.p, s.f, s.g, s.h, s.k, L_ref + c::wrap_pi(s.L - L_ref), s.srp_coeff;
  return v;
}

}  // namespace

Vec7 MeePopulation::mean() const {
  validate();
  std::size_t ref = 0;
  for (std::size_t i = 1; i < weights.size(); ++i)
    if (weights[i] > weights[ref]) ref = i;
  const double L_ref = particles[ref].L;
  Vec7 m = Vec7::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i)
    m += weights[i] * particle_vec(particles[i], L_ref);
  return m;
}

Mat7 MeePopulation::covariance() const {
  const Vec7 m = mean();
  const double L_ref = m[5];
  Mat7 cov = Mat7::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Vec7 d = particle_vec(particles[i], L_ref) - m;
    cov += weights[i] * d * d.transpose();
  }
  return cov;
}

orbits::MeeState MeePopulation::mean_state() const {
  const Vec7 m = mean();
  orbits::MeeState s;
  s.p = m[0];
  s.f = m[1];
  s.g = m[2];
  s.h = m[3];
  s.k = m[4];
  s.L = m[5];
  s.srp_coeff = std::max(0.0, m[6]);
  s.epoch_s = particles.front().epoch_s;
  return s;
}

MeePopulation sample_gaussian_population(const orbits::MeeState& mean,
                                         const Mat7& covariance, std::size_t n,
                                         std::uint64_t seed,
                                         const std::string& tag) {
  const Eigen::SelfAdjointEigenSolver<Mat7> eig(covariance);
  Mat7 root = Mat7::Zero();
  for (int i = 0; i < 7; ++i) {
    const double ev = std::max(0.0, eig.eigenvalues()[i]);
    root += std::sqrt(ev) * eig.eigenvectors().col(i) *
            eig.eigenvectors().col(i).transpose();
  }

  MeePopulation pop;
  pop.hypothesis_tag = tag;
  pop.rng_seed = seed;
  pop.particles.resize(n);
  pop.weights.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, 0x696e6974ULL, i);
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vec7 draw;
      for (int d = 0; d < 7; ++d) draw[d] = rng.normal();
      const Vec7 v =
          (Vec7() << mean.p, mean.f, mean.g, mean.h, mean.k, mean.L,
           mean.srp_coeff)
              .finished() +
          root * draw;
      orbits::MeeState s;
      s.p = v[0];
      s.f = v[1];
      s.g = v[2];
      s.h = v[3];
      s.k = v[4];
      s.L = v[5];
      s.srp_coeff = std::max(0.0, v[6]);
      s.epoch_s = mean.epoch_s;
      if (s.p > 0.0 && s.f * s.f + s.g * s.g < 1.0) {
        pop.particles[i] = s;
        break;
      }
      pop.particles[i] = mean;  // kept if all attempts fail
    }
  }
  pop.draw_counter = 1;
  return pop;
}

PredictResult predict(const MeePopulation& pop, double dt_s,
                      const orbits::ForceModelConfig& cfg, bool with_noise) {
  pop.validate();
  PredictResult out;
  out.population = pop;
  out.population.draw_counter = pop.draw_counter + 1;
  std::vector<char> failed(pop.size(), 0);

  parallel_for(pop.size(), [&](std::size_t i) {
    try {
      std::optional<std::uint64_t> seed;
      if (with_noise && cfg.accel_psd_sqrt > 0.0) {
        Rng stream = Rng::derive(pop.rng_seed, pop.draw_counter, i);
        seed = stream.next_u64();
      }
      out.population.particles[i] =
          orbits::perturbed_propagate(pop.particles[i], dt_s, cfg, seed);
    } catch (const orbits::PropagationError&) {
      failed[i] = 1;
    }
  });

  for (std::size_t i = 0; i < pop.size(); ++i)
    if (failed[i]) {
      out.population.weights[i] = 0.0;
      ++out.dropped;
    }
  if (out.dropped > 0) normalize_weights(out.population.weights);
  return out;
}

std::vector<double> log_likelihoods(const MeePopulation& pop,
                                    const obs::Attributable& attr) {
  attr.validate();
  const Eigen::LLT<Mat4> llt(attr.covariance);
  const double log_norm =
      -0.5 * (4.0 * std::log(2.0 * c::kPi) +
              2.0 * std::log(llt.matrixL().determinant()));
  const Vec4 z = attr.z();

  std::vector<double> ll(pop.size());
  parallel_for(pop.size(), [&](std::size_t i) {
    try {
      const obs::Attributable pred = obs::measure(
          orbits::mee_to_cart(pop.particles[i]), attr.site, attr.epoch_s);
      Vec4 r = z - pred.z();
      r[0] = c::wrap_pi(r[0]);
      const Vec4 y = llt.matrixL().solve(r);
      ll[i] = log_norm - 0.5 * y.squaredNorm();
    } catch (const std::exception&) {
      ll[i] = -std::numeric_limits<double>::infinity();
    }
  });
  return ll;
}

UpdateResult update_weights(const MeePopulation& pop,
                            const obs::Attributable& attr) {
  pop.validate();
  const std::vector<double> ll = log_likelihoods(pop, attr);

  std::vector<double> logw(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i)
    logw[i] = pop.weights[i] > 0.0
                  ? std::log(pop.weights[i]) + ll[i]
                  : -std::numeric_limits<double>::infinity();

  const double log_ev = log_sum_exp(logw);
  if (!std::isfinite(log_ev))
    throw DegenerateUpdate("update_weights: all likelihoods vanished");

  UpdateResult out;
  out.population = pop;
  out.log_evidence = log_ev;
  for (std::size_t i = 0; i < pop.size(); ++i)
    out.population.weights[i] = std::exp(logw[i] - log_ev);
  normalize_weights(out.population.weights);
  return out;
}

MeePopulation regularized_resample(const MeePopulation& pop, double ess_min) {
  pop.validate();
  if (ess(pop.weights) > ess_min) return pop;

  const std::size_t n = pop.size();
  const Mat7 cov = pop.covariance();
  const double L_ref = pop.mean()[5];

  // Silverman bandwidth in the 6 MEE dimensions; B handled separately
  const double h_mee =
      std::pow(4.0 / (static_cast<double>(n) * 8.0), 1.0 / 10.0);
  const double h_b = std::pow(4.0 / (3.0 * static_cast<double>(n)), 0.2);
  const double sigma_b = std::sqrt(std::max(0.0, cov(6, 6)));

  const Mat6 mee_cov = cov.topLeftCorner<6, 6>();
  const Eigen::SelfAdjointEigenSolver<Mat6> eig(mee_cov);
  const double ev_max = std::max(1e-300, eig.eigenvalues().maxCoeff());
  Mat6 root = Mat6::Zero();
  for (int i = 0; i < 6; ++i) {
    const double ev = eig.eigenvalues()[i];
    // jitter only the non-degenerate subspace
    if (ev > 1e-14 * ev_max && ev > 0.0)
      root += std::sqrt(ev) * eig.eigenvectors().col(i) *
              eig.eigenvectors().col(i).transpose();
  }

  Rng u_stream = Rng::derive(pop.rng_seed, pop.draw_counter, 0x7265736dULL);
  const auto parents = systematic_resample(pop.weights, u_stream.uniform());

  MeePopulation out;
  out.hypothesis_tag = pop.hypothesis_tag;
  out.rng_seed = pop.rng_seed;
  out.draw_counter = pop.draw_counter + 1;
  out.particles.resize(n);
  out.weights.assign(n, 1.0 / static_cast<double>(n));

  parallel_for(n, [&](std::size_t i) {
    const orbits::MeeState& parent = pop.particles[parents[i]];
    Rng rng = Rng::derive(pop.rng_seed, pop.draw_counter, i + 1);
    orbits::MeeState jittered = parent;
    for (int attempt = 0; attempt < 5; ++attempt) {
      Vec6 xi;
      for (int d = 0; d < 6; ++d) xi[d] = rng.normal();
      const Vec6 dx = h_mee * (root * xi);
      orbits::MeeState s = parent;
      s.p += dx[0];
      s.f += dx[1];
      s.g += dx[2];
      s.h += dx[3];
      s.k += dx[4];
      s.L = L_ref + c::wrap_pi(parent.L - L_ref) + dx[5];
      s.srp_coeff = std::max(0.0, parent.srp_coeff + h_b * sigma_b * rng.normal());
      if (s.p > 0.0 && s.f * s.f + s.g * s.g < 1.0) {
        jittered = s;
        break;
      }
    }
    out.particles[i] = jittered;
  });
  return out;
}

}  // namespace shf::pf
