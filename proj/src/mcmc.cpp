#include "shf/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shf/constants.hpp"
#include "shf/parallel.hpp"

namespace shf::mcmc {

namespace c = shf::constants;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void LogPosterior::validate() const {
  if (attr == nullptr || region == nullptr || pre_orbit == nullptr)
    throw std::invalid_argument("LogPosterior: missing references");
  if (!(tof_s > 0.0)) throw std::invalid_argument("LogPosterior: tof > 0");
  if (mode == PosteriorMode::Control && !(kappa > 0.0))
    throw std::invalid_argument("LogPosterior: kappa > 0 in control mode");
  if (mode == PosteriorMode::Heuristic) {
    if (!(kappa_h > 0.0))
      throw std::invalid_argument("LogPosterior: kappa_h > 0 in heuristic mode");
    if (!kde_log_density)
      throw std::invalid_argument("LogPosterior: heuristic mode needs a KDE");
  }
}

double default_kappa(double p_adm_km_s) {
  return std::log(10.0) / std::max(p_adm_km_s, 1e-12);
}

double log_posterior_eval(const LogPosterior& lp, const Vec6& point) {
  lp.validate();
  const Vec4 obs_part = point.head<4>();
  if (!region::contains(*lp.region, obs_part, point[4], point[5])) return kNegInf;

  // Gaussian measurement likelihood of the point's observables
  Vec4 r = lp.attr->z() - obs_part;
  r[0] = c::wrap_pi(r[0]);
  const Eigen::LLT<Mat4> llt(lp.attr->covariance);
  const Vec4 y = llt.matrixL().solve(r);
  const double log_lik =
      -0.5 * y.squaredNorm() -
      0.5 * (4.0 * std::log(2.0 * c::kPi) +
             2.0 * std::log(llt.matrixL().determinant()));

  // implied inertial state
  obs::Attributable at = *lp.attr;
  at.alpha = point[0];
  at.delta = point[1];
  at.alpha_rate = point[2];
  at.delta_rate = point[3];
  orbits::MeeState state;
  try {
    orbits::CartesianState cart = obs::state_from_range(at, point[4], point[5]);
    cart.srp_coeff = lp.pre_orbit->srp_coeff;
    state = orbits::cart_to_mee(cart);
  } catch (const std::domain_error&) {
    return kNegInf;
  }

  if (lp.mode == PosteriorMode::Control) {
    const double p =
        control::control_distance(*lp.pre_orbit, state, lp.tof_s, lp.c1);
    return log_lik - lp.kappa * p;
  }

  const orbits::ClassicalElements pre = orbits::classical_from_mee(*lp.pre_orbit);
  const orbits::ClassicalElements post = orbits::classical_from_mee(state);
  const Vec3 xi(post.a - pre.a, post.e - pre.e, post.i - pre.i);
  return log_lik + std::log(lp.kappa_h) + lp.kde_log_density(xi);
}

MhResult mh_step(const VecX& state, double log_density, const MatX& proposal_cov,
                 const std::function<double(const VecX&)>& target, Rng& rng) {
  const Eigen::LLT<MatX> llt(proposal_cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("mh_step: proposal covariance not SPD");
  VecX draw(state.size());
  for (Eigen::Index i = 0; i < state.size(); ++i) draw[i] = rng.normal();
  const VecX proposal = state + llt.matrixL() * draw;
  const double lp_new = target(proposal);

  MhResult out;
  const double log_u = std::log(std::max(rng.uniform(), 1e-300));
  if (log_u <= lp_new - log_density) {
    out.state = proposal;
    out.log_density = lp_new;
    out.accepted = true;
  } else {
    out.state = state;
    out.log_density = log_density;
    out.accepted = false;
  }
  return out;
}

namespace {

Vec6 de_proposal(const Vec6& x, const Vec6& xr1, const Vec6& xr2, int generation,
                 double gamma_scale, const std::array<double, 6>& box_width,
                 Rng& rng) {
  const bool mode_jump = (generation + 1) % 10 == 0;
  const double gamma = mode_jump ? 1.0 : gamma_scale * 2.38 / std::sqrt(12.0);
  Vec6 prop = x + gamma * (xr1 - xr2);
  for (int d = 0; d < 6; ++d) prop[d] += 1e-6 * box_width[d] * rng.normal();
  return prop;
}

}  // namespace

Vec6 demc_propose(const ChainEnsemble& ensemble, std::size_t chain_index,
                  double gamma_scale, const std::array<double, 6>& box_width,
                  Rng& rng) {
  const std::size_t n = ensemble.states.size();
  if (n < 4) throw std::invalid_argument("demc_propose: need >= 4 chains");

  std::size_t r1 = rng.below(n - 1);
  if (r1 >= chain_index) ++r1;
  std::size_t r2 = rng.below(n - 2);
  if (r2 >= std::min(chain_index, r1)) ++r2;
  if (r2 >= std::max(chain_index, r1)) ++r2;

  return de_proposal(ensemble.states[chain_index], ensemble.states[r1],
                     ensemble.states[r2], ensemble.generation, gamma_scale,
                     box_width, rng);
}

namespace {

RunResult run_demc(const std::function<double(const Vec6&)>& target,
                   const std::array<double, 6>& lo,
                   const std::array<double, 6>& hi, int n_chains,
                   int n_generations, double burn_in_fraction,
                   std::uint64_t rng_seed, std::size_t n_draws) {
  if (n_chains < 4) throw std::invalid_argument("run_chains: n_chains >= 4");
  if (n_generations < 100)
    throw std::invalid_argument("run_chains: n_generations >= 100");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw std::invalid_argument("run_chains: burn_in_fraction in [0,1)");

  std::array<double, 6> width{};
  for (int d = 0; d < 6; ++d) width[d] = std::max(hi[d] - lo[d], 1e-30);

  ChainEnsemble ens;
  ens.rng_seed = rng_seed;
  ens.states.resize(n_chains);
  ens.log_densities.resize(n_chains);
  for (int i = 0; i < n_chains; ++i) {
    Rng rng = Rng::derive(rng_seed, 0x696e6974ULL, i);
    for (int d = 0; d < 6; ++d)
      ens.states[i][d] = lo[d] + width[d] * rng.uniform();
    ens.log_densities[i] = target(ens.states[i]);
  }

  const int burn = static_cast<int>(std::floor(burn_in_fraction * n_generations));
  std::vector<std::vector<Vec6>> per_chain(n_chains);

  std::vector<Vec6> next_states(n_chains);
  std::vector<double> next_log(n_chains);
  std::vector<char> accepted(n_chains);

  // complementary half-ensemble updates: moving every chain off the same
  // snapshot at once is not a valid kernel for the product target, so each
  // half updates against the frozen other half
  const std::size_t n_sz = static_cast<std::size_t>(n_chains);
  const std::size_t split = n_sz / 2;

  for (int g = 0; g < n_generations; ++g) {
    ens.generation = g;
    for (int phase = 0; phase < 2; ++phase) {
      const std::size_t begin = phase == 0 ? 0 : split;
      const std::size_t end = phase == 0 ? split : n_sz;
      const std::size_t p_begin = phase == 0 ? split : 0;
      const std::size_t p_count = phase == 0 ? n_sz - split : split;

      parallel_for(end - begin, [&](std::size_t k) {
        const std::size_t i = begin + k;
        Rng rng = Rng::derive(ens.rng_seed, 0x67656e00ULL + 2 * g + phase, i);
        std::size_t r1 = rng.below(p_count);
        std::size_t r2 = rng.below(p_count - 1);
        if (r2 >= r1) ++r2;
        const Vec6 prop =
            de_proposal(ens.states[i], ens.states[p_begin + r1],
                        ens.states[p_begin + r2], g, 1.0, width, rng);
        const double lp_new = target(prop);
        const double log_u = std::log(std::max(rng.uniform(), 1e-300));
        if (log_u <= lp_new - ens.log_densities[i]) {
          next_states[i] = prop;
          next_log[i] = lp_new;
          accepted[i] = 1;
        } else {
          next_states[i] = ens.states[i];
          next_log[i] = ens.log_densities[i];
          accepted[i] = 0;
        }
      });
      for (std::size_t i = begin; i < end; ++i) {
        ens.states[i] = next_states[i];
        ens.log_densities[i] = next_log[i];
        ens.proposed += 1;
        ens.accepted += accepted[i] ? 1 : 0;
      }
    }
    if (g >= burn)
      for (int i = 0; i < n_chains; ++i) per_chain[i].push_back(ens.states[i]);
  }

  RunResult out;
  out.diagnostics.acceptance_rate =
      static_cast<double>(ens.accepted) / static_cast<double>(ens.proposed);
  out.diagnostics.low_acceptance_warning =
      out.diagnostics.acceptance_rate < 0.02;
  out.diagnostics.psrf = split_chain_psrf(per_chain);

  // pool generation-major, then thin evenly to the requested count
  std::vector<Vec6> pooled;
  pooled.reserve(per_chain.size() * per_chain.front().size());
  for (std::size_t g = 0; g < per_chain.front().size(); ++g)
    for (int i = 0; i < n_chains; ++i) pooled.push_back(per_chain[i][g]);
  if (pooled.empty()) throw std::runtime_error("run_chains: no post-burn draws");

  out.draws.resize(n_draws);
  for (std::size_t k = 0; k < n_draws; ++k)
    out.draws[k] = pooled[(k * pooled.size()) / n_draws];
  return out;
}

}  // namespace

RunResult run_chains(const LogPosterior& lp, const region::AdmissibleRegion& box,
                     int n_chains, int n_generations, double burn_in_fraction,
                     std::uint64_t rng_seed, std::size_t n_draws) {
  lp.validate();
  const auto target = [&lp](const Vec6& x) { return log_posterior_eval(lp, x); };
  return run_demc(target, box.lo, box.hi, n_chains, n_generations,
                  burn_in_fraction, rng_seed, n_draws);
}

RunResult run_chains_on_target(const std::function<double(const Vec6&)>& target,
                               const std::array<double, 6>& lo,
                               const std::array<double, 6>& hi, int n_chains,
                               int n_generations, double burn_in_fraction,
                               std::uint64_t rng_seed, std::size_t n_draws) {
  return run_demc(target, lo, hi, n_chains, n_generations, burn_in_fraction,
                  rng_seed, n_draws);
}

Vec6 split_chain_psrf(const std::vector<std::vector<Vec6>>& chains) {
  Vec6 out = Vec6::Zero();
  if (chains.empty() || chains.front().size() < 4) return out;
  const std::size_t half = chains.front().size() / 2;

  for (int d = 0; d < 6; ++d) {
    std::vector<double> means, vars;
    for (const auto& chain : chains) {
      for (int part = 0; part < 2; ++part) {
        const std::size_t begin = part == 0 ? 0 : half;
        const std::size_t end = part == 0 ? half : 2 * half;
        double m = 0.0;
        for (std::size_t i = begin; i < end; ++i) m += chain[i][d];
        m /= static_cast<double>(end - begin);
        double v = 0.0;
        for (std::size_t i = begin; i < end; ++i)
          v += (chain[i][d] - m) * (chain[i][d] - m);
        v /= static_cast<double>(end - begin - 1);
        means.push_back(m);
        vars.push_back(v);
      }
    }
    const double m_count = static_cast<double>(means.size());
    const double n = static_cast<double>(half);
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= m_count;
    double b = 0.0;
    for (double m : means) b += (m - grand) * (m - grand);
    b *= n / (m_count - 1.0);
    double w = 0.0;
    for (double v : vars) w += v;
    w /= m_count;
    if (w <= 0.0) {
      out[d] = 1.0;
      continue;
    }
    const double var_plus = (n - 1.0) / n * w + b / n;
    out[d] = std::sqrt(var_plus / w);
  }
  return out;
}

}  // namespace shf::mcmc
