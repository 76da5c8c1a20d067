#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "shf/admissible_region.hpp"
#include "shf/observation.hpp"
#include "shf/rng.hpp"
#include "shf/types.hpp"

namespace shf::mcmc {

enum class PosteriorMode { Control, Heuristic };

// Log-posterior over the 6 sampling coordinates
// (alpha, delta, alpha_rate, delta_rate, rho, rho_rate); -inf outside the
// admissible box. Control mode penalizes the control distance, heuristic
// mode scores the implied (da, de, di) against the maneuver history KDE.
struct LogPosterior {
  PosteriorMode mode = PosteriorMode::Control;
  double kappa = 0.0;    // 1/(km/s), control mode
  double kappa_h = 1.0;  // heuristic mode
  const obs::Attributable* attr = nullptr;
  const region::AdmissibleRegion* region = nullptr;
  const orbits::MeeState* pre_orbit = nullptr;
  double tof_s = 0.0;
  double c1 = control::kDefaultC1;
  // log density over (da km, de, di rad); required in heuristic mode
  std::function<double(const Vec3&)> kde_log_density;

  void validate() const;
};

double log_posterior_eval(const LogPosterior& lp, const Vec6& point);

// One decade of prior density drop at the admissible boundary.
double default_kappa(double p_adm_km_s);

struct MhResult {
  VecX state;
  double log_density = 0.0;
  bool accepted = false;
};

// Random-walk Metropolis step with a Gaussian proposal.
MhResult mh_step(const VecX& state, double log_density, const MatX& proposal_cov,
                 const std::function<double(const VecX&)>& target, Rng& rng);

struct ChainEnsemble {
  std::vector<Vec6> states;
  std::vector<double> log_densities;
  int generation = 0;
  std::uint64_t accepted = 0;
  std::uint64_t proposed = 0;
  std::uint64_t rng_seed = 0;
};

// Differential-evolution proposal: x_i + gamma (x_r1 - x_r2) + e, with r1,r2
// distinct chains drawn from the current generation snapshot. Every 10th
// generation runs gamma = 1 for mode jumps.
Vec6 demc_propose(const ChainEnsemble& ensemble, std::size_t chain_index,
                  double gamma_scale, const std::array<double, 6>& box_width,
                  Rng& rng);

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  bool low_acceptance_warning = false;
  Vec6 psrf = Vec6::Zero();  // split-chain potential scale reduction
};

struct RunResult {
  std::vector<Vec6> draws;
  ChainDiagnostics diagnostics;
};

// Multi-chain DE-MC over the admissible box: uniform initialization,
// generation-synchronous updates, pooled post-burn-in draws thinned to
// n_draws.
RunResult run_chains(const LogPosterior& lp, const region::AdmissibleRegion& box,
                     int n_chains, int n_generations, double burn_in_fraction,
                     std::uint64_t rng_seed, std::size_t n_draws = 1000);

// Same sampler against an arbitrary target on a box; used by the oracles.
RunResult run_chains_on_target(const std::function<double(const Vec6&)>& target,
                               const std::array<double, 6>& lo,
                               const std::array<double, 6>& hi, int n_chains,
                               int n_generations, double burn_in_fraction,
                               std::uint64_t rng_seed, std::size_t n_draws);

// Split-chain potential scale reduction factor per dimension.
Vec6 split_chain_psrf(const std::vector<std::vector<Vec6>>& chains);

}  // namespace shf::mcmc
