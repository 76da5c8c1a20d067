#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shf/observation.hpp"
#include "shf/orbits.hpp"
#include "shf/types.hpp"

namespace shf::pf {

// --- weighted-sample core, shared by the orbit population and the
// --- linear-system test harnesses ---

// 1 / sum(w_i^2) for normalized weights.
double ess(const std::vector<double>& weights);

// Normalizes in place; throws on a non-positive total.
void normalize_weights(std::vector<double>& weights);

// Systematic resampling: one uniform offset u0 in [0,1) strided by 1/N over
// the cumulative weights. Returns the selected parent index per slot.
std::vector<std::size_t> systematic_resample(const std::vector<double>& weights,
                                             double u0);

// log(sum(exp(v))) guarded against underflow.
double log_sum_exp(const std::vector<double>& log_values);

struct DegenerateUpdate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weighted particle population over MEE states. All stochastic operations
// derive per-particle streams from (rng_seed, draw_counter, index), so
// results do not depend on evaluation order or worker count.
struct MeePopulation {
  std::vector<orbits::MeeState> particles;
  std::vector<double> weights;
  std::string hypothesis_tag;
  std::uint64_t rng_seed = 0;
  std::uint64_t draw_counter = 0;

  std::size_t size() const { return particles.size(); }
  void validate() const;

  // weighted mean / covariance in (p, f, g, h, k, L, B); L averaged on the
  // branch of the highest-weight particle
  Vec7 mean() const;
  Mat7 covariance() const;
  orbits::MeeState mean_state() const;
};

MeePopulation sample_gaussian_population(const orbits::MeeState& mean,
                                         const Mat7& covariance, std::size_t n,
                                         std::uint64_t seed,
                                         const std::string& tag);

// Independent per-particle propagation; weights unchanged. Particles whose
// propagation fails get zero weight (population renormalized, count reported
// through the return's dropped counter).
struct PredictResult {
  MeePopulation population;
  int dropped = 0;
};
PredictResult predict(const MeePopulation& pop, double dt_s,
                      const orbits::ForceModelConfig& cfg, bool with_noise = true);

// Bayes update against an attributable; returns the posterior population and
// the log-evidence log sum w_i p(z | x_i).
struct UpdateResult {
  MeePopulation population;
  double log_evidence = 0.0;
};
UpdateResult update_weights(const MeePopulation& pop,
                            const obs::Attributable& attr);

// Per-particle measurement log-likelihoods (Gaussian in the attributable).
std::vector<double> log_likelihoods(const MeePopulation& pop,
                                    const obs::Attributable& attr);

// No-op above the ESS threshold; otherwise systematic resampling followed by
// Gaussian kernel jitter with the Silverman bandwidth in MEE coordinates
// (B gets its own scalar bandwidth).
MeePopulation regularized_resample(const MeePopulation& pop, double ess_min);

}  // namespace shf::pf
