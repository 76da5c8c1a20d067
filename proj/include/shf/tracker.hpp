#pragma once

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "shf/admissible_region.hpp"
#include "shf/mcmc.hpp"
#include "shf/particle_filter.hpp"

namespace shf::tracker {

// One characterized maneuver: relative element change statistics plus the
// pre-maneuver slot geometry.
struct ManeuverRecord {
  Vec3 xi_mean = Vec3::Zero();  // (da km, de, di rad)
  Mat3 xi_cov = Mat3::Identity();
  double lon_pre_rad = 0.0;
  double inc_pre_rad = 0.0;
  double detection_epoch_s = 0.0;
  int first_post_track_index = -1;
};

// Patterns-of-life density: equal-weight Gaussian mixture over xi.
struct HeuristicKde {
  std::vector<ManeuverRecord> records;
  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
};

double kde_eval(const HeuristicKde& kde, const Vec3& xi);
double kde_log_eval(const HeuristicKde& kde, const Vec3& xi);

enum class HypothesisKind { Ballistic, ManeuverControl, ManeuverHeuristic };

struct FilterConfig {
  region::RegionThresholds thresholds{10e-3, 1e-3, 3.0};
  double gate_sigma = 3.0;   // chi2(4) quantile at the n-sigma probability
  double prune_sigma = 5.0;  // applied to the best particle
  double phi = 0.95;         // fading memory factor, per day
  double fading_tau_s = 86400.0;
  int n_hypothesis_particles = 1000;  // N_H
  double kappa = 0.0;                 // 0 selects ln(10)/P_adm
  double kappa_h = 1.0;
  double ess_min_fraction = 0.5;
  orbits::ForceModelConfig dynamics;
  double c1 = control::kDefaultC1;
  int n_chains = 16;
  int n_generations = 400;
  double burn_in_fraction = 0.5;
  bool heuristics_enabled = true;
  int promote_streak = 2;  // consecutive tracks a lineage holds the top score
  int retain_tracks = 6;   // stored posteriors for maneuver re-analysis
  int outcompete_tracks = 4;  // maneuver age before a passing ballistic wins
  std::uint64_t seed = 1;

  void validate() const;
};

struct StoredTrack {
  int track_index = -1;
  double epoch_s = 0.0;
  bool gated = false;
  pf::MeePopulation population;
};

// A maneuver hypothesis. While the post-maneuver orbit is still poorly
// constrained its mean cannot gate the next track, so the session re-spawns a
// refreshed hypothesis from it each track; the chain shares a lineage, and
// promotion, detection epochs, and characterization are lineage properties.
struct ManeuverHypothesis {
  int id = 0;
  HypothesisKind kind = HypothesisKind::Ballistic;
  pf::MeePopulation population;
  double log_score = 0.0;  // log L(r)
  double spawn_epoch_s = 0.0;
  int spawn_track_index = -1;
  int parent_id = -1;
  std::vector<std::pair<double, double>> evidence;  // (epoch, log evidence)
  double last_update_epoch_s = 0.0;
  orbits::MeeState last_update_mean;      // state at the last associated track
  std::deque<StoredTrack> recent;

  // lineage data, inherited across re-spawns
  int lineage_root = -1;
  double lineage_spawn_epoch_s = 0.0;
  int lineage_first_track_index = -1;
  pf::MeePopulation lineage_pre_population;    // pre-maneuver posterior
  pf::MeePopulation lineage_first_population;  // posterior at the first track
};

struct Event {
  enum class Type { Spawn, Prune, Promote, Uncorrelated };
  Type type{};
  int track_index = -1;
  double epoch_s = 0.0;
  int hypothesis_id = -1;
  int parent_id = -1;
  double score = 0.0;
  double d2 = 0.0;
};

struct HypothesisReport {
  int id = 0;
  HypothesisKind kind{};
  double d2 = 0.0;
  bool gate_pass = false;
  double log_evidence = 0.0;
  double score = 0.0;  // L(r) rescaled so the best live hypothesis reads 1
};

struct TrackReport {
  int track_index = -1;
  double epoch_s = 0.0;
  std::vector<HypothesisReport> hypotheses;
  bool maneuver_detected = false;
  bool uncorrelated = false;
  std::vector<Event> events;
};

// d'^2 of the hypothesis mean against the attributable, and the gate verdict
// at the given chi2 threshold.
std::pair<double, bool> gate(const ManeuverHypothesis& hypothesis,
                             const obs::Attributable& attr,
                             double chi2_threshold);

// xi statistics from index-paired resampled populations.
ManeuverRecord characterize_maneuver(const pf::MeePopulation& pre_pop,
                                     const pf::MeePopulation& post_pop);

class Session {
 public:
  Session(const FilterConfig& cfg, const orbits::MeeState& initial_orbit,
          const Mat7& initial_covariance);

  TrackReport process_track(const obs::Attributable& attr);

  // maneuver hypotheses spawned from a failed gate on `parent`
  std::vector<ManeuverHypothesis> spawn_hypotheses(
      const ManeuverHypothesis& parent, const obs::Attributable& attr,
      const HeuristicKde& kde);

  const std::vector<ManeuverHypothesis>& hypotheses() const { return live_; }
  const HeuristicKde& kde() const { return kde_; }
  const std::vector<Event>& event_log() const { return events_; }
  const std::vector<ManeuverRecord>& maneuver_records() const {
    return kde_.records;
  }
  bool in_reacquisition() const { return live_.empty(); }
  const std::vector<obs::Attributable>& uncorrelated_archive() const {
    return archive_;
  }
  int tracks_processed() const { return track_count_; }

  // estimation source: the ballistic hypothesis, else the top-score one
  const ManeuverHypothesis* active() const;

  double gate_threshold() const { return gate_chi2_; }
  double prune_threshold() const { return prune_chi2_; }

 private:
  void refresh_scores(double epoch_s);
  void emit(TrackReport& report, Event ev);
  void remove_hypothesis(int id, TrackReport& report, double epoch_s);
  double spawn_evidence(const pf::MeePopulation& pop,
                        const obs::Attributable& attr) const;

  FilterConfig cfg_;
  double gate_chi2_ = 0.0;
  double prune_chi2_ = 0.0;
  std::vector<ManeuverHypothesis> live_;
  HeuristicKde kde_;
  std::vector<Event> events_;
  std::optional<ManeuverHypothesis> last_retired_;
  std::vector<obs::Attributable> archive_;
  std::map<int, int> lineage_streak_;
  int next_id_ = 0;
  int track_count_ = 0;
  double last_epoch_ = 0.0;
};

}  // namespace shf::tracker
