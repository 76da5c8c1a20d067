#include "shf/tracker.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <limits>

#include "shf/constants.hpp"
#include "shf/stats.hpp"

namespace shf::tracker {

namespace c = shf::constants;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void FilterConfig::validate() const {
  thresholds.validate();
  dynamics.validate();
  if (!(phi > 0.0 && phi < 1.0))
    throw std::domain_error("FilterConfig: phi in (0,1)");
  if (n_hypothesis_particles < 1 || n_chains < 4 || n_generations < 100)
    throw std::domain_error("FilterConfig: bad sampler sizes");
  if (promote_streak < 1 || retain_tracks < 1)
    throw std::domain_error("FilterConfig: bad lifecycle parameters");
}

double kde_eval(const HeuristicKde& kde, const Vec3& xi) {
  return std::exp(kde_log_eval(kde, xi));
}

double kde_log_eval(const HeuristicKde& kde, const Vec3& xi) {
  if (kde.empty()) throw std::invalid_argument("kde_eval: empty KDE");
  std::vector<double> terms;
  terms.reserve(kde.size());
  for (const auto& rec : kde.records) {
    const Eigen::LLT<Mat3> llt(rec.xi_cov);
    const Vec3 y = llt.matrixL().solve(xi - rec.xi_mean);
    terms.push_back(-0.5 * y.squaredNorm() -
                    0.5 * (3.0 * std::log(2.0 * c::kPi) +
                           2.0 * std::log(llt.matrixL().determinant())));
  }
  return pf::log_sum_exp(terms) - std::log(static_cast<double>(kde.size()));
}

std::pair<double, bool> gate(const ManeuverHypothesis& hypothesis,
                             const obs::Attributable& attr,
                             double chi2_threshold) {
  const orbits::MeeState mean = hypothesis.population.mean_state();
  double d2 = std::numeric_limits<double>::infinity();
  try {
    const obs::Attributable pred =
        obs::measure(orbits::mee_to_cart(mean), attr.site, attr.epoch_s);
    Vec4 r = attr.z() - pred.z();
    r[0] = c::wrap_pi(r[0]);
    d2 = r.dot(attr.covariance.inverse() * r);
  } catch (const std::exception&) {
    // degenerate geometry cannot associate
  }
  return {d2, d2 <= chi2_threshold};
}

ManeuverRecord characterize_maneuver(const pf::MeePopulation& pre_pop,
                                     const pf::MeePopulation& post_pop) {
  pre_pop.validate();
  post_pop.validate();
  const std::size_t n = std::max(pre_pop.size(), post_pop.size());

  const auto resample_to = [n](const pf::MeePopulation& pop, std::uint64_t tag) {
    Rng rng = Rng::derive(pop.rng_seed, pop.draw_counter, tag);
    std::vector<double> w = pop.weights;
    // stretch to n slots by scaling the systematic sweep
    std::vector<orbits::MeeState> out(n);
    double cum = w[0];
    std::size_t j = 0;
    const double u0 = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (u0 + static_cast<double>(i)) / static_cast<double>(n);
      while (u > cum && j + 1 < w.size()) cum += w[++j];
      out[i] = pop.particles[j];
    }
    return out;
  };

  const auto pre = resample_to(pre_pop, 0x70726570ULL);
  const auto post = resample_to(post_pop, 0x706f7374ULL);

  std::vector<Vec3> xis(n);
  Vec3 mean = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const auto epre = orbits::classical_from_mee(pre[i]);
    const auto epost = orbits::classical_from_mee(post[i]);
    xis[i] = Vec3(epost.a - epre.a, epost.e - epre.e, epost.i - epre.i);
    mean += xis[i];
  }
  mean /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  for (const auto& xi : xis) {
    const Vec3 d = xi - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);

  // eigenvalue floor keeps the record usable as a Gaussian kernel
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 floored = Mat3::Zero();
  for (int i = 0; i < 3; ++i) {
    const double ev = std::max(eig.eigenvalues()[i], 1e-12);
    floored += ev * eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
  }

  ManeuverRecord rec;
  rec.xi_mean = mean;
  rec.xi_cov = floored;
  const orbits::MeeState pre_mean = pre_pop.mean_state();
  rec.lon_pre_rad = orbits::geo_mean_longitude(pre_mean);
  rec.inc_pre_rad = orbits::classical_from_mee(pre_mean).i;
  return rec;
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(const FilterConfig& cfg, const orbits::MeeState& initial_orbit,
                 const Mat7& initial_covariance)
    : cfg_(cfg) {
  cfg_.validate();
  gate_chi2_ =
      stats::chi2_quantile(stats::sigma_probability(cfg_.gate_sigma), 4.0);
  prune_chi2_ =
      stats::chi2_quantile(stats::sigma_probability(cfg_.prune_sigma), 4.0);

  ManeuverHypothesis h;
  h.id = next_id_++;
  h.kind = HypothesisKind::Ballistic;
  h.population = pf::sample_gaussian_population(
      initial_orbit, initial_covariance,
      static_cast<std::size_t>(cfg_.n_hypothesis_particles),
      splitmix64(cfg_.seed), "ballistic-0");
  h.log_score = kNegInf;
  h.spawn_epoch_s = initial_orbit.epoch_s;
  h.spawn_track_index = -1;
  h.last_update_epoch_s = initial_orbit.epoch_s;
  h.last_update_mean = initial_orbit;
  live_.push_back(std::move(h));
  last_epoch_ = initial_orbit.epoch_s;
}

const ManeuverHypothesis* Session::active() const {
  const ManeuverHypothesis* best = nullptr;
  for (const auto& h : live_)
    if (h.kind == HypothesisKind::Ballistic) return &h;
  for (const auto& h : live_)
    if (best == nullptr || h.log_score > best->log_score) best = &h;
  return best;
}

void Session::refresh_scores(double epoch_s) {
  const double log_phi = std::log(cfg_.phi);
  for (auto& h : live_) {
    std::vector<double> terms;
    terms.reserve(h.evidence.size());
    for (const auto& [t_j, log_ev] : h.evidence)
      terms.push_back(log_ev + log_phi * (epoch_s - t_j) / cfg_.fading_tau_s);
    h.log_score = terms.empty() ? kNegInf : pf::log_sum_exp(terms);
  }
}

void Session::emit(TrackReport& report, Event ev) {
  events_.push_back(ev);
  report.events.push_back(ev);
}

double Session::spawn_evidence(const pf::MeePopulation& pop,
                               const obs::Attributable& attr) const {
  const auto ll = pf::log_likelihoods(pop, attr);
  return pf::log_sum_exp(ll) - std::log(static_cast<double>(ll.size()));
}

std::vector<ManeuverHypothesis> Session::spawn_hypotheses(
    const ManeuverHypothesis& parent, const obs::Attributable& attr,
    const HeuristicKde& kde) {
  const double tof = attr.epoch_s - parent.last_update_epoch_s;
  if (!(tof > 0.0)) return {};
  const orbits::MeeState& pre = parent.last_update_mean;

  region::CentroidResult cr;
  try {
    cr = region::centroid(pre, attr, tof);
  } catch (const region::CentroidFailure&) {
    return {};
  }
  region::AdmissibleRegion box;
  try {
    box = region::orthotope_bounds(cr, attr, pre, tof, cfg_.thresholds, cfg_.c1);
  } catch (const std::exception&) {
    return {};
  }

  // post-maneuver association threshold: expected state beyond P_max stays
  // uncorrelated
  const region::XOptResult xo = region::x_opt(pre, attr, tof, &box, cfg_.c1);
  if (xo.p_km_s > cfg_.thresholds.p_max_km_s) return {};

  std::vector<ManeuverHypothesis> out;
  const double kappa =
      cfg_.kappa > 0.0 ? cfg_.kappa : mcmc::default_kappa(box.p_adm_km_s);

  const auto materialize = [&](const std::vector<Vec6>& draws,
                               std::uint64_t seed, const std::string& tag) {
    pf::MeePopulation pop;
    pop.hypothesis_tag = tag;
    pop.rng_seed = seed;
    pop.draw_counter = 1;
    pop.particles.reserve(draws.size());
    for (const auto& d : draws) {
      obs::Attributable at = attr;
      at.alpha = d[0];
      at.delta = d[1];
      at.alpha_rate = d[2];
      at.delta_rate = d[3];
      orbits::CartesianState cart = obs::state_from_range(at, d[4], d[5]);
      cart.srp_coeff = pre.srp_coeff;
      pop.particles.push_back(orbits::cart_to_mee(cart));
    }
    pop.weights.assign(pop.particles.size(),
                       1.0 / static_cast<double>(pop.particles.size()));
    return pop;
  };

  const auto build = [&](mcmc::PosteriorMode mode, HypothesisKind kind,
                         const std::string& tag) {
    mcmc::LogPosterior lp;
    lp.mode = mode;
    lp.kappa = kappa;
    lp.kappa_h = cfg_.kappa_h;
    lp.attr = &attr;
    lp.region = &box;
    lp.pre_orbit = &pre;
    lp.tof_s = tof;
    lp.c1 = cfg_.c1;
    if (mode == mcmc::PosteriorMode::Heuristic)
      lp.kde_log_density = [&kde](const Vec3& xi) {
        return kde_log_eval(kde, xi);
      };

    const std::uint64_t seed =
        Rng::derive(cfg_.seed, 0x73706177ULL + track_count_, next_id_).next_u64();
    const auto run = mcmc::run_chains(
        lp, box, cfg_.n_chains, cfg_.n_generations, cfg_.burn_in_fraction, seed,
        static_cast<std::size_t>(cfg_.n_hypothesis_particles));

    std::uint64_t pop_seed_src = seed;
    ManeuverHypothesis h;
    h.id = next_id_++;
    h.kind = kind;
    h.population = materialize(run.draws, splitmix64(pop_seed_src), tag);
    h.spawn_epoch_s = attr.epoch_s;
    h.spawn_track_index = track_count_;
    h.parent_id = parent.id;
    h.evidence.emplace_back(attr.epoch_s, spawn_evidence(h.population, attr));
    h.last_update_epoch_s = attr.epoch_s;
    h.last_update_mean = h.population.mean_state();
    h.pre_population = parent.population;
    StoredTrack st;
    st.track_index = track_count_;
    st.epoch_s = attr.epoch_s;
    st.gated = true;
    st.population = h.population;
    h.recent.push_back(std::move(st));
    return h;
  };

  out.push_back(build(mcmc::PosteriorMode::Control,
                      HypothesisKind::ManeuverControl, "maneuver-control"));
  if (cfg_.heuristics_enabled && !kde.empty())
    out.push_back(build(mcmc::PosteriorMode::Heuristic,
                        HypothesisKind::ManeuverHeuristic, "maneuver-heuristic"));
  return out;
}

TrackReport Session::process_track(const obs::Attributable& attr) {
  attr.validate();
  if (track_count_ > 0 && !(attr.epoch_s > last_epoch_))
    throw std::invalid_argument("process_track: epochs must increase");

  TrackReport report;
  report.track_index = track_count_;
  report.epoch_s = attr.epoch_s;

  // reacquisition: repopulate from the last retired ballistic
  if (live_.empty()) {
    if (!last_retired_.has_value())
      throw std::logic_error("process_track: no hypotheses and nothing retired");
    auto spawned = spawn_hypotheses(*last_retired_, attr, kde_);
    if (spawned.empty()) {
      report.uncorrelated = true;
      archive_.push_back(attr);
      emit(report, {Event::Type::Uncorrelated, track_count_, attr.epoch_s, -1,
                    last_retired_->id, 0.0, 0.0});
    }
    for (auto& h : spawned) {
      emit(report, {Event::Type::Spawn, track_count_, attr.epoch_s, h.id,
                    h.parent_id, 0.0, 0.0});
      live_.push_back(std::move(h));
    }
    refresh_scores(attr.epoch_s);
    ++track_count_;
    last_epoch_ = attr.epoch_s;
    return report;
  }

  // 1) predict, gate, and conditionally update every live hypothesis.
  // Association is particle-level: a broad maneuver population whose mean
  // fails the gate still updates when individual particles are consistent.
  struct StepInfo {
    double d2 = 0.0;        // at the population mean
    double best_d2 = 0.0;   // best particle (the hypothesis MLE)
    bool pass = false;      // mean gate
    bool associated = false;
    double log_ev = kNegInf;
  };
  std::map<int, StepInfo> info;

  const Eigen::LLT<Mat4> cov_llt(attr.covariance);
  const double ll_norm =
      -0.5 * (4.0 * std::log(2.0 * c::kPi) +
              2.0 * std::log(cov_llt.matrixL().determinant()));

  for (auto& h : live_) {
    const double dt = attr.epoch_s - h.population.particles.front().epoch_s;
    h.population = pf::predict(h.population, dt, cfg_.dynamics).population;

    auto [d2, pass] = gate(h, attr, gate_chi2_);
    StepInfo si;
    si.d2 = d2;
    si.pass = pass;

    const auto ll = pf::log_likelihoods(h.population, attr);
    si.best_d2 = std::numeric_limits<double>::infinity();
    for (double l : ll) si.best_d2 = std::min(si.best_d2, -2.0 * (l - ll_norm));
    si.associated = pass || si.best_d2 <= gate_chi2_;

    if (si.associated) {
      try {
        const auto updated = pf::update_weights(h.population, attr);
        h.population = pf::regularized_resample(
            updated.population,
            cfg_.ess_min_fraction * static_cast<double>(h.population.size()));
        si.log_ev = updated.log_evidence;
        h.evidence.emplace_back(attr.epoch_s, updated.log_evidence);
        h.last_update_epoch_s = attr.epoch_s;
        h.last_update_mean = h.population.mean_state();
      } catch (const pf::DegenerateUpdate&) {
        si.associated = false;
      }
    }
    info[h.id] = si;

    StoredTrack st;
    st.track_index = track_count_;
    st.epoch_s = attr.epoch_s;
    st.gated = si.associated;
    st.population = h.population;
    h.recent.push_back(std::move(st));
    while (h.recent.size() > static_cast<std::size_t>(cfg_.retain_tracks))
      h.recent.pop_front();
  }

  // 2) spawn when the active ballistic (or, between promotions, the
  // top-score hypothesis providing the prior orbit) fails its gate
  refresh_scores(attr.epoch_s);
  int spawn_parent_id = -1;
  {
    const ManeuverHypothesis* prior_provider = nullptr;
    for (const auto& h : live_)
      if (h.kind == HypothesisKind::Ballistic) prior_provider = &h;
    if (prior_provider == nullptr)
      for (const auto& h : live_)
        if (prior_provider == nullptr ||
            h.log_score > prior_provider->log_score)
          prior_provider = &h;
    if (prior_provider != nullptr && !info[prior_provider->id].pass)
      spawn_parent_id = prior_provider->id;
  }

  if (spawn_parent_id >= 0) {
    bool all_failed = true;
    for (const auto& h : live_) all_failed &= !info[h.id].associated;

    const ManeuverHypothesis parent = *std::find_if(
        live_.begin(), live_.end(),
        [&](const ManeuverHypothesis& h) { return h.id == spawn_parent_id; });
    auto spawned = spawn_hypotheses(parent, attr, kde_);
    if (spawned.empty() && all_failed) {
      report.uncorrelated = true;
      archive_.push_back(attr);
      emit(report, {Event::Type::Uncorrelated, track_count_, attr.epoch_s, -1,
                    parent.id, 0.0, info[parent.id].d2});
    }
    for (auto& h : spawned) {
      StepInfo si;
      si.pass = true;
      si.associated = true;
      si.log_ev = h.evidence.back().second;
      info[h.id] = si;
      emit(report, {Event::Type::Spawn, track_count_, attr.epoch_s, h.id,
                    h.parent_id, 0.0, info[parent.id].d2});
      live_.push_back(std::move(h));
    }
  }

  // 3) prune on the best-particle likelihood; fresh spawns are exempt
  std::vector<int> prune_ids;
  for (auto& h : live_) {
    if (h.spawn_track_index == track_count_) continue;
    if (info[h.id].best_d2 > prune_chi2_) prune_ids.push_back(h.id);
  }
  for (int id : prune_ids) remove_hypothesis(id, report, attr.epoch_s);

  // 4) promotion: a maneuver hypothesis that holds the top score for
  // promote_streak consecutive tracks replaces the ballistic one
  refresh_scores(attr.epoch_s);
  if (!live_.empty()) {
    const ManeuverHypothesis* top = &live_.front();
    for (const auto& h : live_) {
      if (h.log_score > top->log_score + 1e-12 ||
          (std::abs(h.log_score - top->log_score) <= 1e-12 && h.id < top->id))
        top = &h;
    }
    const int top_id = top->id;
    for (auto& h : live_) h.top_streak = h.id == top_id ? h.top_streak + 1 : 0;

    ManeuverHypothesis* winner = nullptr;
    for (auto& h : live_)
      if (h.id == top_id && h.kind != HypothesisKind::Ballistic &&
          h.top_streak >= cfg_.promote_streak)
        winner = &h;

    if (winner != nullptr) {
      const int winner_id = winner->id;

      // retire the previous ballistic and the winner's spawn siblings
      std::vector<int> to_remove;
      for (const auto& h : live_) {
        if (h.kind == HypothesisKind::Ballistic) to_remove.push_back(h.id);
        if (h.id != winner_id && h.parent_id == winner->parent_id &&
            h.spawn_track_index == winner->spawn_track_index)
          to_remove.push_back(h.id);
      }
      for (int id : to_remove) remove_hypothesis(id, report, attr.epoch_s);

      winner = nullptr;  // live_ mutated; reacquire
      for (auto& h : live_)
        if (h.id == winner_id) winner = &h;

      // earliest retained associated track is the first post-maneuver one
      const StoredTrack* first_post = nullptr;
      for (const auto& st : winner->recent)
        if (st.gated) {
          first_post = &st;
          break;
        }
      ManeuverRecord rec =
          characterize_maneuver(winner->pre_population,
                                first_post ? first_post->population
                                           : winner->population);
      rec.detection_epoch_s = winner->spawn_epoch_s;
      rec.first_post_track_index =
          first_post ? first_post->track_index : winner->spawn_track_index;
      kde_.records.push_back(rec);

      winner->kind = HypothesisKind::Ballistic;
      report.maneuver_detected = true;
      emit(report,
           {Event::Type::Promote, track_count_, winner->spawn_epoch_s,
            winner_id, winner->parent_id, 1.0, info.count(winner_id) ? info[winner_id].d2 : 0.0});
    }
  }

  // 5) per-hypothesis report rows (survivors, final scores)
  double max_log_score = kNegInf;
  for (const auto& h : live_) max_log_score = std::max(max_log_score, h.log_score);
  for (const auto& h : live_) {
    HypothesisReport hr;
    hr.id = h.id;
    hr.kind = h.kind;
    hr.d2 = info.count(h.id) ? info[h.id].d2 : 0.0;
    hr.gate_pass = info.count(h.id) ? info[h.id].associated : false;
    hr.log_evidence = info.count(h.id) ? info[h.id].log_ev : kNegInf;
    hr.score = std::isfinite(h.log_score) && std::isfinite(max_log_score)
                   ? std::exp(h.log_score - max_log_score)
                   : 0.0;
    report.hypotheses.push_back(hr);
  }

  ++track_count_;
  last_epoch_ = attr.epoch_s;
  return report;
}

void Session::remove_hypothesis(int id, TrackReport& report, double epoch_s) {
  const auto it =
      std::find_if(live_.begin(), live_.end(),
                   [&](const ManeuverHypothesis& h) { return h.id == id; });
  if (it == live_.end()) return;
  if (it->kind == HypothesisKind::Ballistic) last_retired_ = *it;
  emit(report, {Event::Type::Prune, track_count_, epoch_s, it->id,
                it->parent_id, 0.0, 0.0});
  live_.erase(it);
}

}  // namespace shf::tracker
