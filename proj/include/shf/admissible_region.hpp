#pragma once

#include <array>

#include "shf/control_metric.hpp"
#include "shf/observation.hpp"
#include "shf/orbits.hpp"

namespace shf::region {

struct RegionThresholds {
  double p_max_km_s = 10e-3;  // P_max
  double p_min_km_s = 1e-3;   // P_min
  double k_p = 3.0;

  void validate() const;
};

struct CentroidFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pre-maneuver orbit adjusted in inclination and true anomaly only, then
// materialized through the attributable so its observables match z exactly.
struct CentroidResult {
  orbits::MeeState state;
  double rho_km = 0.0;
  double rho_rate_km_s = 0.0;
  double delta_i_rad = 0.0;
  double delta_nu_rad = 0.0;
  double residual = 0.0;  // (z - h(x))^T (z - h(x)) at the solution
};

struct XOptResult {
  orbits::MeeState state;
  double rho_km = 0.0;
  double rho_rate_km_s = 0.0;
  double p_km_s = 0.0;
};

// Axis-aligned orthotope over (alpha, delta, alpha_rate, delta_rate, rho,
// rho_rate). Observable bounds are centroid value +- 3 sigma; range and
// range-rate bounds are the first P = P_adm crossings along the axes.
struct AdmissibleRegion {
  std::array<double, 6> lo{};
  std::array<double, 6> hi{};
  std::array<bool, 4> capped{};  // -rho, +rho, -rho_rate, +rho_rate
  double rho_center_km = 0.0;
  double rho_rate_center_km_s = 0.0;
  double p_centroid_km_s = 0.0;
  double p_adm_km_s = 0.0;
  double tof_s = 0.0;
  orbits::MeeState centroid_state;
  orbits::MeeState pre_orbit;

  bool any_capped() const {
    return capped[0] || capped[1] || capped[2] || capped[3];
  }
};

// Search caps for the range / range-rate boundary searches.
inline constexpr double kRhoSearchCap = 5000.0;    // km
inline constexpr double kRhoRateSearchCap = 1.0;   // km/s

CentroidResult centroid(const orbits::MeeState& pre_orbit,
                        const obs::Attributable& attr, double tof_s);

// Global minimum of P over (rho, rho_rate) compatible with the attributable.
// When a region box is available it bounds the grid; otherwise the search
// covers +-500 km x +-0.5 km/s around the centroid.
XOptResult x_opt(const orbits::MeeState& pre_orbit, const obs::Attributable& attr,
                 double tof_s, const AdmissibleRegion* box = nullptr,
                 double c1 = control::kDefaultC1);

double admissible_threshold(double p_centroid_km_s, const RegionThresholds& th);

AdmissibleRegion orthotope_bounds(const CentroidResult& centroid_result,
                                  const obs::Attributable& attr,
                                  const orbits::MeeState& pre_orbit, double tof_s,
                                  const RegionThresholds& th,
                                  double c1 = control::kDefaultC1);

// Box membership over all six dimensions (alpha wrapped to the box branch).
bool contains(const AdmissibleRegion& region, const Vec4& attr_point,
              double rho_km, double rho_rate_km_s);

// P of the state implied by (rho, rho_rate) and the attributable.
double control_distance_at(const orbits::MeeState& pre_orbit,
                           const obs::Attributable& attr, double tof_s,
                           double rho_km, double rho_rate_km_s,
                           double c1 = control::kDefaultC1);

}  // namespace shf::region
