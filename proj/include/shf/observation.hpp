#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "shf/orbits.hpp"
#include "shf/types.hpp"

namespace shf::obs {

struct SensorSite {
  std::string name;
  double latitude_rad = 0.0;   // geodetic
  double longitude_rad = 0.0;
  double altitude_km = 0.0;
  double elevation_mask_rad = 0.0;
  double noise_sigma_rad = 0.0;  // per-angle, per point

  void validate() const;
};

// Short-track summary z_k = (alpha, delta, alpha_rate, delta_rate) at the
// track mean epoch, with its 4x4 covariance.
struct Attributable {
  double alpha = 0.0;       // topocentric right ascension, rad
  double delta = 0.0;       // declination, rad
  double alpha_rate = 0.0;  // rad/s
  double delta_rate = 0.0;
  double epoch_s = 0.0;
  SensorSite site;
  Mat4 covariance = Mat4::Identity();

  Vec4 z() const { return Vec4(alpha, delta, alpha_rate, delta_rate); }
  void validate() const;
};

struct Track {
  struct Point {
    double epoch_s;
    double alpha;
    double delta;
  };
  std::vector<Point> points;  // strictly increasing epochs, >= 3 points
  SensorSite site;
};

// Site inertial position/velocity from the constant-rate Earth rotation model.
void site_state_eci(const SensorSite& site, double epoch_s, Vec3& r, Vec3& v);
Vec3 site_zenith_eci(const SensorSite& site, double epoch_s);

// Unit line-of-sight vector and its time derivative.
std::pair<Vec3, Vec3> line_of_sight(const Attributable& attr);

// Noise-free measurement function h(x); covariance left as identity.
Attributable measure(const orbits::CartesianState& state, const SensorSite& site,
                     double epoch_s);

// Inverse map: attributable plus (rho, rho_rate) to an inertial state.
orbits::CartesianState state_from_range(const Attributable& attr, double rho_km,
                                        double rho_rate_km_s);

// Degree-1 least-squares fits of alpha(t), delta(t) at the mean epoch;
// covariance is the analytic OLS covariance scaled by the per-point noise.
Attributable attributable_from_track(const Track& track);

// Elevation mask + solar phase angle in [0, 90] deg + outside the cylindrical
// Earth shadow + site in darkness (sun elevation < -10 deg).
bool visibility(const orbits::CartesianState& state, const SensorSite& site,
                const Vec3& sun_position_km, double epoch_s);

double elevation_angle(const Vec3& object_eci, const SensorSite& site,
                       double epoch_s);

// CSV schema:
// epoch_s,alpha_rad,delta_rad,alpha_rate_rad_s,delta_rate_rad_s,site,cov_00..cov_33
void save_attributables_csv(const std::filesystem::path& path,
                            const std::vector<Attributable>& attrs);
std::vector<Attributable> load_attributables_csv(
    const std::filesystem::path& path, const std::vector<SensorSite>& sites);

}  // namespace shf::obs
