#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>

#include "shf/types.hpp"

namespace shf::orbits {

// Earth-centered inertial state. Epoch is continuous seconds past J2000
// (TT-like, no leap seconds). B is the area-to-mass-scaled reflectivity
// (m^2/kg) driving cannonball SRP.
struct CartesianState {
  Vec3 position_km = Vec3::Zero();
  Vec3 velocity_km_s = Vec3::Zero();
  double srp_coeff = 0.0;
  double epoch_s = 0.0;
};

// Modified equinoctial elements (p, f, g, h, k, L). L is the true longitude,
// kept unwrapped: propagation accumulates full revolutions.
struct MeeState {
  double p = 0.0;  // semi-latus rectum, km
  double f = 0.0;
  double g = 0.0;
  double h = 0.0;
  double k = 0.0;
  double L = 0.0;  // rad, unwrapped
  double srp_coeff = 0.0;
  double epoch_s = 0.0;

  Vec6 elements() const { return (Vec6() << p, f, g, h, k, L).finished(); }
  double eccentricity() const { return std::sqrt(f * f + g * g); }
  double semi_major_axis() const { return p / (1.0 - f * f - g * g); }
  void validate() const;
};

enum class ThirdBody { Sun, Moon };
enum class EclipseModel { None, Conical };

struct ForceModelConfig {
  int zonal_degree = 0;                   // 0 = two-body, 2..6 = J2..Jn
  std::set<ThirdBody> third_bodies;
  bool srp_enabled = false;
  EclipseModel eclipse = EclipseModel::None;
  double accel_psd_sqrt = 0.0;            // km/s^1.5, per RTN axis
  double noise_step_s = 300.0;            // nominal macro-step for noise draws
  void validate() const;
};

struct PropagationError : std::runtime_error {
  PropagationError(const std::string& what, double last_epoch)
      : std::runtime_error(what), last_valid_epoch(last_epoch) {}
  double last_valid_epoch;
};

// Classical osculating elements, used for centroid search and maneuver
// characterization. Angles in rad, a in km.
struct ClassicalElements {
  double a = 0.0;
  double e = 0.0;
  double i = 0.0;
  double raan = 0.0;
  double argp = 0.0;
  double nu = 0.0;
};

MeeState cart_to_mee(const CartesianState& state);
CartesianState mee_to_cart(const MeeState& state);

ClassicalElements classical_from_mee(const MeeState& state);
MeeState mee_from_classical(const ClassicalElements& el, double srp_coeff,
                            double epoch_s);

// Two-body propagation: (p,f,g,h,k) unchanged bitwise, L advanced through
// Kepler's equation and unwrapped monotonically with dt.
MeeState kepler_propagate(const MeeState& state, double dt_s);

// Numerically integrated propagation (adaptive Dormand-Prince 5(4),
// rtol 1e-10 / atol 1e-12). Without a noise seed the map is deterministic;
// with one, process noise is realized as piecewise-constant RTN acceleration
// per nominal macro-step so partial re-propagation reproduces the same
// realization. Negative dt is allowed only with noise disabled.
MeeState perturbed_propagate(const MeeState& state, double dt_s,
                             const ForceModelConfig& cfg,
                             std::optional<std::uint64_t> noise_seed = {});

// Gauss variational equations in MEE: 6x3 matrix mapping an RTN impulse
// (km/s) to the instantaneous change in (p, f, g, h, k, L).
Mat63 sensitivity_matrix(const MeeState& state);

// Earth-fixed longitude of the sub-satellite point, wrapped to (-pi, pi].
double geo_mean_longitude(const MeeState& state);

// --- shared orbital utilities ---

double earth_rotation_angle(double epoch_s);
Vec3 sun_position_eci(double epoch_s);   // km
Vec3 moon_position_eci(double epoch_s);  // km

// Columns are the radial / transverse / normal unit vectors.
Mat3 rtn_frame(const Vec3& r, const Vec3& v);

CartesianState apply_impulse_rtn(const CartesianState& state, const Vec3& dv_rtn);

double mean_motion(const MeeState& state);      // rad/s
double orbital_period(const MeeState& state);   // s

// Coasting time from true longitude L_from to L_to along the osculating
// orbit (longitudes unwrapped; result has the sign of the longitude sweep).
double time_between_longitudes(const MeeState& state, double L_from, double L_to);

// Fraction of the solar disk visible from `pos` (conical Earth shadow).
double illumination_fraction(const Vec3& pos_km, const Vec3& sun_km);

// Cylindrical shadow test used by visibility gating.
bool in_cylindrical_shadow(const Vec3& pos_km, const Vec3& sun_km);

}  // namespace shf::orbits
