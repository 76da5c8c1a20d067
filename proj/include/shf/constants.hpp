#pragma once

#include <cmath>

namespace shf::constants {

// Earth gravitational parameter and shape
inline constexpr double kMuEarth = 398600.4418;      // km^3/s^2
inline constexpr double kEarthRadius = 6378.137;     // km (equatorial)
inline constexpr double kEarthFlattening = 1.0 / 298.257223563;
inline constexpr double kJ2 = 1.08262668e-3;
inline constexpr double kJ3 = -2.53265649e-6;
inline constexpr double kJ4 = -1.61962159e-6;
inline constexpr double kJ5 = -2.27296083e-7;
inline constexpr double kJ6 = 5.40681239e-7;

// Earth rotation: constant-rate model, angle measured from the inertial
// x-axis to the Greenwich meridian. Time scale is continuous seconds past
// J2000 (TT-like, no leap seconds).
inline constexpr double kEarthRotationRate = 7.2921150e-5;        // rad/s
inline constexpr double kEraAtJ2000 = 4.894961212823756;          // rad
inline constexpr double kSiderealDay = 86164.0905;                // s
inline constexpr double kSecondsPerDay = 86400.0;

// Third bodies
inline constexpr double kMuSun = 1.32712440018e11;   // km^3/s^2
inline constexpr double kMuMoon = 4902.800066;       // km^3/s^2
inline constexpr double kAstronomicalUnit = 149597870.7;  // km
inline constexpr double kSunRadius = 696000.0;       // km
inline constexpr double kObliquity = 0.40909280422232897;  // rad, J2000 mean

// Cannonball SRP: acceleration = kSrpPressure * B * illum / 1000 [km/s^2]
// with B the area-to-mass-scaled reflectivity in m^2/kg.
inline constexpr double kSrpPressure = 4.56e-6;      // N/m^2 at 1 AU

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;
inline constexpr double kArcsecToRad = kDegToRad / 3600.0;

// Radius of the circular orbit whose period is one sidereal day.
inline double geostationary_radius() {
  const double w = kEarthRotationRate;
  return std::cbrt(kMuEarth / (w * w));
}

// Wrap an angle to (-pi, pi].
inline double wrap_pi(double angle) {
  double a = std::remainder(angle, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

// Wrap an angle to [0, 2*pi).
inline double wrap_two_pi(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

}  // namespace shf::constants
