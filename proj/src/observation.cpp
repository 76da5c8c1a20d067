#include "shf/observation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "shf/constants.hpp"

namespace shf::obs {

namespace c = shf::constants;

void SensorSite::validate() const {
  if (std::abs(latitude_rad) > 0.5 * c::kPi)
    throw std::domain_error("SensorSite: |latitude| <= pi/2");
  if (elevation_mask_rad < 0.0 || elevation_mask_rad >= 0.5 * c::kPi)
    throw std::domain_error("SensorSite: elevation mask in [0, pi/2)");
}

void Attributable::validate() const {
  if (std::abs(delta) > 0.5 * c::kPi)
    throw std::domain_error("Attributable: |delta| <= pi/2");
  const Eigen::LLT<Mat4> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("Attributable: covariance not positive definite");
}

namespace {

Vec3 site_ecef(const SensorSite& site) {
  const double e2 = c::kEarthFlattening * (2.0 - c::kEarthFlattening);
  const double sphi = std::sin(site.latitude_rad);
  const double cphi = std::cos(site.latitude_rad);
  const double n = c::kEarthRadius / std::sqrt(1.0 - e2 * sphi * sphi);
  return Vec3((n + site.altitude_km) * cphi * std::cos(site.longitude_rad),
              (n + site.altitude_km) * cphi * std::sin(site.longitude_rad),
              (n * (1.0 - e2) + site.altitude_km) * sphi);
}

Vec3 rotate_z(const Vec3& v, double angle) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  return Vec3(ca * v.x() - sa * v.y(), sa * v.x() + ca * v.y(), v.z());
}

}  // namespace

void site_state_eci(const SensorSite& site, double epoch_s, Vec3& r, Vec3& v) {
  const double theta = orbits::earth_rotation_angle(epoch_s);
  r = rotate_z(site_ecef(site), theta);
  v = Vec3(-c::kEarthRotationRate * r.y(), c::kEarthRotationRate * r.x(), 0.0);
}

Vec3 site_zenith_eci(const SensorSite& site, double epoch_s) {
  const double cphi = std::cos(site.latitude_rad);
  const Vec3 up_ecef(cphi * std::cos(site.longitude_rad),
                     cphi * std::sin(site.longitude_rad),
                     std::sin(site.latitude_rad));
  return rotate_z(up_ecef, orbits::earth_rotation_angle(epoch_s));
}

std::pair<Vec3, Vec3> line_of_sight(const Attributable& attr) {
  const double ca = std::cos(attr.alpha), sa = std::sin(attr.alpha);
  const double cd = std::cos(attr.delta), sd = std::sin(attr.delta);
  const Vec3 w(ca * cd, sa * cd, sd);
  const Vec3 wdot = attr.alpha_rate * Vec3(-sa * cd, ca * cd, 0.0) +
                    attr.delta_rate * Vec3(-ca * sd, -sa * sd, cd);
  return {w, wdot};
}

Attributable measure(const orbits::CartesianState& state, const SensorSite& site,
                     double epoch_s) {
  Vec3 rs, vs;
  site_state_eci(site, epoch_s, rs, vs);
  const Vec3 d = state.position_km - rs;
  const double rho = d.norm();
  if (rho < 1e-9)
    throw std::domain_error("measure: object coincides with the site");
  const Vec3 w = d / rho;
  const Vec3 ddot = state.velocity_km_s - vs;
  const double rho_rate = w.dot(ddot);
  const Vec3 wdot = (ddot - rho_rate * w) / rho;

  Attributable attr;
  attr.alpha = std::atan2(w.y(), w.x());
  attr.delta = std::asin(std::clamp(w.z(), -1.0, 1.0));
  const double cd = std::cos(attr.delta);
  if (std::abs(cd) < 1e-12)
    throw std::domain_error("measure: polar line of sight");
  attr.delta_rate = wdot.z() / cd;
  attr.alpha_rate =
      (wdot.y() * std::cos(attr.alpha) - wdot.x() * std::sin(attr.alpha)) / cd;
  attr.epoch_s = epoch_s;
  attr.site = site;
  return attr;
}

orbits::CartesianState state_from_range(const Attributable& attr, double rho_km,
                                        double rho_rate_km_s) {
  if (rho_km <= 0.0) throw std::domain_error("state_from_range: rho > 0");
  Vec3 rs, vs;
  site_state_eci(attr.site, attr.epoch_s, rs, vs);
  const auto [w, wdot] = line_of_sight(attr);
  orbits::CartesianState out;
  out.position_km = rs + rho_km * w;
  out.velocity_km_s = vs + rho_km * wdot + rho_rate_km_s * w;
  out.epoch_s = attr.epoch_s;
  return out;
}

Attributable attributable_from_track(const Track& track) {
  const std::size_t n = track.points.size();
  if (n < 3)
    throw std::invalid_argument("attributable_from_track: need >= 3 points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(track.points[i].epoch_s > track.points[i - 1].epoch_s))
      throw std::invalid_argument("attributable_from_track: epochs not increasing");

  double t_mean = 0.0;
  for (const auto& pt : track.points) t_mean += pt.epoch_s;
  t_mean /= static_cast<double>(n);

  // unwrap alpha against the first point before fitting
  std::vector<double> alpha(n), delta(n), tau(n);
  const double a0 = track.points[0].alpha;
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] = a0 + c::wrap_pi(track.points[i].alpha - a0);
    delta[i] = track.points[i].delta;
    tau[i] = track.points[i].epoch_s - t_mean;
  }

  double stt = 0.0;
  for (double t : tau) stt += t * t;
  if (stt <= 0.0)
    throw std::invalid_argument("attributable_from_track: degenerate epochs");

  auto fit = [&](const std::vector<double>& y) {
    double mean = 0.0, slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean += y[i];
      slope += tau[i] * y[i];
    }
    return std::pair<double, double>{mean / static_cast<double>(n), slope / stt};
  };

  const auto [am, ar] = fit(alpha);
  const auto [dm, dr] = fit(delta);

  Attributable attr;
  attr.alpha = c::wrap_pi(am);
  attr.delta = dm;
  attr.alpha_rate = ar;
  attr.delta_rate = dr;
  attr.epoch_s = t_mean;
  attr.site = track.site;

  const double s2 = track.site.noise_sigma_rad * track.site.noise_sigma_rad;
  attr.covariance = Mat4::Zero();
  attr.covariance(0, 0) = s2 / static_cast<double>(n);
  attr.covariance(1, 1) = s2 / static_cast<double>(n);
  attr.covariance(2, 2) = s2 / stt;
  attr.covariance(3, 3) = s2 / stt;
  return attr;
}

double elevation_angle(const Vec3& object_eci, const SensorSite& site,
                       double epoch_s) {
  Vec3 rs, vs;
  site_state_eci(site, epoch_s, rs, vs);
  const Vec3 d = (object_eci - rs).normalized();
  return std::asin(std::clamp(d.dot(site_zenith_eci(site, epoch_s)), -1.0, 1.0));
}

bool visibility(const orbits::CartesianState& state, const SensorSite& site,
                const Vec3& sun_position_km, double epoch_s) {
  if (elevation_angle(state.position_km, site, epoch_s) <=
      site.elevation_mask_rad)
    return false;

  // solar phase angle at the object between the site and the Sun
  Vec3 rs, vs;
  site_state_eci(site, epoch_s, rs, vs);
  const Vec3 to_site = (rs - state.position_km).normalized();
  const Vec3 to_sun = (sun_position_km - state.position_km).normalized();
  const double phase = std::acos(std::clamp(to_site.dot(to_sun), -1.0, 1.0));
  if (phase > 0.5 * c::kPi) return false;

  if (orbits::in_cylindrical_shadow(state.position_km, sun_position_km))
    return false;

  // optical survey: site must be in darkness
  if (elevation_angle(sun_position_km, site, epoch_s) >= -10.0 * c::kDegToRad)
    return false;
  return true;
}

// ---------------------------------------------------------------------------
// CSV schema
// ---------------------------------------------------------------------------

void save_attributables_csv(const std::filesystem::path& path,
                            const std::vector<Attributable>& attrs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "epoch_s,alpha_rad,delta_rad,alpha_rate_rad_s,delta_rate_rad_s,site";
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out << ",cov_" << i << j;
  out << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const auto& a : attrs) {
    num(a.epoch_s);
    out << ',';
    num(a.alpha);
    out << ',';
    num(a.delta);
    out << ',';
    num(a.alpha_rate);
    out << ',';
    num(a.delta_rate);
    out << ',' << a.site.name;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        out << ',';
        num(a.covariance(i, j));
      }
    out << "\n";
  }
}

std::vector<Attributable> load_attributables_csv(
    const std::filesystem::path& path, const std::vector<SensorSite>& sites) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<Attributable> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6 + 16 && fields.size() != 6 + 10)
      throw std::runtime_error("attributable CSV: bad column count in " +
                               path.string());
    Attributable a;
    a.epoch_s = std::stod(fields[0]);
    a.alpha = std::stod(fields[1]);
    a.delta = std::stod(fields[2]);
    a.alpha_rate = std::stod(fields[3]);
    a.delta_rate = std::stod(fields[4]);
    bool found = false;
    for (const auto& s : sites)
      if (s.name == fields[5]) {
        a.site = s;
        found = true;
        break;
      }
    if (!found)
      throw std::runtime_error("attributable CSV: unknown site " + fields[5]);
    Mat4 cov = Mat4::Zero();
    if (fields.size() == 6 + 16) {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) cov(i, j) = std::stod(fields[6 + 4 * i + j]);
    } else {
      int idx = 6;
      for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) cov(i, j) = std::stod(fields[idx++]);
    }
    a.covariance = 0.5 * (cov + cov.transpose());  // symmetrize on load
    out.push_back(a);
  }
  return out;
}

}  // namespace shf::obs
