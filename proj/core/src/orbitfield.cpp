#include "magmpc/orbitfield.hpp"

#include <cmath>
#include <sstream>

#include "magmpc/quatdyn.hpp"

namespace magmpc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kKeplerTolerance = 1e-12;
constexpr int kKeplerMaxIterations = 50;

void require_eccentricity(double e, const char* op) {
  if (!std::isfinite(e) || e < 0.0 || e >= 1.0) {
    std::ostringstream os;
    os << op << ": eccentricity " << e << " outside [0, 1)";
    throw DomainError(os.str());
  }
}

}  // namespace

double wrap_two_pi(double angle) {
  double r = std::fmod(angle, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative value can round back up to exactly 2*pi.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

OrbitalElements OrbitalElements::make(double a_km, double e, double i,
                                      double m0, double raan, double argp,
                                      std::vector<std::string>* warnings) {
  require_eccentricity(e, "orbital elements");
  if (!std::isfinite(a_km) || a_km <= 0.0) {
    throw DomainError("orbital elements: semi-major axis must be positive");
  }
  for (double angle : {i, m0, raan, argp}) {
    if (!std::isfinite(angle)) {
      throw DomainError("orbital elements: non-finite angle");
    }
  }
  if (warnings != nullptr && a_km * (1.0 - e) <= kEarthRadius) {
    std::ostringstream os;
    os << "perigee radius " << a_km * (1.0 - e) << " km is below the Earth radius "
       << kEarthRadius << " km";
    warnings->push_back(os.str());
  }
  return {a_km, e, wrap_two_pi(i), wrap_two_pi(m0), wrap_two_pi(raan),
          wrap_two_pi(argp)};
}

double OrbitalElements::mean_motion() const {
  return std::sqrt(kEarthMu / (a_km * a_km * a_km));
}

double OrbitalElements::period() const { return kTwoPi / mean_motion(); }

OrbitalElements sso_elements() {
  return OrbitalElements::make(6691.6, 0.046440, deg_to_rad(96.7),
                               deg_to_rad(240.49), deg_to_rad(100.90),
                               deg_to_rad(119.70));
}

DipoleConstants DipoleConstants::from_gauss_cm3(double me_gauss_cm3, double mu) {
  if (!(me_gauss_cm3 > 0.0) || !(mu > 0.0)) {
    throw DomainError("dipole constants must be positive");
  }
  return {me_gauss_cm3 * kGaussCm3ToTeslaM3, mu};
}

double solve_kepler(double mean_anomaly, double e) {
  require_eccentricity(e, "solve_kepler");
  if (!std::isfinite(mean_anomaly)) {
    throw DomainError("solve_kepler: non-finite mean anomaly");
  }
  double ecc = mean_anomaly;
  for (int it = 0; it < kKeplerMaxIterations; ++it) {
    const double f = ecc - e * std::sin(ecc) - mean_anomaly;
    if (std::abs(f) < kKeplerTolerance) {
      // One more step usually lands on round-off; keep it only if it helps.
      const double polished = ecc - f / (1.0 - e * std::cos(ecc));
      const double fp = polished - e * std::sin(polished) - mean_anomaly;
      return std::abs(fp) < std::abs(f) ? polished : ecc;
    }
    ecc -= f / (1.0 - e * std::cos(ecc));
  }
  const double f = ecc - e * std::sin(ecc) - mean_anomaly;
  if (std::abs(f) < kKeplerTolerance) return ecc;
  std::ostringstream os;
  os << "solve_kepler: no convergence for M = " << mean_anomaly << ", e = " << e;
  throw NumericalError(os.str());
}

double true_anomaly(double eccentric_anomaly, double e) {
  require_eccentricity(e, "true_anomaly");
  const double half = 0.5 * eccentric_anomaly;
  // atan2 keeps theta in the same half-revolution as E.
  return 2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(half),
                          std::sqrt(1.0 - e) * std::cos(half));
}

double eccentric_anomaly_from_true(double theta, double e) {
  require_eccentricity(e, "eccentric_anomaly_from_true");
  const double half = 0.5 * theta;
  return 2.0 * std::atan2(std::sqrt(1.0 - e) * std::sin(half),
                          std::sqrt(1.0 + e) * std::cos(half));
}

double orbit_radius(double a_km, double e, double theta) {
  return a_km * (1.0 - e * e) / (1.0 + e * std::cos(theta));
}

FieldSample dipole_field(const OrbitalElements& elements, double theta,
                         double r_km, const DipoleConstants& consts, double t) {
  if (!(r_km > 0.0)) throw DomainError("dipole_field: radius must be positive");
  const double r_m = r_km * 1e3;
  const double dm = -consts.me / (r_m * r_m * r_m);
  const double eta = theta + elements.argp;
  const double si = std::sin(elements.i);
  return {dm * Vec3(1.5 * si * std::sin(2.0 * eta),
                    -1.5 * si * (std::cos(2.0 * eta) - 1.0 / 3.0),
                    -std::cos(elements.i)),
          Frame::orbital, t};
}

FieldSample field_at_time(const OrbitalElements& elements,
                          const DipoleConstants& consts, double t) {
  const double n = std::sqrt(consts.mu / (elements.a_km * elements.a_km * elements.a_km));
  // Reducing M mod 2*pi keeps the Newton seed close for long runs.
  const double mean_anomaly = wrap_two_pi(elements.m0 + n * t);
  const double ecc = solve_kepler(mean_anomaly, elements.e);
  const double theta = true_anomaly(ecc, elements.e);
  const double r = orbit_radius(elements.a_km, elements.e, theta);
  return dipole_field(elements, theta, r, consts, t);
}

FieldSample to_body_frame(const Vec4& q, const FieldSample& sample) {
  if (sample.frame != Frame::orbital) {
    throw FrameMismatchError("to_body_frame: sample is already body-frame");
  }
  if (!q.allFinite() || std::abs(q.norm() - 1.0) > 1e-6) {
    throw DomainError("to_body_frame: quaternion is not unit");
  }
  return {attitude_matrix(q) * sample.b, Frame::body, sample.t};
}

}  // namespace magmpc
