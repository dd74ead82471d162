#pragma once

#include <numbers>
#include <string>
#include <vector>

#include "magmpc/types.hpp"

namespace magmpc {

inline constexpr double kEarthMu = 398600.4418;      // km^3/s^2
inline constexpr double kEarthRadius = 6378.137;     // km
inline constexpr double kGaussCm3ToTeslaM3 = 1e-10;  // 1 G cm^3 = 1e-4 T * 1e-6 m^3

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into [0, 2*pi).
double wrap_two_pi(double angle);

/// Keplerian elements. Angles in radians, stored wrapped to [0, 2*pi).
struct OrbitalElements {
  double a_km = 0.0;
  double e = 0.0;
  double i = 0.0;
  double m0 = 0.0;    // mean anomaly at epoch
  double raan = 0.0;
  double argp = 0.0;  // argument of perigee

  /// Validates ranges and wraps angles. Throws DomainError on a bad
  /// eccentricity or semi-major axis. A perigee below the Earth's surface is
  /// reported through `warnings` (if given) but accepted.
  static OrbitalElements make(double a_km, double e, double i, double m0,
                              double raan, double argp,
                              std::vector<std::string>* warnings = nullptr);

  double mean_motion() const;  // rad/s
  double period() const;       // s
};

/// Sun-synchronous orbit used by the built-in scenarios.
OrbitalElements sso_elements();

struct DipoleConstants {
  double me = 8.1e25 * kGaussCm3ToTeslaM3;  // T m^3
  double mu = kEarthMu;                     // km^3/s^2

  static DipoleConstants from_gauss_cm3(double me_gauss_cm3, double mu = kEarthMu);
};

/// Newton solve of E - e sin E = M, seeded at E = M.
/// Residual < 1e-12 rad on return; throws NumericalError after 50 iterations.
double solve_kepler(double mean_anomaly, double e);

/// Quadrant-safe true anomaly from eccentric anomaly.
double true_anomaly(double eccentric_anomaly, double e);

/// Eccentric anomaly from true anomaly (inverse of true_anomaly).
double eccentric_anomaly_from_true(double theta, double e);

/// Conic radius r = a(1 - e^2) / (1 + e cos theta), in km.
double orbit_radius(double a_km, double e, double theta);

/// Tilted-dipole field in the orbital frame:
///   B = D_m [ 3/2 sin i sin 2eta, -3/2 sin i (cos 2eta - 1/3), -cos i ],
/// eta = theta + argp, D_m = -Me / r^3 with r in metres.
///
/// Orbital axes: x and y span the orbit plane (x is the along-track-like
/// axis carrying the sin 2eta term), z is the orbit normal that carries the
/// constant -cos i term.
FieldSample dipole_field(const OrbitalElements& elements, double theta,
                         double r_km, const DipoleConstants& consts,
                         double t = 0.0);

/// Two-body propagation to time t (s after epoch) followed by dipole_field.
FieldSample field_at_time(const OrbitalElements& elements,
                          const DipoleConstants& consts, double t);

/// Rotates an orbital-frame sample into the body frame using the
/// orbital-to-body quaternion.
FieldSample to_body_frame(const Vec4& q, const FieldSample& sample);

}  // namespace magmpc
