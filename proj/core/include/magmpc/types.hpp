#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>

namespace magmpc {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using StateVector = Eigen::Matrix<double, 7, 1>;
using StateMatrix = Eigen::Matrix<double, 7, 7>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside an operation's domain (non-finite values, bad parameters).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A field sample was handed to an operation expecting the other frame.
class FrameMismatchError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to meet its tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The integrator produced a non-finite state.
class IntegrationBlowupError : public Error {
 public:
  IntegrationBlowupError(double time, const std::string& what)
      : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Attitude quaternion (scalar-last: q(3) is the scalar part) and body rate.
///
/// The quaternion rotates orbital-frame coordinates into body-frame
/// coordinates through attitude_matrix(); its time derivative follows
/// quat_kinematics().
struct AttitudeState {
  Vec4 q = Vec4(0.0, 0.0, 0.0, 1.0);
  Vec3 omega = Vec3::Zero();  // rad/s, body frame

  /// Packs into the 7-component vector [q1 q2 q3 q4 wx wy wz].
  StateVector packed() const {
    StateVector x;
    x << q, omega;
    return x;
  }

  static AttitudeState unpack(const StateVector& x) {
    return {x.head<4>(), x.tail<3>()};
  }

  bool finite() const { return q.allFinite() && omega.allFinite(); }
};

/// Principal moments of inertia (kg m^2).
class InertiaTensor {
 public:
  InertiaTensor(double ix, double iy, double iz);

  double ix() const { return diag_.x(); }
  double iy() const { return diag_.y(); }
  double iz() const { return diag_.z(); }
  const Vec3& diagonal() const { return diag_; }

 private:
  Vec3 diag_;
};

/// Commanded magnetic dipole moment (A m^2), body frame.
struct DipoleCommand {
  Vec3 m = Vec3::Zero();
};

/// Body-frame torque (N m).
struct Torque {
  Vec3 tau = Vec3::Zero();
};

enum class Frame { orbital, body };

inline const char* to_string(Frame f) {
  return f == Frame::orbital ? "orbital" : "body";
}

/// Geomagnetic field vector (tesla) tagged with its frame and sample time.
struct FieldSample {
  Vec3 b = Vec3::Zero();
  Frame frame = Frame::orbital;
  double t = 0.0;
};

}  // namespace magmpc
