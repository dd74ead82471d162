#include "magmpc/quatdyn.hpp"

#include <cmath>
#include <sstream>

namespace magmpc {

namespace {

constexpr double kUnitTolerance = 1e-6;

void require_unit(const Vec4& q, const char* op) {
  if (!q.allFinite()) {
    throw DomainError(std::string(op) + ": non-finite quaternion");
  }
  if (std::abs(q.norm() - 1.0) > kUnitTolerance) {
    std::ostringstream os;
    os << op << ": quaternion norm " << q.norm() << " is not unit";
    throw DomainError(os.str());
  }
}

}  // namespace

InertiaTensor::InertiaTensor(double ix, double iy, double iz)
    : diag_(ix, iy, iz) {
  if (!diag_.allFinite() || ix <= 0.0 || iy <= 0.0 || iz <= 0.0) {
    throw DomainError("inertia: principal moments must be finite and positive");
  }
  // Triangle inequality for a physical rigid body. A tiny relative slack
  // admits thin plates written with rounded decimals.
  const double slack = 1e-12 * diag_.sum();
  if (ix + iy < iz - slack || iy + iz < ix - slack || iz + ix < iy - slack) {
    throw DomainError("inertia: principal moments violate the triangle inequality");
  }
}

Eigen::Matrix<double, 4, 3> kinematic_matrix(const Vec4& q) {
  Eigen::Matrix<double, 4, 3> m;
  // clang-format off
  m <<  q(3), -q(2),  q(1),
        q(2),  q(3), -q(0),
       -q(1),  q(0),  q(3),
       -q(0), -q(1), -q(2);
  // clang-format on
  return 0.5 * m;
}

Vec4 quat_kinematics(const AttitudeState& state) {
  if (!state.omega.allFinite()) {
    throw DomainError("quat_kinematics: non-finite angular velocity");
  }
  require_unit(state.q, "quat_kinematics");
  return kinematic_matrix(state.q) * state.omega;
}

Torque magnetic_torque(const DipoleCommand& m, const FieldSample& b_body) {
  if (b_body.frame != Frame::body) {
    throw FrameMismatchError(std::string("magnetic_torque: field is tagged ") +
                             to_string(b_body.frame) + ", expected body");
  }
  return {m.m.cross(b_body.b)};
}

Vec3 euler_dynamics(const AttitudeState& state, const Torque& tau,
                    const InertiaTensor& inertia) {
  const Vec3& w = state.omega;
  const Vec3& i = inertia.diagonal();
  return {((i.y() - i.z()) * w.y() * w.z() + tau.tau.x()) / i.x(),
          ((i.z() - i.x()) * w.z() * w.x() + tau.tau.y()) / i.y(),
          ((i.x() - i.y()) * w.x() * w.y() + tau.tau.z()) / i.z()};
}

Mat3 attitude_matrix(const Vec4& q) {
  const Vec3 v = q.head<3>();
  const double s = q(3);
  Mat3 cross;
  // clang-format off
  cross <<     0.0, -v.z(),  v.y(),
             v.z(),    0.0, -v.x(),
            -v.y(),  v.x(),    0.0;
  // clang-format on
  return (s * s - v.squaredNorm()) * Mat3::Identity() +
         2.0 * v * v.transpose() - 2.0 * s * cross;
}

StateVector state_derivative(const StateVector& x, const Vec3& m,
                             const Vec3& b_orbital,
                             const InertiaTensor& inertia) {
  const Vec4 q = x.head<4>();
  const Vec3 w = x.tail<3>();
  const Vec3& i = inertia.diagonal();

  const Vec3 b_body = attitude_matrix(q) * b_orbital;
  const Vec3 tau = m.cross(b_body);

  StateVector dx;
  dx.head<4>() = kinematic_matrix(q) * w;
  dx(4) = ((i.y() - i.z()) * w.y() * w.z() + tau.x()) / i.x();
  dx(5) = ((i.z() - i.x()) * w.z() * w.x() + tau.y()) / i.y();
  dx(6) = ((i.x() - i.y()) * w.x() * w.y() + tau.z()) / i.z();
  return dx;
}

namespace detail {

StateVector rk4_advance(const StateVector& x, const Vec3& m,
                        const Vec3& b_orbital, const InertiaTensor& inertia,
                        double dt, Rk4Record* record) {
  const StateVector k1 = state_derivative(x, m, b_orbital, inertia);
  const StateVector x2 = x + 0.5 * dt * k1;
  const StateVector k2 = state_derivative(x2, m, b_orbital, inertia);
  const StateVector x3 = x + 0.5 * dt * k2;
  const StateVector k3 = state_derivative(x3, m, b_orbital, inertia);
  const StateVector x4 = x + dt * k3;
  const StateVector k4 = state_derivative(x4, m, b_orbital, inertia);
  StateVector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const double n = next.head<4>().norm();
  if (record != nullptr) {
    record->stage[0] = x;
    record->stage[1] = x2;
    record->stage[2] = x3;
    record->stage[3] = x4;
    record->q_norm = n;
  }
  next.head<4>() /= n;
  return next;
}

}  // namespace detail

AttitudeState rk4_step(const AttitudeState& state, const Vec3& m,
                       const Vec3& b_orbital, const InertiaTensor& inertia,
                       double t, double dt) {
  if (!(dt > 0.0)) throw DomainError("rk4_step: dt must be positive");

  const StateVector next =
      detail::rk4_advance(state.packed(), m, b_orbital, inertia, dt);
  if (!next.allFinite()) {
    std::ostringstream os;
    os << "integration produced a non-finite state at t = " << t + dt << " s";
    throw IntegrationBlowupError(t + dt, os.str());
  }
  return AttitudeState::unpack(next);
}

AttitudeState step(const AttitudeState& state, const DipoleCommand& m,
                   const FieldFunction& field_at, double t, double dt,
                   const InertiaTensor& inertia) {
  const FieldSample sample = field_at(t);
  if (sample.frame != Frame::orbital) {
    throw FrameMismatchError("step: field function must return orbital-frame samples");
  }
  return rk4_step(state, m.m, sample.b, inertia, t, dt);
}

AttitudeState propagate(const AttitudeState& state, const Vec3& m,
                        const Vec3& b_orbital, const InertiaTensor& inertia,
                        double t0, double duration, int substeps) {
  if (substeps < 1) throw DomainError("propagate: substeps must be >= 1");
  const double h = duration / substeps;
  AttitudeState s = state;
  for (int j = 0; j < substeps; ++j) {
    s = rk4_step(s, m, b_orbital, inertia, t0 + j * h, h);
  }
  return s;
}

double kinetic_energy(const AttitudeState& state, const InertiaTensor& inertia) {
  return 0.5 * state.omega.dot(inertia.diagonal().cwiseProduct(state.omega));
}

}  // namespace magmpc
