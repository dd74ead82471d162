#pragma once

#include <functional>

#include "magmpc/types.hpp"

namespace magmpc {

using FieldFunction = std::function<FieldSample(double)>;

/// Quaternion rate q_dot = M(q) omega for a scalar-last quaternion.
///
/// M(q) = 1/2 [ q4 -q3  q2;
///              q3  q4 -q1;
///             -q2  q1  q4;
///             -q1 -q2 -q3 ]
Vec4 quat_kinematics(const AttitudeState& state);

/// The 4x3 kinematic matrix M(q), including the 1/2 factor.
Eigen::Matrix<double, 4, 3> kinematic_matrix(const Vec4& q);

/// tau = m x B. B must be body-frame.
Torque magnetic_torque(const DipoleCommand& m, const FieldSample& b_body);

/// Euler's rigid-body equation with diagonal inertia:
/// I omega_dot = (I omega) x omega + tau.
Vec3 euler_dynamics(const AttitudeState& state, const Torque& tau,
                    const InertiaTensor& inertia);

/// Orbital-to-body direction cosine matrix of a scalar-last quaternion,
/// consistent with quat_kinematics() for body-frame rates.
Mat3 attitude_matrix(const Vec4& q);

/// Full state derivative for a held dipole and held orbital-frame field.
StateVector state_derivative(const StateVector& x, const Vec3& m,
                             const Vec3& b_orbital,
                             const InertiaTensor& inertia);

/// One classical RK4 step of length dt with the dipole and the orbital-frame
/// field held constant. The field is rotated into the body frame at every
/// stage. The returned quaternion is renormalized.
///
/// Throws IntegrationBlowupError (carrying t + dt) on a non-finite result.
AttitudeState rk4_step(const AttitudeState& state, const Vec3& m,
                       const Vec3& b_orbital, const InertiaTensor& inertia,
                       double t, double dt);

/// RK4 step that samples the orbital field once at time t and holds it.
AttitudeState step(const AttitudeState& state, const DipoleCommand& m,
                   const FieldFunction& field_at, double t, double dt,
                   const InertiaTensor& inertia);

/// Integrates over one interval of length `duration` split into `substeps`
/// equal RK4 steps, with the dipole and orbital field held.
AttitudeState propagate(const AttitudeState& state, const Vec3& m,
                        const Vec3& b_orbital, const InertiaTensor& inertia,
                        double t0, double duration, int substeps);

double kinetic_energy(const AttitudeState& state, const InertiaTensor& inertia);

namespace detail {

/// Stage inputs of one RK4 step and the pre-normalization quaternion norm.
struct Rk4Record {
  StateVector stage[4];
  double q_norm = 1.0;
};

/// Shared RK4 kernel: advances x by dt and renormalizes the quaternion.
/// No finiteness checks. Fills `record` when non-null.
StateVector rk4_advance(const StateVector& x, const Vec3& m,
                        const Vec3& b_orbital, const InertiaTensor& inertia,
                        double dt, Rk4Record* record = nullptr);

}  // namespace detail

}  // namespace magmpc
