#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "magmpc/quatdyn.hpp"
#include "magmpc/types.hpp"

namespace magmpc::nmpc {

/// Controller tuning and internal model.
///
/// The stage cost is (x - x_ref)' Q (x - x_ref) + u' R u with diagonal Q
/// and R, integrated as a left Riemann sum over the horizon with
/// zero-order-hold controls. The quaternion error is the plain
/// componentwise difference; q and -q are not identified.
struct MpcConfig {
  StateVector q_diag = StateVector::Zero();
  Vec3 r_diag = Vec3::Constant(1e-8);
  int horizon = 10;
  double ts = 1.0;       // s
  double u_max = 0.1;    // A m^2
  AttitudeState x_ref;
  InertiaTensor inertia{1.0, 1.0, 1.0};
  int substeps = 20;     // RK4 steps per sampling interval

  // Projected-gradient settings.
  int max_iterations = 200;
  double tolerance = 1e-8;

  /// Throws DomainError naming the first violated field.
  void validate() const;
};

struct ControlSequence {
  std::vector<Vec3> controls;

  static ControlSequence zeros(int horizon);
  int horizon() const { return static_cast<int>(controls.size()); }
  /// Drops the first control and repeats the last one.
  ControlSequence shifted() const;
  Eigen::VectorXd flatten() const;
  static ControlSequence unflatten(const Eigen::VectorXd& u);
  bool within_bounds(double u_max) const;
};

struct PredictedTrajectory {
  std::vector<AttitudeState> states;  // horizon + 1 entries, states[0] = x0
  std::vector<double> times;
};

/// Rolls the model forward over the horizon. The orbital field is sampled
/// at the start of each interval and held across it.
PredictedTrajectory predict(const AttitudeState& x0, const ControlSequence& seq,
                            const FieldFunction& field_at, double t0,
                            const MpcConfig& cfg);

double total_cost(const PredictedTrajectory& traj, const ControlSequence& seq,
                  const MpcConfig& cfg);

/// Exact gradient of total_cost with respect to the 3p control components
/// (ordered step-major: u0x u0y u0z u1x ...). Reverse-mode through the RK4
/// substeps and the per-step quaternion renormalization.
Eigen::VectorXd gradient(const AttitudeState& x0, const ControlSequence& seq,
                         double t0, const FieldFunction& field_at,
                         const MpcConfig& cfg);

struct SolveResult {
  DipoleCommand first;
  ControlSequence full;
  double cost = 0.0;
  double zero_cost = 0.0;   // cost of the all-zero candidate
  double warm_cost = 0.0;   // cost of the warm start (zero_cost if none)
  int iterations = 0;
  bool degraded = false;    // iteration cap reached before convergence
};

/// Projected-gradient solve of the horizon problem under |m_i| <= u_max.
///
/// The all-zero sequence and the warm start (projected onto the box) are
/// both evaluated; descent starts from the cheaper one, so the returned
/// cost never exceeds either.
SolveResult solve(const AttitudeState& x0, double t0,
                  const FieldFunction& field_at, const MpcConfig& cfg,
                  const std::optional<ControlSequence>& warm = std::nullopt);

/// Horizon problem with the field schedule frozen. Exposes the cost and
/// its gradient on flat control vectors; used by solve() and by tests.
class HorizonProblem {
 public:
  HorizonProblem(const AttitudeState& x0, std::vector<Vec3> fields_orbital,
                 const MpcConfig& cfg);
  HorizonProblem(const AttitudeState& x0, double t0,
                 const FieldFunction& field_at, const MpcConfig& cfg);

  int dimension() const { return 3 * cfg_.horizon; }
  double cost(const Eigen::VectorXd& u) const;
  double cost_and_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const;

 private:
  struct Tape;
  double forward(const Eigen::VectorXd& u, Tape* tape) const;

  StateVector x0_;
  std::vector<Vec3> fields_;
  MpcConfig cfg_;
};

}  // namespace magmpc::nmpc
