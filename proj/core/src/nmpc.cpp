#include "magmpc/nmpc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace magmpc::nmpc {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 50;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

/// Vector-Jacobian product of state_derivative at x: returns v' df/dx and
/// accumulates v' df/dm into bar_m.
StateVector derivative_vjp(const StateVector& x, const Vec3& m, const Vec3& b,
                           const Vec3& inertia, const StateVector& v,
                           Vec3& bar_m) {
  const Vec3 qv = x.head<3>();
  const double q4 = x(3);
  const Vec3 w = x.tail<3>();
  const Vec4 vq = v.head<4>();
  const Vec3 z = v.tail<3>().cwiseQuotient(inertia);

  const Vec3 b_body = attitude_matrix(x.head<4>()) * b;
  bar_m += b_body.cross(z);

  StateVector out;

  // Kinematics: q_dot = 1/2 Omega(w) q, linear in q.
  // d(q_dot_v)/d(q_v) = -1/2 [w x], d(q_dot_v)/d(q4) = w/2,
  // d(q_dot_4)/d(q_v) = -w'/2.
  Vec3 bar_qv = 0.5 * (skew(w) * vq.head<3>()) - 0.5 * vq(3) * w;
  double bar_q4 = 0.5 * w.dot(vq.head<3>());

  // Magnetic torque through the attitude matrix: d(m x A(q)b)/dq = [m x] D.
  const Vec3 y = -m.cross(z);  // [m x]' z
  bar_qv += -2.0 * qv * b.dot(y) + 2.0 * qv.dot(b) * y + 2.0 * b * qv.dot(y) -
            2.0 * q4 * b.cross(y);
  bar_q4 += (2.0 * q4 * b - 2.0 * qv.cross(b)).dot(y);

  out.head<3>() = bar_qv;
  out(3) = bar_q4;

  // Kinematics w.r.t. omega and the gyroscopic term.
  const Vec3 iw = inertia.cwiseProduct(w);
  out.tail<3>() = kinematic_matrix(x.head<4>()).transpose() * vq -
                  iw.cross(z) + inertia.cwiseProduct(w.cross(z));
  return out;
}

double quadratic(const StateVector& e, const StateVector& diag) {
  return e.dot(diag.cwiseProduct(e));
}

double quadratic(const Vec3& u, const Vec3& diag) {
  return u.dot(diag.cwiseProduct(u));
}

Eigen::VectorXd project(Eigen::VectorXd u, double u_max) {
  return u.cwiseMax(-u_max).cwiseMin(u_max);
}

double projected_gradient_norm(const Eigen::VectorXd& u,
                               const Eigen::VectorXd& g, double u_max) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const bool blocked = (u(i) <= -u_max && g(i) > 0.0) ||
                         (u(i) >= u_max && g(i) < 0.0);
    if (!blocked) sum += g(i) * g(i);
  }
  return std::sqrt(sum);
}

std::vector<Vec3> sample_fields(double t0, const FieldFunction& field_at,
                                const MpcConfig& cfg) {
  std::vector<Vec3> fields;
  fields.reserve(static_cast<std::size_t>(cfg.horizon));
  for (int k = 0; k < cfg.horizon; ++k) {
    const FieldSample s = field_at(t0 + k * cfg.ts);
    if (s.frame != Frame::orbital) {
      throw FrameMismatchError("nmpc: field function must return orbital-frame samples");
    }
    fields.push_back(s.b);
  }
  return fields;
}

}  // namespace

// ---------------------------------------------------------------------------

void MpcConfig::validate() const {
  if ((q_diag.array() < 0.0).any() || !q_diag.allFinite()) {
    throw DomainError("mpc: Q diagonal entries must be >= 0");
  }
  if ((r_diag.array() <= 0.0).any() || !r_diag.allFinite()) {
    throw DomainError("mpc: R diagonal entries must be > 0");
  }
  if (horizon < 1) throw DomainError("mpc: horizon must be >= 1");
  if (!(ts > 0.0) || !std::isfinite(ts)) throw DomainError("mpc: Ts must be > 0");
  if (!(u_max > 0.0) || !std::isfinite(u_max)) {
    throw DomainError("mpc: u_max must be > 0");
  }
  if (!x_ref.finite() || std::abs(x_ref.q.norm() - 1.0) > 1e-9) {
    throw DomainError("mpc: reference quaternion must be unit within 1e-9");
  }
  if (substeps < 1) throw DomainError("mpc: substeps must be >= 1");
  if (max_iterations < 1) throw DomainError("mpc: max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw DomainError("mpc: tolerance must be > 0");
}

ControlSequence ControlSequence::zeros(int horizon) {
  return {std::vector<Vec3>(static_cast<std::size_t>(horizon), Vec3::Zero())};
}

ControlSequence ControlSequence::shifted() const {
  if (controls.empty()) return *this;
  ControlSequence out;
  out.controls.assign(controls.begin() + 1, controls.end());
  out.controls.push_back(controls.back());
  return out;
}

Eigen::VectorXd ControlSequence::flatten() const {
  Eigen::VectorXd u(3 * static_cast<Eigen::Index>(controls.size()));
  for (std::size_t k = 0; k < controls.size(); ++k) {
    u.segment<3>(3 * static_cast<Eigen::Index>(k)) = controls[k];
  }
  return u;
}

ControlSequence ControlSequence::unflatten(const Eigen::VectorXd& u) {
  ControlSequence out;
  out.controls.reserve(static_cast<std::size_t>(u.size() / 3));
  for (Eigen::Index k = 0; k + 2 < u.size(); k += 3) {
    out.controls.push_back(u.segment<3>(k));
  }
  return out;
}

bool ControlSequence::within_bounds(double u_max) const {
  return std::all_of(controls.begin(), controls.end(), [u_max](const Vec3& m) {
    return m.allFinite() && m.cwiseAbs().maxCoeff() <= u_max;
  });
}

// ---------------------------------------------------------------------------

PredictedTrajectory predict(const AttitudeState& x0, const ControlSequence& seq,
                            const FieldFunction& field_at, double t0,
                            const MpcConfig& cfg) {
  if (seq.horizon() != cfg.horizon) {
    throw DomainError("predict: sequence length differs from the horizon");
  }
  if (!seq.within_bounds(cfg.u_max)) {
    throw DomainError("predict: control sequence violates |m_i| <= u_max");
  }
  PredictedTrajectory traj;
  traj.states.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
  traj.times.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
  traj.states.push_back(x0);
  traj.times.push_back(t0);

  const std::vector<Vec3> fields = sample_fields(t0, field_at, cfg);
  AttitudeState x = x0;
  for (int k = 0; k < cfg.horizon; ++k) {
    const double tk = t0 + k * cfg.ts;
    x = propagate(x, seq.controls[static_cast<std::size_t>(k)],
                  fields[static_cast<std::size_t>(k)], cfg.inertia, tk, cfg.ts,
                  cfg.substeps);
    traj.states.push_back(x);
    traj.times.push_back(t0 + (k + 1) * cfg.ts);
  }
  return traj;
}

double total_cost(const PredictedTrajectory& traj, const ControlSequence& seq,
                  const MpcConfig& cfg) {
  if (seq.horizon() != cfg.horizon ||
      traj.states.size() != static_cast<std::size_t>(cfg.horizon) + 1) {
    throw DomainError("total_cost: trajectory and sequence do not match the horizon");
  }
  const StateVector ref = cfg.x_ref.packed();
  double j = 0.0;
  for (std::size_t k = 0; k < seq.controls.size(); ++k) {
    const StateVector e = traj.states[k + 1].packed() - ref;
    j += cfg.ts * quadratic(e, cfg.q_diag);
    j += cfg.ts * quadratic(seq.controls[k], cfg.r_diag);
  }
  return j;
}

Eigen::VectorXd gradient(const AttitudeState& x0, const ControlSequence& seq,
                         double t0, const FieldFunction& field_at,
                         const MpcConfig& cfg) {
  if (seq.horizon() != cfg.horizon) {
    throw DomainError("gradient: sequence length differs from the horizon");
  }
  HorizonProblem problem(x0, t0, field_at, cfg);
  Eigen::VectorXd g;
  problem.cost_and_gradient(seq.flatten(), g);
  return g;
}

// ---------------------------------------------------------------------------

struct HorizonProblem::Tape {
  std::vector<detail::Rk4Record> records;  // horizon * substeps
  std::vector<StateVector> states;         // horizon + 1
};

HorizonProblem::HorizonProblem(const AttitudeState& x0,
                               std::vector<Vec3> fields_orbital,
                               const MpcConfig& cfg)
    : x0_(x0.packed()), fields_(std::move(fields_orbital)), cfg_(cfg) {
  cfg_.validate();
  if (fields_.size() != static_cast<std::size_t>(cfg_.horizon)) {
    throw DomainError("nmpc: one field sample per horizon step is required");
  }
  if (!x0_.allFinite()) throw DomainError("nmpc: non-finite initial state");
}

HorizonProblem::HorizonProblem(const AttitudeState& x0, double t0,
                               const FieldFunction& field_at,
                               const MpcConfig& cfg)
    : HorizonProblem(x0, sample_fields(t0, field_at, cfg), cfg) {}

double HorizonProblem::forward(const Eigen::VectorXd& u, Tape* tape) const {
  const int p = cfg_.horizon;
  const int sub = cfg_.substeps;
  const double h = cfg_.ts / sub;
  const StateVector ref = cfg_.x_ref.packed();

  if (tape != nullptr) {
    tape->records.resize(static_cast<std::size_t>(p * sub));
    tape->states.resize(static_cast<std::size_t>(p) + 1);
    tape->states[0] = x0_;
  }

  StateVector x = x0_;
  double j = 0.0;
  for (int k = 0; k < p; ++k) {
    const Vec3 m = u.segment<3>(3 * k);
    const Vec3& b = fields_[static_cast<std::size_t>(k)];
    for (int s = 0; s < sub; ++s) {
      detail::Rk4Record* rec =
          tape != nullptr ? &tape->records[static_cast<std::size_t>(k * sub + s)]
                          : nullptr;
      x = detail::rk4_advance(x, m, b, cfg_.inertia, h, rec);
    }
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "nmpc: prediction diverged at horizon step " << k + 1;
      throw IntegrationBlowupError((k + 1) * cfg_.ts, os.str());
    }
    if (tape != nullptr) tape->states[static_cast<std::size_t>(k) + 1] = x;
    const StateVector e = x - ref;
    j += cfg_.ts * quadratic(e, cfg_.q_diag);
    j += cfg_.ts * quadratic(Vec3(m), cfg_.r_diag);
  }
  return j;
}

double HorizonProblem::cost(const Eigen::VectorXd& u) const {
  return forward(u, nullptr);
}

double HorizonProblem::cost_and_gradient(const Eigen::VectorXd& u,
                                         Eigen::VectorXd& grad) const {
  Tape tape;
  const double j = forward(u, &tape);

  const int p = cfg_.horizon;
  const int sub = cfg_.substeps;
  const double h = cfg_.ts / sub;
  const double a = h / 6.0;
  const Vec3& inertia = cfg_.inertia.diagonal();
  const StateVector ref = cfg_.x_ref.packed();

  grad.resize(3 * p);
  StateVector lambda = StateVector::Zero();
  for (int k = p - 1; k >= 0; --k) {
    const auto kk = static_cast<std::size_t>(k);
    lambda += 2.0 * cfg_.ts * cfg_.q_diag.cwiseProduct(tape.states[kk + 1] - ref);

    const Vec3 m = u.segment<3>(3 * k);
    const Vec3& b = fields_[kk];
    Vec3 bar_m = Vec3::Zero();
    for (int s = sub - 1; s >= 0; --s) {
      const detail::Rk4Record& rec = tape.records[kk * static_cast<std::size_t>(sub) +
                                                  static_cast<std::size_t>(s)];
      // Output of this substep: first stage of the next one, or the
      // interval end state.
      const StateVector& out =
          s + 1 < sub ? tape.records[kk * static_cast<std::size_t>(sub) +
                                     static_cast<std::size_t>(s) + 1]
                            .stage[0]
                      : tape.states[kk + 1];

      // Through q <- q / |q|.
      const Vec4 yq = out.head<4>();
      const Vec4 lq = lambda.head<4>();
      lambda.head<4>() = (lq - yq * yq.dot(lq)) / rec.q_norm;

      const StateVector bar_k4 = a * lambda;
      const StateVector v4 = derivative_vjp(rec.stage[3], m, b, inertia, bar_k4, bar_m);
      const StateVector bar_k3 = 2.0 * a * lambda + h * v4;
      const StateVector v3 = derivative_vjp(rec.stage[2], m, b, inertia, bar_k3, bar_m);
      const StateVector bar_k2 = 2.0 * a * lambda + 0.5 * h * v3;
      const StateVector v2 = derivative_vjp(rec.stage[1], m, b, inertia, bar_k2, bar_m);
      const StateVector bar_k1 = a * lambda + 0.5 * h * v2;
      const StateVector v1 = derivative_vjp(rec.stage[0], m, b, inertia, bar_k1, bar_m);
      lambda += v1 + v2 + v3 + v4;
    }
    grad.segment<3>(3 * k) = bar_m + 2.0 * cfg_.ts * cfg_.r_diag.cwiseProduct(m);
  }
  return j;
}

// ---------------------------------------------------------------------------

SolveResult solve(const AttitudeState& x0, double t0,
                  const FieldFunction& field_at, const MpcConfig& cfg,
                  const std::optional<ControlSequence>& warm) {
  cfg.validate();
  const HorizonProblem problem(x0, t0, field_at, cfg);
  const double u_max = cfg.u_max;
  const Eigen::Index n = problem.dimension();

  SolveResult result;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  result.zero_cost = problem.cost(u);
  result.warm_cost = result.zero_cost;
  double j = result.zero_cost;

  if (warm.has_value()) {
    if (warm->horizon() != cfg.horizon) {
      throw DomainError("solve: warm start length differs from the horizon");
    }
    const Eigen::VectorXd uw = project(warm->flatten(), u_max);
    result.warm_cost = problem.cost(uw);
    // Ties keep the zero sequence.
    if (result.warm_cost < j) {
      u = uw;
      j = result.warm_cost;
    }
  }

  Eigen::VectorXd g;
  j = problem.cost_and_gradient(u, g);

  double alpha = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (projected_gradient_norm(u, g, u_max) < cfg.tolerance * (1.0 + std::abs(j))) {
      converged = true;
      break;
    }
    if (alpha <= 0.0) {
      const double gmax = g.cwiseAbs().maxCoeff();
      alpha = u_max / gmax;
    }

    // Backtracking along the projection arc.
    Eigen::VectorXd u_new;
    double j_new = j;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      u_new = project(u - alpha * g, u_max);
      const double decrease = g.dot(u_new - u);
      if (decrease >= 0.0) break;  // projection leaves no descent direction
      j_new = problem.cost(u_new);
      if (j_new <= j + kArmijo * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No representable descent remains along -g: stationary to
      // working precision.
      converged = true;
      break;
    }

    Eigen::VectorXd g_new;
    j_new = problem.cost_and_gradient(u_new, g_new);
    const Eigen::VectorXd s = u_new - u;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    // Barzilai-Borwein trial step for the next iteration.
    alpha = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * alpha;
    alpha = std::clamp(alpha, 1e-12, 1e12);

    u = std::move(u_new);
    g = std::move(g_new);
    j = j_new;
  }

  result.full = ControlSequence::unflatten(u);
  result.first = {result.full.controls.front()};
  result.cost = j;
  result.iterations = it;
  result.degraded = !converged;
  return result;
}

}  // namespace magmpc::nmpc
