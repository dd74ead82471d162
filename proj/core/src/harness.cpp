#include "magmpc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "magmpc/pwm.hpp"
#include "magmpc/quatdyn.hpp"

namespace magmpc {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

RunLog run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();

  const double ts = cfg.mpc.ts;
  const auto steps = static_cast<std::size_t>(std::floor(cfg.duration / ts + 1e-9));
  const FieldFunction field_at = [&cfg](double t) {
    return field_at_time(cfg.elements, cfg.consts, t);
  };

  RunLog log;
  log.ts = ts;
  log.notes = cfg.notes;
  if (cfg.pwm_enabled) {
    log.notes.push_back("quantizer maps an exactly zero command to zero");
  }
  log.rows.reserve(steps);

  AttitudeState x = cfg.x0;
  std::optional<nmpc::ControlSequence> warm;
  double t = 0.0;
  try {
    for (std::size_t k = 0; k < steps; ++k) {
      t = static_cast<double>(k) * ts;
      const FieldSample b = field_at(t);
      const nmpc::SolveResult sol = nmpc::solve(x, t, field_at, cfg.mpc, warm);

      // Both the zero sequence and the warm start are mandatory candidates.
      if (sol.cost > std::min(sol.zero_cost, sol.warm_cost) ||
          !sol.full.within_bounds(cfg.mpc.u_max)) {
        ++log.contract_violations;
      }

      LogRow row;
      row.t = t;
      row.state = x;
      row.raw = sol.first.m;
      row.applied = cfg.pwm_enabled
                        ? pwm::quantize_vector(sol.first, cfg.mpc.u_max).m
                        : sol.first.m;
      row.b_orbital = b.b;
      row.cost = sol.cost;
      row.degraded = sol.degraded;
      row.iterations = sol.iterations;
      row.zero_cost = sol.zero_cost;
      row.warm_cost = sol.warm_cost;
      log.rows.push_back(row);

      x = propagate(x, row.applied, b.b, cfg.inertia, t, ts, cfg.substeps);
      warm = sol.full.shifted();
      t = static_cast<double>(k + 1) * ts;
    }
  } catch (const IntegrationBlowupError& e) {
    log.aborted = true;
    log.abort_reason = e.what();
  }
  log.final_state = x;
  log.final_time = log.aborted && !log.rows.empty() ? log.rows.back().t : t;
  return log;
}

// ---------------------------------------------------------------------------

std::string csv_header() {
  return "t,q1,q2,q3,q4,wx,wy,wz,mx,my,mz,mx_raw,my_raw,mz_raw,Bx,By,Bz,J,degraded";
}

void write_csv(const RunLog& log, std::ostream& os) {
  os << csv_header() << '\n';
  for (const LogRow& r : log.rows) {
    os << format_double(r.t);
    for (int i = 0; i < 4; ++i) os << ',' << format_double(r.state.q(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.state.omega(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.applied(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.raw(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.b_orbital(i));
    os << ',' << format_double(r.cost) << ',' << (r.degraded ? 1 : 0) << '\n';
  }
}

void write_csv(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_csv(log, out);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

double error_angle(const Vec4& q, const Vec4& q_ref) {
  const double c = std::min(1.0, std::abs(q.normalized().dot(q_ref.normalized())));
  return 2.0 * std::acos(c);
}

std::size_t sample_count(const RunLog& log) { return log.rows.size() + 1; }

double sample_time(const RunLog& log, std::size_t k) {
  return k < log.rows.size() ? log.rows[k].t : log.final_time;
}

const AttitudeState& sample_state(const RunLog& log, std::size_t k) {
  return k < log.rows.size() ? log.rows[k].state : log.final_state;
}

const AttitudeState& state_at(const RunLog& log, double t) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < sample_count(log); ++k) {
    if (sample_time(log, k) <= t + 1e-9) best = k;
  }
  return sample_state(log, best);
}

namespace {

/// Earliest sample time from which `ok` holds through the final sample.
template <typename Pred>
std::optional<double> sustained_from(const RunLog& log, Pred ok) {
  std::optional<double> since;
  for (std::size_t k = 0; k < sample_count(log); ++k) {
    if (ok(sample_state(log, k))) {
      if (!since) since = sample_time(log, k);
    } else {
      since.reset();
    }
  }
  return since;
}

}  // namespace

Summary summarize(const RunLog& log, const ScenarioConfig& cfg) {
  Summary s;
  s.name = cfg.name;
  s.pwm_enabled = cfg.pwm_enabled;
  s.solves = static_cast<int>(log.rows.size());
  s.duration = log.final_time;
  s.aborted = log.aborted;

  s.initial_omega_norm = sample_state(log, 0).omega.norm();
  s.final_omega_norm = log.final_state.omega.norm();
  s.settle_time = sustained_from(log, [](const AttitudeState& x) {
    return x.omega.norm() <= kDetumbleThreshold;
  });

  const Vec4& q_ref = cfg.mpc.x_ref.q;
  s.final_error_angle = error_angle(log.final_state.q, q_ref);
  s.final_quat_error_plus = (log.final_state.q - q_ref).norm();
  s.final_quat_error_minus = (log.final_state.q + q_ref).norm();
  s.attitude_settle_time = sustained_from(log, [&q_ref](const AttitudeState& x) {
    return rad_to_deg(error_angle(x.q, q_ref)) < kAttitudeThresholdDeg;
  });

  for (const LogRow& r : log.rows) {
    s.effort += r.applied.norm() * log.ts;
    if (r.degraded) ++s.degraded_solves;
  }
  s.contract_violations = log.contract_violations;
  s.notes = log.notes;
  return s;
}

std::string summary_to_json(const Summary& s, const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  const auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["name"] = s.name;
  j["pwm"] = s.pwm_enabled;
  j["solves"] = s.solves;
  j["simulated_time_s"] = s.duration;
  j["aborted"] = s.aborted;
  j["omega_threshold_deg_s"] = rad_to_deg(kDetumbleThreshold);
  j["initial_omega_norm_deg_s"] = rad_to_deg(s.initial_omega_norm);
  j["final_omega_norm_deg_s"] = rad_to_deg(s.final_omega_norm);
  j["settle_time_s"] = opt(s.settle_time);
  j["final_error_angle_deg"] = rad_to_deg(s.final_error_angle);
  j["final_quat_error_plus"] = s.final_quat_error_plus;
  j["final_quat_error_minus"] = s.final_quat_error_minus;
  j["attitude_threshold_deg"] = kAttitudeThresholdDeg;
  j["attitude_settle_time_s"] = opt(s.attitude_settle_time);
  j["control_effort_Am2s"] = s.effort;
  j["degraded_solves"] = s.degraded_solves;
  j["contract_violations"] = s.contract_violations;
  j["constants"] = {{"mu_km3_s2", cfg.consts.mu},
                    {"earth_radius_km", kEarthRadius},
                    {"me_T_m3", cfg.consts.me}};
  j["notes"] = s.notes;
  return j.dump(2);
}

}  // namespace magmpc
