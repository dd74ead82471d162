// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "magmpc/harness.hpp"
#include "magmpc/nmpc.hpp"
#include "magmpc/orbitfield.hpp"
#include "magmpc/pwm.hpp"
#include "magmpc/quatdyn.hpp"

using namespace magmpc;

namespace {

// Tolerances.
constexpr double kSettleTargetMin = 25.0;
constexpr double kSettleGateMin = 40.0;
constexpr double kAttitudeGateMin = 60.0;
constexpr double kAttitudeTargetMin = 25.0;
constexpr int kRandomQuantizerInputs = 100000;
constexpr double kNormDriftTol = 1e-9;
constexpr double kTorqueOrthoTol = 1e-15;
constexpr double kRateConservationTol = 1e-9;
constexpr double kOrderRatioMin = 15.0;
constexpr int kDynamicsSteps = 10000;
constexpr int kKeplerSamples = 100000;
constexpr double kKeplerEccMax = 0.95;
constexpr double kKeplerResidualTol = 1e-12;
constexpr double kPeriodicityTol = 1e-12;
constexpr double kFieldMin = 1.5e-5;
constexpr double kFieldMax = 6e-5;
constexpr int kGradientInstances = 50;
constexpr double kGradientRelTol = 1e-4;
constexpr int kGridInstances = 20;

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            const std::string& warning = {}) {
  if (!pass) ++g_failures;
  std::printf("%s criterion %d (%s): %s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), warning.empty() ? "" : (" | WARN " + warning).c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Run {
  ScenarioConfig cfg;
  RunLog log;
  Summary summary;
  std::string csv;
  double wall_s = 0.0;
};

Run run(ScenarioConfig cfg) {
  const auto start = std::chrono::steady_clock::now();
  Run r;
  r.log = run_scenario(cfg);
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.summary = summarize(r.log, cfg);
  std::ostringstream os;
  write_csv(r.log, os);
  r.csv = os.str();
  r.cfg = std::move(cfg);
  return r;
}

ScenarioConfig preset(const char* name, bool pwm) {
  ScenarioConfig cfg = presets::scenario(name);
  cfg.pwm_enabled = pwm;
  return cfg;
}

double settle_minutes(const Run& r) {
  return r.summary.settle_time ? *r.summary.settle_time / 60.0
                               : std::numeric_limits<double>::infinity();
}

bool all_on_grid(const RunLog& log, double u_max) {
  const pwm::QuantizerLevels levels(u_max);
  for (const LogRow& row : log.rows) {
    for (int i = 0; i < 3; ++i) {
      if (!levels.contains(row.applied(i))) return false;
    }
  }
  return true;
}

double angle_deg_at(const Run& r, double minutes) {
  return rad_to_deg(error_angle(state_at(r.log, minutes * 60.0).q, r.cfg.mpc.x_ref.q));
}

std::optional<double> first_below_minutes(const Run& r, double deg) {
  for (std::size_t k = 0; k < sample_count(r.log); ++k) {
    if (rad_to_deg(error_angle(sample_state(r.log, k).q, r.cfg.mpc.x_ref.q)) < deg) {
      return sample_time(r.log, k) / 60.0;
    }
  }
  return std::nullopt;
}

// --- criterion 4 -----------------------------------------------------------------

double ceiling_oracle(double u, double u_max) {
  if (u == 0.0) return 0.0;
  for (int k = -3; k <= 3; ++k) {
    if (u_max * (k / 3.0) > u) return u_max * (k / 3.0);
  }
  return u_max;
}

void quantizer_conformance() {
  const double u_max = 0.1;
  int violations = 0;
  violations += pwm::quantize(0.09, u_max) != ceiling_oracle(0.09, u_max) ||
                std::abs(pwm::quantize(0.09, u_max) - 0.1) > 1e-15;
  violations += std::abs(pwm::quantize(0.05, u_max) - 2.0 / 3.0 * u_max) > 1e-15;
  violations += std::abs(pwm::quantize(-0.05, u_max) + 1.0 / 3.0 * u_max) > 1e-15;
  violations += std::abs(pwm::quantize(-0.2, u_max) + 0.1) > 1e-15;

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> wide(-1.5 * u_max, 1.5 * u_max);
  for (int i = 0; i < kRandomQuantizerInputs; ++i) {
    const double u = wide(gen);
    violations += pwm::quantize(u, u_max) != ceiling_oracle(u, u_max);
  }
  int monotone = 0;
  int error_bound = 0;
  double prev = pwm::quantize(-u_max, u_max);
  for (int i = 1; i <= kRandomQuantizerInputs; ++i) {
    const double u = -u_max + 2.0 * u_max * i / kRandomQuantizerInputs;
    const double y = pwm::quantize(u, u_max);
    monotone += y < prev;
    error_bound += std::abs(y - u) > u_max / 3.0 + 1e-15;
    prev = y;
  }
  report(4, "quantizer table", violations + monotone + error_bound == 0,
         std::to_string(violations) + " table violations, " + std::to_string(monotone) +
             " monotonicity violations, " + std::to_string(error_bound) +
             " error-bound violations");
}

// --- criterion 5 -----------------------------------------------------------------

void dynamics_properties() {
  const InertiaTensor cubesat(0.020, 0.030, 0.040);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const auto vec = [&](double s) { return Vec3(s * uni(gen), s * uni(gen), s * uni(gen)); };

  AttitudeState s{Vec4(uni(gen), uni(gen), uni(gen), uni(gen)).normalized(),
                  Vec3(0.3, -0.2, 0.25)};
  double drift = 0.0;
  for (int i = 0; i < kDynamicsSteps; ++i) {
    s = rk4_step(s, Vec3(0.05, -0.03, 0.08), Vec3(2e-5, -3e-5, 1e-5), cubesat, i * 0.1, 0.1);
    drift = std::max(drift, std::abs(s.q.norm() - 1.0));
  }

  double ortho = 0.0;
  for (int i = 0; i < kDynamicsSteps; ++i) {
    const Vec3 m = vec(0.1);
    const Vec3 b = vec(5e-5);
    const Vec3 tau = magnetic_torque({m}, {b, Frame::body, 0.0}).tau;
    const double scale = m.norm() * b.norm() * b.norm();
    ortho = std::max(ortho, std::abs(tau.dot(b)) / scale);
  }

  const InertiaTensor sphere(0.03, 0.03, 0.03);
  AttitudeState spin{Vec4(0, 0, 0, 1), Vec3(0.05, -0.03, 0.1)};
  const double w0 = spin.omega.norm();
  for (int i = 0; i < kDynamicsSteps; ++i) {
    spin = rk4_step(spin, Vec3::Zero(), Vec3::Zero(), sphere, i * 0.1, 0.1);
  }
  const double rate_err = std::abs(spin.omega.norm() - w0);

  const AttitudeState x0{Vec4(0.2, -0.1, 0.4, 0.8).normalized(), Vec3(0.3, -0.2, 0.25)};
  const Vec3 m(0.05, -0.03, 0.08);
  const Vec3 b(2e-5, -3e-5, 1e-5);
  const auto end = [&](int steps) {
    return propagate(x0, m, b, cubesat, 0.0, 50.0, steps).packed();
  };
  const StateVector ref = end(3200);
  const double ratio = (end(100) - ref).norm() / (end(200) - ref).norm();

  const bool pass = drift < kNormDriftTol && ortho < kTorqueOrthoTol &&
                    rate_err < kRateConservationTol && ratio >= kOrderRatioMin;
  report(5, "dynamics properties", pass,
         "norm drift " + fmt("%.2e", drift) + ", tau.B rel " + fmt("%.2e", ortho) +
             ", |w| drift " + fmt("%.2e", rate_err) + ", halving ratio " +
             fmt("%.2f", ratio));
}

// --- criterion 6 -----------------------------------------------------------------

void field_properties() {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> anomaly(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> ecc(0.0, kKeplerEccMax);
  double worst_residual = 0.0;
  for (int i = 0; i < kKeplerSamples; ++i) {
    const double m = anomaly(gen);
    const double e = ecc(gen);
    const double big_e = solve_kepler(m, e);
    worst_residual = std::max(worst_residual, std::abs(big_e - e * std::sin(big_e) - m));
  }

  const OrbitalElements el = sso_elements();
  const DipoleConstants consts;
  const double period = 2.0 * std::numbers::pi / std::sqrt(consts.mu / std::pow(el.a_km, 3));
  std::uniform_real_distribution<double> when(0.0, 3.0 * period);
  double worst_period = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = when(gen);
    const Vec3 b0 = field_at_time(el, consts, t).b;
    const Vec3 b1 = field_at_time(el, consts, t + period).b;
    worst_period = std::max(worst_period, (b0 - b1).norm() / b0.norm());
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int k = 0; k <= 10000; ++k) {
    const double mag = field_at_time(el, consts, period * k / 10000.0).b.norm();
    lo = std::min(lo, mag);
    hi = std::max(hi, mag);
  }

  const bool kepler = worst_residual < kKeplerResidualTol;
  const bool periodic = worst_period < kPeriodicityTol;
  const bool band = lo >= kFieldMin && hi <= kFieldMax;
  std::string failed;
  if (!kepler) failed += " Kepler";
  if (!periodic) failed += " periodicity";
  if (!band) failed += " magnitude-band";
  report(6, "field and orbit properties", kepler && periodic && band,
         (failed.empty() ? std::string() : "failed:" + failed + "; ") + "Kepler residual " + fmt("%.3e", worst_residual) + ", periodicity " +
             fmt("%.2e", worst_period) + ", |B| in [" + fmt("%.3e", lo) + ", " +
             fmt("%.3e", hi) + "] T (band [" + fmt("%.1e", kFieldMin) + ", " +
             fmt("%.1e", kFieldMax) + "])");
}

// --- criterion 7 -----------------------------------------------------------------

nmpc::MpcConfig random_problem_config(std::mt19937_64& gen, int horizon) {
  const ScenarioConfig base = presets::scenario(
      std::uniform_int_distribution<int>(0, 1)(gen) == 0 ? presets::kDetumblePaper
                                                         : presets::kAttitudePaper);
  nmpc::MpcConfig cfg = base.mpc;
  cfg.horizon = horizon;
  return cfg;
}

AttitudeState random_state(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> w(-0.07, 0.07);
  return {Vec4(n(gen), n(gen), n(gen), n(gen)).normalized(), Vec3(w(gen), w(gen), w(gen))};
}

void optimizer_contracts(const std::vector<const Run*>& loops) {
  int in_loop = 0;
  int solves = 0;
  for (const Run* r : loops) {
    in_loop += r->log.contract_violations;
    solves += static_cast<int>(r->log.rows.size());
  }

  const OrbitalElements el = sso_elements();
  const FieldFunction field = [el](double t) { return field_at_time(el, DipoleConstants{}, t); };
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> t0s(0.0, 5000.0);

  double worst_grad = 0.0;
  for (int i = 0; i < kGradientInstances; ++i) {
    const nmpc::MpcConfig cfg = random_problem_config(gen, 1 + i % 3);
    const AttitudeState x0 = random_state(gen);
    const double t0 = t0s(gen);
    std::uniform_real_distribution<double> u(-0.9 * cfg.u_max, 0.9 * cfg.u_max);
    Eigen::VectorXd uu(3 * cfg.horizon);
    for (Eigen::Index j = 0; j < uu.size(); ++j) uu(j) = u(gen);
    const nmpc::HorizonProblem problem(x0, t0, field, cfg);
    Eigen::VectorXd g;
    problem.cost_and_gradient(uu, g);
    const double h = 1e-6 * cfg.u_max;
    Eigen::VectorXd fd(uu.size());
    for (Eigen::Index j = 0; j < uu.size(); ++j) {
      Eigen::VectorXd up = uu, um = uu;
      up(j) += h;
      um(j) -= h;
      fd(j) = (problem.cost(up) - problem.cost(um)) / (2.0 * h);
    }
    worst_grad = std::max(worst_grad, (g - fd).norm() / std::max(fd.norm(), 1e-12));
  }

  int grid_losses = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGridInstances; ++i) {
    const nmpc::MpcConfig cfg = random_problem_config(gen, 1);
    const AttitudeState x0 = random_state(gen);
    const double t0 = t0s(gen);
    const nmpc::HorizonProblem problem(x0, t0, field, cfg);
    double grid = std::numeric_limits<double>::infinity();
    for (int a = -3; a <= 3; ++a) {
      for (int b = -3; b <= 3; ++b) {
        for (int c = -3; c <= 3; ++c) {
          grid = std::min(grid, problem.cost(Eigen::Vector3d(a, b, c) * (cfg.u_max / 3.0)));
        }
      }
    }
    const double j = nmpc::solve(x0, t0, field, cfg).cost;
    worst_gap = std::max(worst_gap, (j - grid) / grid);
    grid_losses += j > grid;
  }

  const bool pass = in_loop == 0 && worst_grad < kGradientRelTol && grid_losses == 0;
  report(7, "optimizer contracts", pass,
         std::to_string(in_loop) + " in-loop violations over " + std::to_string(solves) +
             " solves, worst gradient rel error " + fmt("%.2e", worst_grad) + ", " +
             std::to_string(grid_losses) + "/" + std::to_string(kGridInstances) +
             " grid losses (worst rel gap " + fmt("%.2e", worst_gap) + ")");
}

}  // namespace

int main() {
  try {
    // Closed-loop runs first; criteria 1-3, 7 and 8 read from them.
    const Run detumble = run(preset(presets::kDetumblePaper, true));
    const Run detumble_raw = run(preset(presets::kDetumblePaper, false));
    const Run attitude = run(preset(presets::kAttitudePaper, true));

    {
      const double settle = settle_minutes(detumble);
      const bool pass = !detumble.log.aborted && settle <= kSettleGateMin;
      report(1, "detumble", pass,
             "|w| <= 0.5 deg/s sustained from " + fmt("%.2f", settle) + " min (gate " +
                 fmt("%.0f", kSettleGateMin) + ", target " + fmt("%.0f", kSettleTargetMin) +
                 "), final |w| " +
                 fmt("%.3f", rad_to_deg(detumble.summary.final_omega_norm)) + " deg/s, " +
                 fmt("%.1f", detumble.wall_s) + " s wall",
             pass && settle > kSettleTargetMin ? "settle time above the 25 min target"
                                               : "");
    }

    {
      const std::optional<double> first = first_below_minutes(attitude, 10.0);
      const bool pass = !attitude.log.aborted && first && *first <= kAttitudeGateMin;
      const std::optional<double> held = attitude.summary.attitude_settle_time;
      std::string warn;
      if (pass && angle_deg_at(attitude, kAttitudeGateMin) >= 10.0) {
        warn = "error does not stay below 10 deg";
      }
      report(2, "attitude", pass,
             "error first < 10 deg at " + (first ? fmt("%.1f", *first) : "never") +
                 " min (gate " + fmt("%.0f", kAttitudeGateMin) + "); angle at 25/60/90 min " +
                 fmt("%.2f", angle_deg_at(attitude, kAttitudeTargetMin)) + "/" +
                 fmt("%.2f", angle_deg_at(attitude, 60.0)) + "/" +
                 fmt("%.2f", angle_deg_at(attitude, 90.0)) + " deg; sustained from " +
                 (held ? fmt("%.1f", *held / 60.0) + " min" : std::string("never")),
             warn);
    }

    {
      const bool grid = all_on_grid(detumble.log, detumble.cfg.mpc.u_max);
      const bool off_grid_raw = !all_on_grid(detumble_raw.log, detumble_raw.cfg.mpc.u_max);
      const double s_pwm = settle_minutes(detumble);
      const double s_raw = settle_minutes(detumble_raw);
      const bool pass = grid && off_grid_raw && s_pwm <= kSettleGateMin &&
                        s_raw <= kSettleGateMin && !detumble_raw.log.aborted;
      report(3, "PWM comparison", pass,
             std::string("PWM dipoles on grid: ") + (grid ? "yes" : "no") +
                 ", no-PWM dipoles off grid: " + (off_grid_raw ? "yes" : "no") +
                 ", settle " + fmt("%.2f", s_pwm) + " min (PWM) vs " + fmt("%.2f", s_raw) +
                 " min (no PWM)");
    }

    quantizer_conformance();
    dynamics_properties();
    field_properties();
    optimizer_contracts({&detumble, &detumble_raw, &attitude});

    {
      const Run detumble_again = run(preset(presets::kDetumblePaper, true));
      const Run attitude_again = run(preset(presets::kAttitudePaper, true));
      const bool d = detumble.csv == detumble_again.csv;
      const bool a = attitude.csv == attitude_again.csv;
      report(8, "determinism", d && a,
             std::string("detumble-paper CSV ") + (d ? "identical" : "differs") +
                 ", attitude-paper CSV " + (a ? "identical" : "differs"));
    }
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  return g_failures == 0 ? 0 : 1;
}
