#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "magmpc/nmpc.hpp"
#include "magmpc/orbitfield.hpp"
#include "magmpc/types.hpp"

namespace magmpc {

/// Invalid or unparsable scenario configuration. The message names the
/// offending field (or line and column for syntax errors).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Closed-loop scenario. The controller model (mpc.inertia, mpc.substeps)
/// always mirrors the plant; see ScenarioConfig::sync_model().
struct ScenarioConfig {
  std::string name;
  OrbitalElements elements;
  DipoleConstants consts;
  InertiaTensor inertia{1.0, 1.0, 1.0};
  nmpc::MpcConfig mpc;
  AttitudeState x0;
  double x0_input_norm = 1.0;  // quaternion norm as written, before normalization
  double duration = 0.0;       // s
  bool pwm_enabled = false;
  int substeps = 20;
  std::string output_path;
  std::vector<std::string> notes;

  void sync_model();
  /// Throws ConfigError naming the violated field.
  void validate() const;
};

namespace presets {

inline constexpr const char* kSsoPaper = "sso-paper";
inline constexpr const char* kDetumblePaper = "detumble-paper";
inline constexpr const char* kAttitudePaper = "attitude-paper";

struct PresetInfo {
  std::string name;
  std::string description;
  bool scenario;  // false for orbit-only presets
};

std::vector<PresetInfo> list();
bool is_scenario(const std::string& name);
/// Throws ConfigError for unknown or orbit-only names.
ScenarioConfig scenario(const std::string& name);
/// Throws ConfigError for unknown orbit presets.
OrbitalElements orbit(const std::string& name);
/// JSON text of a scenario preset in the config file schema.
std::string to_json(const std::string& name);

}  // namespace presets

/// Parses a JSON scenario document. `source` labels diagnostics.
ScenarioConfig parse_config(const std::string& text,
                            const std::string& source = "<config>");

/// Loads a scenario from a preset name or a JSON file path. Preset names
/// take precedence over files.
ScenarioConfig load_config(const std::string& preset_or_path);

/// Serializes a scenario back to the config schema (SI units).
std::string config_to_json(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------

struct LogRow {
  double t = 0.0;
  AttitudeState state;
  Vec3 applied = Vec3::Zero();  // dipole held over [t, t + Ts]
  Vec3 raw = Vec3::Zero();      // controller output before the quantizer
  Vec3 b_orbital = Vec3::Zero();
  double cost = 0.0;
  bool degraded = false;
  int iterations = 0;
  double zero_cost = 0.0;
  double warm_cost = 0.0;
};

struct RunLog {
  std::vector<LogRow> rows;
  double ts = 0.0;
  AttitudeState final_state;  // state after the last row's interval
  double final_time = 0.0;
  int contract_violations = 0;  // solves returning cost above a mandatory candidate
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> notes;
};

/// Runs the closed loop: sample field, solve, optionally quantize, integrate.
/// An integration blowup stops the run; the partial log is returned with
/// `aborted` set.
RunLog run_scenario(const ScenarioConfig& cfg);

/// CSV header, fixed column order.
std::string csv_header();
void write_csv(const RunLog& log, std::ostream& os);
void write_csv(const RunLog& log, const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

// ---------------------------------------------------------------------------

inline constexpr double kDetumbleThreshold = 0.5 * std::numbers::pi / 180.0;  // rad/s
inline constexpr double kAttitudeThresholdDeg = 10.0;

/// Sign-invariant rotation angle between two unit quaternions, radians.
double error_angle(const Vec4& q, const Vec4& q_ref);

struct Summary {
  std::string name;
  bool pwm_enabled = false;
  int solves = 0;
  double duration = 0.0;
  bool aborted = false;

  double initial_omega_norm = 0.0;  // rad/s
  double final_omega_norm = 0.0;
  std::optional<double> settle_time;  // |omega| <= kDetumbleThreshold from here on

  double final_error_angle = 0.0;       // rad, against +/- x_ref
  double final_quat_error_plus = 0.0;   // |q - q_ref|
  double final_quat_error_minus = 0.0;  // |q + q_ref|
  std::optional<double> attitude_settle_time;  // angle < 10 deg from here on

  double effort = 0.0;  // sum |m_applied| Ts, A m^2 s
  int degraded_solves = 0;
  int contract_violations = 0;
  std::vector<std::string> notes;
};

/// Time series sample k (k = rows.size() means the final state).
double sample_time(const RunLog& log, std::size_t k);
const AttitudeState& sample_state(const RunLog& log, std::size_t k);
std::size_t sample_count(const RunLog& log);

/// State at the last sample with time <= t.
const AttitudeState& state_at(const RunLog& log, double t);

Summary summarize(const RunLog& log, const ScenarioConfig& cfg);
std::string summary_to_json(const Summary& summary, const ScenarioConfig& cfg);

}  // namespace magmpc
