#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "magmpc/harness.hpp"

namespace magmpc {

using nlohmann::json;

namespace {

// Reads one JSON object, tracking which keys were consumed so that unknown
// keys can be rejected with their full path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(field(key) + ": " + what);
  }

  std::string field(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
  }

  int integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key) {
    const json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  Eigen::VectorXd vector(const std::string& key, Eigen::Index n) {
    const json& v = at(key);
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != n) {
      fail(key, "expected an array of " + std::to_string(n) + " numbers");
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const json& e = v[static_cast<std::size_t>(i)];
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out(i) = e.get<double>();
      if (!std::isfinite(out(i))) fail(key, "entries must be finite");
    }
    return out;
  }

  /// Angle (or rate) given either in radians under `key` or in degrees
  /// under `key_deg`. Returns nullopt when neither is present.
  std::optional<double> angle(const std::string& key) {
    const bool rad = has(key);
    const bool deg = has(key + "_deg");
    if (rad && deg) fail(key, "given both in radians and as " + key + "_deg");
    if (rad) return number(key);
    if (deg) return deg_to_rad(number(key + "_deg"));
    return std::nullopt;
  }

  std::optional<Vec3> angle_vector(const std::string& key) {
    const bool rad = has(key);
    const bool deg = has(key + "_deg");
    if (rad && deg) fail(key, "given both in radians and as " + key + "_deg");
    if (rad) return Vec3(vector(key, 3));
    if (deg) return Vec3(vector(key + "_deg", 3) * (std::numbers::pi / 180.0));
    return std::nullopt;
  }

  ObjectReader child(const std::string& key) { return {at(key), field(key)}; }

  void reject_unknown() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) fail(k, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_orbit(ObjectReader r, OrbitalElements& el, bool required,
                std::vector<std::string>& notes) {
  double a = el.a_km;
  double e = el.e;
  double i = el.i;
  double m0 = el.m0;
  double raan = el.raan;
  double argp = el.argp;

  const auto need = [&](const char* key) {
    if (required) r.fail(key, "missing (or _deg variant)");
  };

  if (r.has("a_km")) a = r.number("a_km"); else need("a_km");
  if (r.has("e")) e = r.number("e"); else need("e");
  if (auto v = r.angle("i")) i = *v; else need("i");
  if (auto v = r.angle("mean_anomaly")) m0 = *v; else need("mean_anomaly");
  if (auto v = r.angle("raan")) raan = *v; else need("raan");
  if (auto v = r.angle("argp")) argp = *v; else need("argp");
  r.reject_unknown();

  if (!(e >= 0.0 && e < 1.0)) {
    std::ostringstream os;
    os << "eccentricity " << e << " outside [0, 1)";
    r.fail("e", os.str());
  }
  if (!(a > 0.0)) r.fail("a_km", "semi-major axis must be positive");
  el = OrbitalElements::make(a, e, i, m0, raan, argp, &notes);
}

void read_state(ObjectReader r, AttitudeState& s, bool required) {
  if (r.has("q")) {
    s.q = Vec4(r.vector("q", 4));
  } else if (required) {
    r.fail("q", "missing");
  }
  if (auto w = r.angle_vector("omega")) {
    s.omega = *w;
  } else if (required) {
    r.fail("omega", "missing (or omega_deg in deg/s)");
  }
  r.reject_unknown();
}

ScenarioConfig blank_scenario() {
  ScenarioConfig cfg;
  cfg.name = "custom";
  cfg.consts = DipoleConstants{};
  cfg.pwm_enabled = false;
  cfg.substeps = 20;
  return cfg;
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json state_json(const AttitudeState& s) {
  return json{{"q", {s.q(0), s.q(1), s.q(2), s.q(3)}},
              {"omega", {s.omega(0), s.omega(1), s.omega(2)}}};
}

}  // namespace

// ---------------------------------------------------------------------------

void ScenarioConfig::sync_model() {
  mpc.inertia = inertia;
  mpc.substeps = substeps;
}

void ScenarioConfig::validate() const {
  try {
    mpc.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(duration >= mpc.ts)) throw ConfigError("duration: must be >= mpc.Ts");
  if (substeps < 1) throw ConfigError("substeps: must be >= 1");
  if (!x0.finite() || std::abs(x0.q.norm() - 1.0) > 1e-12) {
    throw ConfigError("x0.q: must be normalized");
  }
  if (mpc.inertia.diagonal() != inertia.diagonal() || mpc.substeps != substeps) {
    throw ConfigError("mpc model out of sync with the plant");
  }
}

// ---------------------------------------------------------------------------

namespace presets {

std::vector<PresetInfo> list() {
  return {
      {kSsoPaper, "sun-synchronous orbit elements (a = 6691.6 km, i = 96.7 deg)", false},
      {kDetumblePaper, "detumble from (4, 3, -3) deg/s, Ts = 2 s, p = 10, 40 min", true},
      {kAttitudePaper, "slew to q = (0, 1, 0, 0), Ts = 30 s, p = 10, 90 min", true},
  };
}

bool is_scenario(const std::string& name) {
  return name == kDetumblePaper || name == kAttitudePaper;
}

OrbitalElements orbit(const std::string& name) {
  if (name == kSsoPaper) return sso_elements();
  throw ConfigError("orbit: unknown orbit preset '" + name + "'");
}

ScenarioConfig scenario(const std::string& name) {
  ScenarioConfig cfg = blank_scenario();
  cfg.name = name;
  cfg.elements = sso_elements();
  cfg.inertia = InertiaTensor(0.020, 0.030, 0.040);
  cfg.pwm_enabled = true;
  cfg.substeps = 20;

  nmpc::MpcConfig& mpc = cfg.mpc;
  mpc.r_diag = Vec3::Constant(1e-8);
  mpc.horizon = 10;
  mpc.u_max = 0.1;

  if (name == kDetumblePaper) {
    mpc.ts = 2.0;
    mpc.q_diag << 0.0, 0.0, 0.0, 0.0, 500.0, 1000.0, 250.0;
    mpc.x_ref = AttitudeState{};
    cfg.x0.q = Vec4(0.0, 0.0, 0.0, 1.0);
    cfg.x0.omega = Vec3(deg_to_rad(4.0), deg_to_rad(3.0), deg_to_rad(-3.0));
    cfg.duration = 40.0 * 60.0;
  } else if (name == kAttitudePaper) {
    mpc.ts = 30.0;
    mpc.q_diag << 20.0, 20.0, 20.0, 20.0, 1e4, 1e4, 1e4;
    mpc.x_ref.q = Vec4(0.0, 1.0, 0.0, 0.0);
    mpc.x_ref.omega = Vec3::Zero();
    const Vec4 q0(0.0, 0.1, 0.0, 1.0);
    cfg.x0_input_norm = q0.norm();
    cfg.x0.q = q0 / q0.norm();
    cfg.x0.omega = Vec3::Zero();
    cfg.duration = 90.0 * 60.0;
    std::ostringstream os;
    os << "x0 quaternion normalized from norm " << format_double(cfg.x0_input_norm);
    cfg.notes.push_back(os.str());
  } else if (name == kSsoPaper) {
    throw ConfigError("preset '" + name + "' describes an orbit only; use it as \"orbit\": \"" +
                      name + "\" in a scenario file");
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  cfg.sync_model();
  return cfg;
}

std::string to_json(const std::string& name) {
  return config_to_json(scenario(name));
}

}  // namespace presets

// ---------------------------------------------------------------------------

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": syntax error at " + line_column(text, e.byte) + ": " +
                      e.what());
  }

  try {
    ObjectReader root(doc, "");
    ScenarioConfig cfg = blank_scenario();
    bool required = true;
    if (root.has("base")) {
      cfg = presets::scenario(root.string("base"));
      required = false;
    }
    const auto need = [&](const char* key) {
      if (required) root.fail(key, "missing");
    };

    if (root.has("name")) cfg.name = root.string("name");

    if (root.has("orbit")) {
      const json& o = root.at("orbit");
      if (o.is_string()) {
        cfg.elements = presets::orbit(o.get<std::string>());
      } else {
        read_orbit(root.child("orbit"), cfg.elements, required, cfg.notes);
      }
    } else {
      need("orbit");
    }

    if (root.has("field")) {
      ObjectReader f = root.child("field");
      if (f.has("me_gauss_cm3")) {
        const double me = f.number("me_gauss_cm3");
        if (!(me > 0.0)) f.fail("me_gauss_cm3", "must be positive");
        cfg.consts = DipoleConstants::from_gauss_cm3(me);
      }
      f.reject_unknown();
    }

    if (root.has("inertia")) {
      const Eigen::VectorXd in = root.vector("inertia", 3);
      try {
        cfg.inertia = InertiaTensor(in(0), in(1), in(2));
      } catch (const DomainError& e) {
        root.fail("inertia", e.what());
      }
    } else {
      need("inertia");
    }

    if (root.has("mpc")) {
      ObjectReader m = root.child("mpc");
      nmpc::MpcConfig& mpc = cfg.mpc;
      const auto need_m = [&](const char* key) {
        if (required) m.fail(key, "missing");
      };
      if (m.has("Q")) {
        mpc.q_diag = m.vector("Q", 7);
        if ((mpc.q_diag.array() < 0.0).any()) m.fail("Q", "entries must be >= 0");
      } else {
        need_m("Q");
      }
      if (m.has("R")) {
        mpc.r_diag = m.vector("R", 3);
        if ((mpc.r_diag.array() <= 0.0).any()) m.fail("R", "entries must be > 0");
      } else {
        need_m("R");
      }
      if (m.has("horizon")) {
        mpc.horizon = m.integer("horizon");
        if (mpc.horizon < 1) m.fail("horizon", "must be >= 1");
      } else {
        need_m("horizon");
      }
      if (m.has("Ts")) {
        mpc.ts = m.number("Ts");
        if (!(mpc.ts > 0.0)) m.fail("Ts", "must be > 0");
      } else {
        need_m("Ts");
      }
      if (m.has("u_max")) {
        mpc.u_max = m.number("u_max");
        if (!(mpc.u_max > 0.0)) m.fail("u_max", "must be > 0");
      } else {
        need_m("u_max");
      }
      if (m.has("x_ref")) {
        read_state(m.child("x_ref"), mpc.x_ref, required);
        if (std::abs(mpc.x_ref.q.norm() - 1.0) > 1e-9) {
          m.fail("x_ref", "quaternion must be unit within 1e-9");
        }
      } else {
        need_m("x_ref");
      }
      if (m.has("max_iterations")) {
        mpc.max_iterations = m.integer("max_iterations");
        if (mpc.max_iterations < 1) m.fail("max_iterations", "must be >= 1");
      }
      if (m.has("tolerance")) {
        mpc.tolerance = m.number("tolerance");
        if (!(mpc.tolerance > 0.0)) m.fail("tolerance", "must be > 0");
      }
      m.reject_unknown();
    } else {
      need("mpc");
    }

    if (root.has("x0")) {
      ObjectReader xr = root.child("x0");
      AttitudeState x0 = cfg.x0;
      read_state(std::move(xr), x0, required);
      const double n = x0.q.norm();
      if (!(n > 0.0)) root.fail("x0", "quaternion must be nonzero");
      cfg.x0_input_norm = n;
      x0.q /= n;
      cfg.x0 = x0;
      std::erase_if(cfg.notes, [](const std::string& s) {
        return s.starts_with("x0 quaternion normalized");
      });
      if (std::abs(n - 1.0) > 1e-12) {
        cfg.notes.push_back("x0 quaternion normalized from norm " + format_double(n));
      }
    } else {
      need("x0");
    }

    if (root.has("duration")) {
      cfg.duration = root.number("duration");
    } else {
      need("duration");
    }
    if (root.has("pwm")) cfg.pwm_enabled = root.boolean("pwm");
    if (root.has("substeps")) {
      cfg.substeps = root.integer("substeps");
      if (cfg.substeps < 1) root.fail("substeps", "must be >= 1");
    }
    if (root.has("output")) cfg.output_path = root.string("output");
    root.reject_unknown();

    cfg.sync_model();
    if (!(cfg.duration >= cfg.mpc.ts)) root.fail("duration", "must be >= mpc.Ts");
    cfg.validate();
    return cfg;
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

ScenarioConfig load_config(const std::string& preset_or_path) {
  if (presets::is_scenario(preset_or_path)) return presets::scenario(preset_or_path);
  if (preset_or_path == presets::kSsoPaper) {
    return presets::scenario(preset_or_path);  // throws the orbit-only error
  }
  std::ifstream in(preset_or_path);
  if (!in) {
    throw ConfigError("'" + preset_or_path + "' is neither a preset nor a readable file");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), preset_or_path);
}

std::string config_to_json(const ScenarioConfig& cfg) {
  const OrbitalElements& el = cfg.elements;
  const nmpc::MpcConfig& m = cfg.mpc;
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["orbit"] = {{"a_km", el.a_km}, {"e", el.e},       {"i", el.i},
                {"mean_anomaly", el.m0}, {"raan", el.raan}, {"argp", el.argp}};
  j["field"] = {{"me_gauss_cm3", cfg.consts.me / kGaussCm3ToTeslaM3}};
  j["inertia"] = {cfg.inertia.ix(), cfg.inertia.iy(), cfg.inertia.iz()};
  j["mpc"] = {
      {"Q", std::vector<double>(m.q_diag.data(), m.q_diag.data() + 7)},
      {"R", {m.r_diag(0), m.r_diag(1), m.r_diag(2)}},
      {"horizon", m.horizon},
      {"Ts", m.ts},
      {"u_max", m.u_max},
      {"x_ref", state_json(m.x_ref)},
      {"max_iterations", m.max_iterations},
      {"tolerance", m.tolerance},
  };
  j["x0"] = state_json(cfg.x0);
  j["duration"] = cfg.duration;
  j["pwm"] = cfg.pwm_enabled;
  j["substeps"] = cfg.substeps;
  if (!cfg.output_path.empty()) j["output"] = cfg.output_path;
  return j.dump(2);
}

}  // namespace magmpc
