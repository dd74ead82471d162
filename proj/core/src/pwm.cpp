#include "magmpc/pwm.hpp"

#include <cmath>

namespace magmpc::pwm {

namespace {

void require_bound(double u_max) {
  if (!std::isfinite(u_max) || u_max <= 0.0) {
    throw DomainError("pwm: u_max must be finite and positive");
  }
}

}  // namespace

QuantizerLevels::QuantizerLevels(double u_max) : u_max_(u_max) {
  require_bound(u_max);
}

double QuantizerLevels::level(int k) const {
  if (k < -3 || k > 3) throw DomainError("pwm: level index outside [-3, 3]");
  return u_max_ * (k / 3.0);
}

std::array<double, 7> QuantizerLevels::levels() const {
  std::array<double, 7> out{};
  for (int k = -3; k <= 3; ++k) out[static_cast<std::size_t>(k + 3)] = level(k);
  return out;
}

bool QuantizerLevels::contains(double v) const {
  for (int k = -3; k <= 3; ++k) {
    if (v == level(k)) return true;
  }
  return false;
}

double quantize(double u_mpc, double u_max) {
  require_bound(u_max);
  if (!std::isfinite(u_mpc)) throw DomainError("pwm: non-finite command");

  const auto lvl = [u_max](int k) { return u_max * (k / 3.0); };

  if (u_mpc >= lvl(2)) return lvl(3);
  if (u_mpc >= lvl(1)) return lvl(2);
  if (u_mpc > 0.0) return lvl(1);
  if (u_mpc == 0.0) return 0.0;
  if (u_mpc >= lvl(-1)) return 0.0;
  if (u_mpc >= lvl(-2)) return lvl(-1);
  if (u_mpc >= lvl(-3)) return lvl(-2);
  return lvl(-3);
}

DipoleCommand quantize_vector(const DipoleCommand& m, double u_max) {
  return {Vec3(quantize(m.m.x(), u_max), quantize(m.m.y(), u_max),
               quantize(m.m.z(), u_max))};
}

}  // namespace magmpc::pwm
