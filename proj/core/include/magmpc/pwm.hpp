#pragma once

#include <array>

#include "magmpc/types.hpp"

namespace magmpc::pwm {

/// Seven output levels k * u_max / 3, k = -3..3, ascending.
class QuantizerLevels {
 public:
  explicit QuantizerLevels(double u_max);

  double u_max() const { return u_max_; }
  /// Level for grid index k in [-3, 3].
  double level(int k) const;
  std::array<double, 7> levels() const;
  /// True iff v is exactly one of the seven levels.
  bool contains(double v) const;

 private:
  double u_max_;
};

/// Maps a continuous dipole command onto the seven-level grid.
///
/// Brackets, with L = u_max / 3:
///   [2L, inf)  -> 3L     [L, 2L)   -> 2L    (0, L) -> L     0 -> 0
///   [-L, 0)    -> 0      [-2L, -L) -> -L    [-3L, -2L) -> -2L
///   (-inf, -3L) -> -3L
///
/// Exact zero maps to zero so that a controller sitting on its reference
/// commands no actuation. Throws DomainError if u_max <= 0 or u_mpc is not
/// finite.
double quantize(double u_mpc, double u_max);

/// Componentwise quantize().
DipoleCommand quantize_vector(const DipoleCommand& m, double u_max);

}  // namespace magmpc::pwm
