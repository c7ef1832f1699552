#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace matsubara {

class ZeroArgumentError : public std::domain_error {
 public:
  ZeroArgumentError() : std::domain_error("ZeroArgument: nbe(0) is a pole") {}
};

/// Bose-Einstein kernel 1/(exp(2 pi z) - 1).
///
/// Positive arguments use exp(-2 pi z) / (1 - exp(-2 pi z)), which underflows
/// cleanly to 0 for large z; negative arguments go through nbe(z) = -1 - nbe(-z).
inline double nbe(double z) {
  if (z == 0.0) throw ZeroArgumentError();
  if (z < 0.0) return -1.0 - nbe(-z);
  const double x = 2.0 * std::numbers::pi * z;
  return std::exp(-x) / -std::expm1(-x);
}

}  // namespace matsubara
