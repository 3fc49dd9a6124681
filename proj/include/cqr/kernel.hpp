#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "cqr/errors.hpp"

namespace cqr {

enum class KernelKind { biquadratic, eighth_order };

/// Compactly supported smoothing kernel on [-1, 1].
struct KernelSpec {
  KernelKind kind = KernelKind::biquadratic;

  static KernelSpec parse(std::string_view name) {
    if (name == "biquadratic") return {KernelKind::biquadratic};
    if (name == "eighth" || name == "eighth_order") return {KernelKind::eighth_order};
    throw DomainError("unknown kernel '" + std::string(name) + "'");
  }

  std::string name() const {
    return kind == KernelKind::biquadratic ? "biquadratic" : "eighth";
  }
};

inline double kernel_eval(const KernelSpec& kernel, double u) noexcept {
  if (!(std::abs(u) <= 1.0)) return 0.0;
  const double u2 = u * u;
  const double one_minus = 1.0 - u2;
  switch (kernel.kind) {
    case KernelKind::biquadratic:
      return (15.0 / 16.0) * one_minus * one_minus;
    case KernelKind::eighth_order:
      // (1/13)(1-u^2)(35 - 385u^2 + 1001u^4 - 715u^6), Horner in u^2
      return one_minus * (35.0 + u2 * (-385.0 + u2 * (1001.0 - 715.0 * u2))) / 13.0;
  }
  return 0.0;
}

}  // namespace cqr
