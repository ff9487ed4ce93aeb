#pragma once

#include <cmath>
#include <cstdint>

namespace linex {

/// Single numeric-tolerance configuration shared across the library. Every
/// floating-point comparison and every solver threshold routes through one
/// instance of this struct so experiments can tighten or loosen the whole
/// stack coherently.
struct Tolerances {
  double abs = 1e-9;              ///< absolute comparison tolerance
  double rel = 1e-9;              ///< relative comparison tolerance
  double strict_eps = 1e-7;       ///< margin realizing strict inequalities in region tests
  double gram_schmidt_drop = 1e-12;  ///< residual threshold for dropping dependent candidates
  double rank_rel = 1e-10;        ///< rank threshold relative to the largest singular value
  /// Variable box for dual feasibility witnesses. Perspective multipliers
  /// scale like 1/rho_j, so the box must dominate the inverse of the smallest
  /// counterfactual distance in the ledger.
  double witness_box = 1e8;
  int ball_check_samples = 1000;  ///< samples for robustness-ball verification

  /// |x - y| <= abs + rel * scale.
  bool close(double x, double y, double scale = 1.0) const {
    return std::abs(x - y) <= abs + rel * std::abs(scale);
  }
  double band(double scale = 1.0) const { return abs + rel * std::abs(scale); }
};

inline const Tolerances& default_tols() {
  static const Tolerances t{};
  return t;
}

}  // namespace linex
