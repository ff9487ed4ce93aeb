#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "linex/tolerances.hpp"

namespace linex {

using Vec = Eigen::VectorXd;

enum class NormFamily { L1, L2, Lp, Linf };

/// Distance family for query objectives and robustness balls. The Lp member
/// carries a finite exponent strictly greater than 1; l1 and linf are the
/// non-differentiable polyhedral members.
class NormKind {
 public:
  static NormKind l1() { return NormKind(NormFamily::L1, 1.0); }
  static NormKind l2() { return NormKind(NormFamily::L2, 2.0); }
  static NormKind linf() {
    return NormKind(NormFamily::Linf, std::numeric_limits<double>::infinity());
  }
  /// Throws std::invalid_argument unless 1 < exponent < inf.
  static NormKind lp(double exponent);

  NormFamily family() const { return family_; }
  /// 1, 2, the Lp exponent, or +inf.
  double exponent() const { return exponent_; }
  bool differentiable() const {
    return family_ == NormFamily::L2 || family_ == NormFamily::Lp;
  }
  NormKind dual() const;
  bool operator==(const NormKind& o) const;
  bool operator!=(const NormKind& o) const { return !(*this == o); }
  std::string name() const;

 private:
  NormKind(NormFamily f, double e) : family_(f), exponent_(e) {}
  NormFamily family_;
  double exponent_;
};

/// Throws std::invalid_argument on empty vectors or non-finite entries.
void require_finite(const Vec& x, const char* what);

/// ||x||_kind. Rejects empty/non-finite input.
double norm_eval(const Vec& x, NormKind kind);

/// ||a||_kind^* = max{a^T v : ||v||_kind <= 1} = ||a||_{dual(kind)}.
double dual_norm_eval(const Vec& a, NormKind kind);

/// A maximizer v of a^T v over the unit kind-ball: ||v||_kind <= 1 and
/// a^T v = ||a||_kind^*. For l1 the lowest-index vertex sgn(a_j0) e^j0 with
/// j0 = argmax |a_j|; for linf the sign vector with sgn(0) := +1; for l2 the
/// normalized direction; for lp the closed-form maximizer with components
/// proportional to sgn(a_i)|a_i|^{1/(p-1)}.
/// Throws std::invalid_argument("degenerate direction") on a = 0.
Vec dual_maximizer(const Vec& a, NormKind kind);

/// Gradient of ||.||_kind at x != 0 for differentiable kinds only.
Vec norm_gradient(const Vec& x, NormKind kind);

/// Subdifferential membership g in d||.||_kind(x): g^T x = ||x||_kind and
/// ||g||_kind^* <= 1, both within tol.
bool subdiff_contains(const Vec& x, const Vec& g, NormKind kind, double tol);
bool subdiff_contains(const Vec& x, const Vec& g, NormKind kind);

/// Basis of R^p whose first element is exactly v; the remaining vectors come
/// from Gram-Schmidt over the standard basis (unit l2 norm, orthogonal to v
/// and to each other), skipping near-dependent candidates.
std::vector<Vec> basis_containing(const Vec& v,
                                  const Tolerances& tols = default_tols());

inline int sign_of(double x) { return x >= 0.0 ? 1 : -1; }

}  // namespace linex
