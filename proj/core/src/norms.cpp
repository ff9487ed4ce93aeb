#include "linex/norms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace linex {

NormKind NormKind::lp(double exponent) {
  if (!(exponent > 1.0) || !std::isfinite(exponent)) {
    throw std::invalid_argument("lp exponent must be finite and > 1");
  }
  return NormKind(NormFamily::Lp, exponent);
}

NormKind NormKind::dual() const {
  switch (family_) {
    case NormFamily::L1:
      return linf();
    case NormFamily::Linf:
      return l1();
    case NormFamily::L2:
      return l2();
    case NormFamily::Lp:
      return lp(exponent_ / (exponent_ - 1.0));
  }
  throw std::logic_error("unreachable norm family");
}

bool NormKind::operator==(const NormKind& o) const {
  if (family_ != o.family_) return false;
  if (family_ == NormFamily::Lp) {
    // dual() of a dual() reproduces the exponent only up to roundoff
    return std::abs(exponent_ - o.exponent_) <=
           1e-12 * std::max(exponent_, o.exponent_);
  }
  return true;
}

std::string NormKind::name() const {
  switch (family_) {
    case NormFamily::L1:
      return "l1";
    case NormFamily::L2:
      return "l2";
    case NormFamily::Linf:
      return "linf";
    case NormFamily::Lp:
      return "lp(" + std::to_string(exponent_) + ")";
  }
  return "?";
}

void require_finite(const Vec& x, const char* what) {
  if (x.size() == 0) {
    throw std::invalid_argument(std::string(what) + ": empty vector");
  }
  if (!x.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

double norm_eval(const Vec& x, NormKind kind) {
  require_finite(x, "norm_eval");
  switch (kind.family()) {
    case NormFamily::L1:
      return x.lpNorm<1>();
    case NormFamily::L2:
      return x.norm();
    case NormFamily::Linf:
      return x.lpNorm<Eigen::Infinity>();
    case NormFamily::Lp: {
      const double p = kind.exponent();
      // scale out the max to avoid overflow on large exponents
      const double m = x.lpNorm<Eigen::Infinity>();
      if (m == 0.0) return 0.0;
      double s = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        s += std::pow(std::abs(x[i]) / m, p);
      }
      return m * std::pow(s, 1.0 / p);
    }
  }
  throw std::logic_error("unreachable norm family");
}

double dual_norm_eval(const Vec& a, NormKind kind) {
  return norm_eval(a, kind.dual());
}

Vec dual_maximizer(const Vec& a, NormKind kind) {
  require_finite(a, "dual_maximizer");
  if (a.lpNorm<Eigen::Infinity>() == 0.0) {
    throw std::invalid_argument("degenerate direction");
  }
  const Eigen::Index p = a.size();
  switch (kind.family()) {
    case NormFamily::L1: {
      Eigen::Index j0 = 0;
      a.cwiseAbs().maxCoeff(&j0);  // lowest index on ties
      Vec v = Vec::Zero(p);
      v[j0] = sign_of(a[j0]);
      return v;
    }
    case NormFamily::Linf: {
      Vec v(p);
      for (Eigen::Index i = 0; i < p; ++i) v[i] = sign_of(a[i]);
      return v;
    }
    case NormFamily::L2:
      return a / a.norm();
    case NormFamily::Lp: {
      const double q = 1.0 / (kind.exponent() - 1.0);
      Vec v(p);
      const double m = a.lpNorm<Eigen::Infinity>();
      for (Eigen::Index i = 0; i < p; ++i) {
        v[i] = sign_of(a[i]) * std::pow(std::abs(a[i]) / m, q);
      }
      return v / norm_eval(v, kind);
    }
  }
  throw std::logic_error("unreachable norm family");
}

Vec norm_gradient(const Vec& x, NormKind kind) {
  require_finite(x, "norm_gradient");
  if (!kind.differentiable()) {
    throw std::invalid_argument("norm_gradient: kind is not differentiable");
  }
  const double nrm = norm_eval(x, kind);
  if (nrm == 0.0) {
    throw std::invalid_argument("norm_gradient: gradient undefined at 0");
  }
  if (kind.family() == NormFamily::L2) {
    return x / nrm;
  }
  const double p = kind.exponent();
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    g[i] = sign_of(x[i]) * std::pow(std::abs(x[i]) / nrm, p - 1.0);
  }
  return g;
}

bool subdiff_contains(const Vec& x, const Vec& g, NormKind kind, double tol) {
  require_finite(x, "subdiff_contains");
  require_finite(g, "subdiff_contains");
  const double nx = norm_eval(x, kind);
  if (std::abs(g.dot(x) - nx) > tol * (1.0 + nx)) return false;
  return dual_norm_eval(g, kind) <= 1.0 + tol;
}

bool subdiff_contains(const Vec& x, const Vec& g, NormKind kind) {
  return subdiff_contains(x, g, kind, default_tols().abs);
}

std::vector<Vec> basis_containing(const Vec& v, const Tolerances& tols) {
  require_finite(v, "basis_containing");
  if (v.norm() == 0.0) {
    throw std::invalid_argument("basis_containing: zero vector");
  }
  const Eigen::Index p = v.size();
  std::vector<Vec> basis;
  basis.reserve(static_cast<std::size_t>(p));
  basis.push_back(v);
  std::vector<Vec> ortho;  // orthonormal shadow used for projections
  ortho.push_back(v / v.norm());
  for (Eigen::Index i = 0; i < p && basis.size() < static_cast<std::size_t>(p);
       ++i) {
    Vec r = Vec::Zero(p);
    r[i] = 1.0;
    for (const Vec& u : ortho) r -= u.dot(r) * u;
    if (r.norm() <= tols.gram_schmidt_drop) continue;
    r /= r.norm();
    basis.push_back(r);
    ortho.push_back(r);
  }
  if (basis.size() != static_cast<std::size_t>(p)) {
    throw std::runtime_error("basis_containing: failed to complete basis");
  }
  return basis;
}

}  // namespace linex
