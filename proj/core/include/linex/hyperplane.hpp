#pragma once

#include <stdexcept>

#include "linex/norms.hpp"

namespace linex {

/// Linear classifier a^T x - b >= 0 => +1 ('Yes'), else -1 ('No').
/// The weight vector must be non-zero.
struct Hyperplane {
  Vec a;
  double b = 0.0;

  Hyperplane() = default;
  Hyperplane(Vec a_, double b_) : a(std::move(a_)), b(b_) {
    require_finite(a, "Hyperplane");
    if (a.lpNorm<Eigen::Infinity>() == 0.0) {
      throw std::invalid_argument("Hyperplane: zero weight vector");
    }
  }
  Eigen::Index dim() const { return a.size(); }
};

/// Exact sign classification; the boundary gets +1 by convention.
inline int classify(const Hyperplane& h, const Vec& x) {
  if (x.size() != h.a.size()) {
    throw std::invalid_argument("classify: dimension mismatch");
  }
  return h.a.dot(x) - h.b >= 0.0 ? 1 : -1;
}

/// Signed distance from x to the hyperplane under norm1:
/// d = (b - a^T x) / ||a||_norm1^*. |d| is the norm1 distance.
inline double boundary_distance(const Hyperplane& h, const Vec& x,
                                NormKind norm1) {
  if (x.size() != h.a.size()) {
    throw std::invalid_argument("boundary_distance: dimension mismatch");
  }
  return (h.b - h.a.dot(x)) / dual_norm_eval(h.a, norm1);
}

}  // namespace linex
