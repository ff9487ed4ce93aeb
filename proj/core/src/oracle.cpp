#include "linex/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace linex {

std::string to_string(QueryKind k) {
  switch (k) {
    case QueryKind::Factual:
      return "factual";
    case QueryKind::Counterfactual:
      return "cf";
    case QueryKind::RobustCounterfactual:
      return "rcf";
  }
  return "?";
}

QueryKind query_kind_from_string(const std::string& s) {
  if (s == "factual") return QueryKind::Factual;
  if (s == "cf") return QueryKind::Counterfactual;
  if (s == "rcf") return QueryKind::RobustCounterfactual;
  throw std::invalid_argument("unknown query kind: " + s);
}

namespace {

// Indices attaining max |a_j| within a relative band.
std::vector<Eigen::Index> tied_argmax_abs(const Vec& a, const Tolerances& tols) {
  const double m = a.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> tied;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (std::abs(std::abs(a[j]) - m) <= tols.band(m)) tied.push_back(j);
  }
  return tied;
}

std::vector<Eigen::Index> zero_coords(const Vec& a, const Tolerances& tols) {
  const double m = a.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> zs;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (std::abs(a[j]) <= tols.band(m)) zs.push_back(j);
  }
  return zs;
}

}  // namespace

Vec tie_broken_maximizer(const Vec& a, NormKind norm1,
                         const TieBreakPolicy& policy, std::mt19937_64& rng,
                         const Tolerances& tols) {
  if (norm1.differentiable()) {
    return dual_maximizer(a, norm1);  // unique maximizer, nothing to break
  }
  const Eigen::Index p = a.size();
  if (norm1.family() == NormFamily::L1) {
    const auto tied = tied_argmax_abs(a, tols);
    auto vertex = [&](Eigen::Index j) {
      Vec v = Vec::Zero(p);
      v[j] = sign_of(a[j]);
      return v;
    };
    switch (policy.kind) {
      case TieBreakPolicy::Kind::Vertex:
        return vertex(tied.front());
      case TieBreakPolicy::Kind::FaceInterior:
        if (tied.size() < 2) return vertex(tied.front());
        return (1.0 - policy.theta) * vertex(tied[0]) +
               policy.theta * vertex(tied[1]);
      case TieBreakPolicy::Kind::Seeded: {
        if (tied.size() < 2) return vertex(tied.front());
        std::uniform_real_distribution<double> uni(0.1, 1.0);
        Vec v = Vec::Zero(p);
        double total = 0.0;
        std::vector<double> w(tied.size());
        for (auto& wi : w) {
          wi = uni(rng);
          total += wi;
        }
        for (std::size_t k = 0; k < tied.size(); ++k) {
          v += (w[k] / total) * vertex(tied[k]);
        }
        return v;
      }
    }
  }
  // linf: the optimal face fixes v_i = sgn(a_i) wherever a_i != 0 and leaves
  // the zero coordinates free in [-1, 1]; sgn(0) := +1 for the vertex.
  Vec v(p);
  for (Eigen::Index i = 0; i < p; ++i) v[i] = sign_of(a[i]);
  const auto zs = zero_coords(a, tols);
  switch (policy.kind) {
    case TieBreakPolicy::Kind::Vertex:
      return v;
    case TieBreakPolicy::Kind::FaceInterior:
      if (!zs.empty()) v[zs.front()] = 1.0 - 2.0 * policy.theta;
      return v;
    case TieBreakPolicy::Kind::Seeded: {
      std::uniform_real_distribution<double> uni(-0.9, 0.9);
      for (auto j : zs) v[j] = uni(rng);
      return v;
    }
  }
  throw std::logic_error("unreachable tie-break kind");
}

Vec optimal_counterfactual(const Hyperplane& h, const Vec& x, NormKind norm1,
                           const TieBreakPolicy& policy, std::mt19937_64& rng,
                           const Tolerances& tols) {
  if (x.size() != h.a.size()) {
    throw std::invalid_argument("counterfactual: dimension mismatch");
  }
  const double d = boundary_distance(h, x, norm1);
  const double scale = std::abs(h.b) + h.a.cwiseAbs().sum() * x.cwiseAbs().maxCoeff();
  if (std::abs(d) * dual_norm_eval(h.a, norm1) <= tols.band(scale)) {
    return x;  // on the boundary: distance 0 is optimal over the closed region
  }
  const Vec v = tie_broken_maximizer(h.a, norm1, policy, rng, tols);
  return x + d * v;
}

Vec optimal_robust_counterfactual(const Hyperplane& h, const Vec& x,
                                  NormKind norm1, const RobustnessSpec& spec,
                                  const TieBreakPolicy& policy,
                                  std::mt19937_64& rng,
                                  const Tolerances& tols) {
  if (x.size() != h.a.size()) {
    throw std::invalid_argument("robust counterfactual: dimension mismatch");
  }
  if (!(spec.rho > 0.0)) {
    throw std::invalid_argument("robust counterfactual: rho must be > 0");
  }
  const int label = classify(h, x);
  const double d = (h.b - h.a.dot(x) -
                    label * spec.rho * dual_norm_eval(h.a, spec.norm2)) /
                   dual_norm_eval(h.a, norm1);
  const Vec v = tie_broken_maximizer(h.a, norm1, policy, rng, tols);
  return x + d * v;
}

int QueryOracle::factual_query(const Vec& x) {
  const int label = classify(h_, x);
  QueryRecord r;
  r.kind = QueryKind::Factual;
  r.input = x;
  r.output_label = label;
  r.factual_label_at_input = label;
  ledger_.append(std::move(r));
  return label;
}

Vec QueryOracle::counterfactual_query(const Vec& x) {
  Vec cf = optimal_counterfactual(h_, x, norm1_, policy_, rng_);
  QueryRecord r;
  r.kind = QueryKind::Counterfactual;
  r.input = x;
  r.output_point = cf;
  r.factual_label_at_input = classify(h_, x);
  ledger_.append(std::move(r));
  return cf;
}

Vec QueryOracle::robust_counterfactual_query(const Vec& x) {
  if (!spec_) {
    throw std::logic_error("oracle has no robustness spec");
  }
  Vec rcf = optimal_robust_counterfactual(h_, x, norm1_, *spec_, policy_, rng_);
  QueryRecord r;
  r.kind = QueryKind::RobustCounterfactual;
  r.input = x;
  r.output_point = rcf;
  r.factual_label_at_input = classify(h_, x);
  ledger_.append(std::move(r));
  return rcf;
}

}  // namespace linex
