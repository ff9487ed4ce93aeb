#include "linex/extraction.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace linex {

std::string to_string(DegeneratePath p) {
  switch (p) {
    case DegeneratePath::None:
      return "none";
    case DegeneratePath::ZeroCf:
      return "zero_cf";
    case DegeneratePath::BoundaryFactual:
      return "boundary_factual";
  }
  return "?";
}

EquivalenceResult hyperplanes_equivalent(const Hyperplane& h1,
                                         const Hyperplane& h2, double tol) {
  if (h1.dim() != h2.dim()) {
    throw std::invalid_argument("hyperplanes_equivalent: dimension mismatch");
  }
  const Eigen::Index p = h1.dim();
  Vec n1(p + 1), n2(p + 1);
  n1 << h1.a, h1.b;
  n2 << h2.a, h2.b;
  n1 /= n1.norm();
  n2 /= n2.norm();
  const double rp = (n1 - n2).norm();
  const double rm = (n1 + n2).norm();
  EquivalenceResult res;
  res.orientation_flipped = rm < rp;
  res.residual = std::min(rp, rm);
  res.equivalent = res.residual <= tol;
  return res;
}

namespace {

Hyperplane normalized_hyperplane(Vec w, Eigen::Index p,
                                 const Tolerances& tols) {
  Vec a = w.head(p);
  double b = w[p];
  const double na = a.norm();
  a /= na;
  b /= na;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::abs(a[i]) > tols.band(1.0)) {
      if (a[i] < 0.0) {
        a = -a;
        b = -b;
      }
      break;
    }
  }
  return Hyperplane(std::move(a), b);
}

}  // namespace

Hyperplane solve_hyperplane_from_boundary_points(const std::vector<Vec>& points,
                                                 std::optional<double> fixed_b,
                                                 const Tolerances& tols) {
  if (points.empty()) {
    throw std::invalid_argument("solve_hyperplane: no points");
  }
  const Eigen::Index p = points.front().size();
  const Eigen::Index cols = fixed_b ? p : p + 1;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), cols);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != p) {
      throw std::invalid_argument("solve_hyperplane: inconsistent dimensions");
    }
    m.row(static_cast<Eigen::Index>(i)).head(p) = points[i].transpose();
    if (!fixed_b) m(static_cast<Eigen::Index>(i), p) = -1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = sv.size() > 0 ? sv[0] * tols.rank_rel : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += (sv[i] > thresh) ? 1 : 0;
  if (rank != cols - 1) {
    throw std::runtime_error("degenerate query set: measured rank " +
                             std::to_string(rank) + ", need " +
                             std::to_string(cols - 1));
  }
  Vec null_dir = svd.matrixV().col(cols - 1);
  Vec w(p + 1);
  if (fixed_b) {
    w << null_dir, *fixed_b;
  } else {
    w = null_dir;
  }
  if (w.head(p).norm() == 0.0) {
    throw std::runtime_error("degenerate query set: zero weight solution");
  }
  return normalized_hyperplane(std::move(w), p, tols);
}

namespace {

Vec unit_vector(Eigen::Index p, Eigen::Index i) {
  Vec e = Vec::Zero(p);
  e[i] = 1.0;
  return e;
}

// One factual query at a point the recovered hyperplane strictly classifies
// as +1; flips the sign of (a, b) when the hidden model disagrees.
void orient_with_factual(QueryOracle& oracle, Hyperplane& h) {
  // a^T probe - b = (1 + |b|) - b >= 1
  const Vec probe = h.a * ((1.0 + std::abs(h.b)) / h.a.squaredNorm());
  if (oracle.factual_query(probe) < 0) {
    h.a = -h.a;
    h.b = -h.b;
  }
}

struct LedgerMark {
  int cf, rcf, factual;
  explicit LedgerMark(const QueryOracle& o)
      : cf(o.ledger().count(QueryKind::Counterfactual)),
        rcf(o.ledger().count(QueryKind::RobustCounterfactual)),
        factual(o.ledger().count(QueryKind::Factual)) {}
  void fill(const QueryOracle& o, ExtractionReport& r) const {
    r.queries_cf = o.ledger().count(QueryKind::Counterfactual) - cf;
    r.queries_rcf = o.ledger().count(QueryKind::RobustCounterfactual) - rcf;
    r.queries_factual = o.ledger().count(QueryKind::Factual) - factual;
  }
};

bool moved(const Vec& from, const Vec& to, const Tolerances& tols) {
  const double scale = std::max(1.0, from.lpNorm<Eigen::Infinity>());
  return (to - from).lpNorm<Eigen::Infinity>() > tols.band(scale);
}

}  // namespace

ExtractionReport extract_cf_differentiable(QueryOracle& oracle, const Vec& x_F,
                                           const Tolerances& tols) {
  if (!oracle.norm1().differentiable()) {
    throw std::invalid_argument(
        "extract_cf_differentiable: norm1 is not differentiable; "
        "use the non-differentiable attack");
  }
  const LedgerMark mark(oracle);
  ExtractionReport report;
  Vec base = x_F;
  Vec cf = oracle.counterfactual_query(base);
  if (!moved(base, cf, tols)) {
    // x_F sits on the hyperplane; probe p linearly independent neighbours.
    report.degenerate_path = DegeneratePath::BoundaryFactual;
    const Eigen::Index p = oracle.dim();
    bool found = false;
    for (Eigen::Index i = 0; i < p && !found; ++i) {
      base = x_F + unit_vector(p, i);
      cf = oracle.counterfactual_query(base);
      found = moved(base, cf, tols);
    }
    if (!found) {
      throw std::runtime_error("extract_cf_differentiable: no probe left the hyperplane");
    }
  }
  Vec a_hat = norm_gradient(cf - base, oracle.norm1());
  Hyperplane h(std::move(a_hat), 0.0);
  h.b = h.a.dot(cf);
  orient_with_factual(oracle, h);
  report.recovered = std::move(h);
  mark.fill(oracle, report);
  return report;
}

ExtractionReport extract_cf_nondifferentiable(QueryOracle& oracle,
                                              const Tolerances& tols) {
  if (oracle.norm1().differentiable()) {
    throw std::invalid_argument(
        "extract_cf_nondifferentiable: norm1 is differentiable; "
        "a single counterfactual query suffices");
  }
  const LedgerMark mark(oracle);
  ExtractionReport report;
  const Eigen::Index p = oracle.dim();

  std::vector<Vec> on_plane;  // probes whose counterfactual did not move
  std::optional<Vec> v_raw;
  Eigen::Index found_at = -1;
  Vec first_moving_cf;
  for (Eigen::Index i = 0; i < p; ++i) {
    const Vec probe = unit_vector(p, i);
    const Vec cf = oracle.counterfactual_query(probe);
    if (moved(probe, cf, tols)) {
      v_raw = cf - probe;
      first_moving_cf = cf;
      found_at = i;
      break;
    }
    on_plane.push_back(probe);
  }

  std::vector<Vec> system_points;
  bool need_basis = v_raw.has_value();
  if (!v_raw) {
    // every standard basis vector lies on the hyperplane
    system_points = on_plane;
  } else if (found_at == p - 1 &&
             static_cast<Eigen::Index>(on_plane.size()) == p - 1) {
    // direction found only at the last probe: the earlier probes plus this
    // counterfactual usually give p points on the hyperplane already
    std::vector<Vec> shortcut = on_plane;
    shortcut.push_back(first_moving_cf);
    Eigen::MatrixXd m(p, p + 1);
    for (Eigen::Index i = 0; i < p; ++i) {
      m.row(i).head(p) = shortcut[static_cast<std::size_t>(i)].transpose();
      m(i, p) = -1.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    if (svd.singularValues()[p - 1] >
        svd.singularValues()[0] * tols.rank_rel) {
      system_points = std::move(shortcut);
      need_basis = false;
    }
  }
  if (need_basis) {
    system_points.clear();
    const Vec v_hat = *v_raw / norm_eval(*v_raw, oracle.norm1());
    for (const Vec& bv : basis_containing(v_hat, tols)) {
      system_points.push_back(oracle.counterfactual_query(bv));
    }
  }

  // Zero counterfactual: the origin lies on the hyperplane, so b = 0 and the
  // remaining points determine the direction of a.
  std::vector<Vec> nonzero;
  bool saw_zero = false;
  for (const Vec& pt : system_points) {
    if (pt.lpNorm<Eigen::Infinity>() <= tols.band(1.0)) {
      saw_zero = true;
    } else {
      nonzero.push_back(pt);
    }
  }

  Hyperplane h = saw_zero
                     ? solve_hyperplane_from_boundary_points(nonzero, 0.0, tols)
                     : solve_hyperplane_from_boundary_points(system_points,
                                                             std::nullopt, tols);
  if (saw_zero) report.degenerate_path = DegeneratePath::ZeroCf;
  orient_with_factual(oracle, h);
  report.recovered = std::move(h);
  mark.fill(oracle, report);
  return report;
}

ExtractionReport extract_rcf_differentiable(QueryOracle& oracle, const Vec& x_F,
                                            const Tolerances& tols) {
  if (!oracle.norm1().differentiable()) {
    throw std::invalid_argument(
        "extract_rcf_differentiable: norm1 is not differentiable; "
        "use the non-differentiable attack");
  }
  if (!oracle.robustness()) {
    throw std::logic_error("extract_rcf_differentiable: oracle lacks a robustness spec");
  }
  const LedgerMark mark(oracle);
  ExtractionReport report;
  const RobustnessSpec spec = *oracle.robustness();
  const int label = oracle.factual_query(x_F);
  const Vec rcf = oracle.robust_counterfactual_query(x_F);
  if (!moved(x_F, rcf, tols)) {
    throw std::runtime_error("extract_rcf_differentiable: robust counterfactual did not move");
  }
  // The perturbation is a positive multiple of the dual maximizer only for a
  // 'No' factual; -label orients the gradient readout for both labels, which
  // the offset formula needs (its rho term is not scale-antisymmetric).
  Vec a_hat = -label * norm_gradient(rcf - x_F, oracle.norm1());
  const double b_hat =
      a_hat.dot(rcf) + label * spec.rho * dual_norm_eval(a_hat, spec.norm2);
  report.recovered = Hyperplane(std::move(a_hat), b_hat);
  mark.fill(oracle, report);
  return report;
}

namespace {

struct RcfRecordObs {
  Vec x_f;
  Vec x_rcf;
  int label;
};

// Roots of the convex scalar equation dual2(a(t)) = 1 along the solution
// line w(t) = w0 + t*w1. A convex function's unit level set is an interval;
// the candidates are its endpoints.
std::vector<double> dual_norm_line_roots(const Vec& w0, const Vec& w1,
                                         Eigen::Index p, NormKind norm2,
                                         const Tolerances& tols) {
  auto g = [&](double t) {
    const Vec w = w0 + t * w1;
    return dual_norm_eval(w.head(p), norm2) - 1.0;
  };
  // bracket a minimizer
  double lo = -1.0, hi = 1.0;
  for (int k = 0; k < 120 && g(lo) < g(lo + 1e-3 * (hi - lo)); ++k) lo *= 2.0;
  for (int k = 0; k < 120 && g(hi) < g(hi - 1e-3 * (hi - lo)); ++k) hi *= 2.0;
  // golden-section for the minimum
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  for (int k = 0; k < 220; ++k) {
    if (g(c) < g(d)) {
      hi = d;
    } else {
      lo = c;
    }
    c = hi - gr * (hi - lo);
    d = lo + gr * (hi - lo);
  }
  const double t_min = 0.5 * (lo + hi);
  const double g_min = g(t_min);
  std::vector<double> roots;
  if (g_min > tols.band(1.0)) {
    return roots;  // the line misses the unit dual-norm level set
  }
  auto bisect = [&](double inside, double outside) {
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (inside + outside);
      if (g(mid) <= 0.0) {
        inside = mid;
      } else {
        outside = mid;
      }
      if (std::abs(outside - inside) <=
          1e-15 * std::max(1.0, std::abs(inside))) {
        break;
      }
    }
    return 0.5 * (inside + outside);
  };
  double right = t_min + 1.0;
  for (int k = 0; k < 200 && g(right) <= 0.0; ++k) right = t_min + std::pow(2.0, k);
  roots.push_back(bisect(t_min, right));
  double left = t_min - 1.0;
  for (int k = 0; k < 200 && g(left) <= 0.0; ++k) left = t_min - std::pow(2.0, k);
  roots.push_back(bisect(t_min, left));
  return roots;
}

// Optimality-condition consistency of a candidate against every observed
// record: touch residual, Hoelder equality along the observed perturbation,
// and agreement with the observed factual labels. All terms are relative to
// their natural scale; an inconsistent candidate violates by O(1).
double candidate_violation(const Hyperplane& h,
                           const std::vector<RcfRecordObs>& obs, NormKind norm1,
                           const RobustnessSpec& spec, const Tolerances& tols) {
  double worst = 0.0;
  const double dual1 = dual_norm_eval(h.a, norm1);
  const double dual2 = dual_norm_eval(h.a, spec.norm2);
  for (const auto& o : obs) {
    const double touch_scale =
        1.0 + std::abs(h.a.dot(o.x_rcf)) + std::abs(h.b) + spec.rho * dual2;
    const double touch =
        std::abs(h.a.dot(o.x_rcf) - h.b + o.label * spec.rho * dual2);
    worst = std::max(worst, touch / touch_scale);
    const Vec d = o.x_rcf - o.x_f;
    const double align_scale = dual1 * norm_eval(d, norm1);
    const double align = std::abs(std::abs(h.a.dot(d)) - align_scale);
    worst = std::max(worst, align / align_scale);
    const double margin = h.a.dot(o.x_f) - h.b;
    const double margin_scale =
        h.a.cwiseAbs().maxCoeff() * (1.0 + o.x_f.cwiseAbs().maxCoeff()) +
        std::abs(h.b);
    // records with an ambiguous margin do not vote on the label
    if (std::abs(margin) > tols.band(margin_scale) &&
        classify(h, o.x_f) != o.label) {
      worst = std::max(worst, 1.0);
    }
  }
  return worst;
}

}  // namespace

RcfSystemResult solve_rcf_touch_system(const std::vector<Vec>& x_f,
                                       const std::vector<Vec>& x_rcf,
                                       const std::vector<int>& labels,
                                       NormKind norm1,
                                       const RobustnessSpec& spec,
                                       const Tolerances& tols) {
  if (x_f.size() != x_rcf.size() || x_f.size() != labels.size() || x_f.empty()) {
    throw std::invalid_argument("solve_rcf_touch_system: mismatched records");
  }
  const Eigen::Index p = x_f.front().size();
  std::vector<RcfRecordObs> obs;
  for (std::size_t i = 0; i < x_f.size(); ++i) {
    obs.push_back({x_f[i], x_rcf[i], labels[i]});
  }

  // Touch equations under the scaling ||a||_norm2^* = 1:
  //   a^T x_rcf_i - b = -label_i * rho.
  Eigen::MatrixXd m(static_cast<Eigen::Index>(obs.size()), p + 1);
  Vec rhs(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    m.row(row).head(p) = obs[i].x_rcf.transpose();
    m(row, p) = -1.0;
    rhs[row] = -obs[i].label * spec.rho;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeFullV | Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double thresh = sv[0] * tols.rank_rel;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += (sv[i] > thresh) ? 1 : 0;
  if (rank < p) {
    throw std::runtime_error("degenerate query set: measured rank " +
                             std::to_string(rank) + ", need " +
                             std::to_string(p));
  }
  svd.setThreshold(tols.rank_rel);
  const Vec w0 = svd.solve(rhs);  // least-norm / least-squares solution

  std::vector<Vec> candidates;
  if (rank == p + 1) {
    // more than p affinely independent touch points pin (a, b) uniquely,
    // scale included
    candidates.push_back(w0);
  } else {
    const Vec w1 = svd.matrixV().col(p);  // kernel direction
    for (double t : dual_norm_line_roots(w0, w1, p, spec.norm2, tols)) {
      candidates.push_back(w0 + t * w1);
    }
  }

  RcfSystemResult out;
  double best_violation = 0.0;
  for (const Vec& w : candidates) {
    if (w.head(p).lpNorm<Eigen::Infinity>() <= tols.band(1.0)) continue;
    Hyperplane cand(w.head(p), w[p]);
    const double viol = candidate_violation(cand, obs, norm1, spec, tols);
    out.candidates.push_back(std::move(cand));
    const bool ok = viol <= 1e-5;
    out.consistent.push_back(ok);
    if (ok && (out.chosen < 0 || viol < best_violation)) {
      out.chosen = static_cast<int>(out.candidates.size()) - 1;
      best_violation = viol;
    }
  }
  return out;
}

ExtractionReport extract_rcf_nondifferentiable(QueryOracle& oracle,
                                               const Tolerances& tols) {
  if (oracle.norm1().differentiable()) {
    throw std::invalid_argument(
        "extract_rcf_nondifferentiable: norm1 is differentiable; "
        "one robust counterfactual query suffices");
  }
  if (!oracle.robustness()) {
    throw std::logic_error("extract_rcf_nondifferentiable: oracle lacks a robustness spec");
  }
  const LedgerMark mark(oracle);
  ExtractionReport report;
  const Eigen::Index p = oracle.dim();
  const RobustnessSpec spec = *oracle.robustness();

  std::vector<Vec> xs, rcfs;
  std::vector<int> labels;
  std::optional<Vec> v_raw;
  for (Eigen::Index i = 0; i < p && !v_raw; ++i) {
    const Vec probe = unit_vector(p, i);
    labels.push_back(oracle.factual_query(probe));
    rcfs.push_back(oracle.robust_counterfactual_query(probe));
    xs.push_back(probe);
    if (moved(probe, rcfs.back(), tols)) v_raw = rcfs.back() - probe;
  }
  if (!v_raw) {
    throw std::runtime_error("extract_rcf_nondifferentiable: no probe produced a direction");
  }
  const Vec v_hat = *v_raw / norm_eval(*v_raw, oracle.norm1());
  for (const Vec& bv : basis_containing(v_hat, tols)) {
    labels.push_back(oracle.factual_query(bv));
    rcfs.push_back(oracle.robust_counterfactual_query(bv));
    xs.push_back(bv);
  }
  for (const Vec& r : rcfs) {
    if (r.lpNorm<Eigen::Infinity>() <= tols.band(1.0)) {
      report.degenerate_path = DegeneratePath::ZeroCf;
    }
  }

  const RcfSystemResult sol =
      solve_rcf_touch_system(xs, rcfs, labels, oracle.norm1(), spec, tols);
  if (sol.chosen < 0) {
    throw std::runtime_error("no consistent orientation");
  }
  // scale-normalize but keep the consistent candidate's orientation
  const Hyperplane& best = sol.candidates[static_cast<std::size_t>(sol.chosen)];
  const double na = best.a.norm();
  report.recovered = Hyperplane(best.a / na, best.b / na);
  mark.fill(oracle, report);
  return report;
}

}  // namespace linex
