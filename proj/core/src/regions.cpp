#include "linex/regions.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace linex {

char label_char(RegionLabel l) {
  switch (l) {
    case RegionLabel::Yes:
      return 'Y';
    case RegionLabel::No:
      return 'N';
    case RegionLabel::Unknown:
      return 'U';
  }
  return '?';
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Factual:
      return "factual";
    case ModelKind::Counterfactual:
      return "cf";
    case ModelKind::RobustCounterfactual:
      return "rcf";
  }
  return "?";
}

namespace {

// coeff over (a, b) from a point row a^T x - b
Vec point_row(const Vec& x) {
  Vec c(x.size() + 1);
  c << x, -1.0;
  return c;
}

double sense_violation(double r, RowSense sense) {
  switch (sense) {
    case RowSense::LE:
      return r;
    case RowSense::GE:
      return -r;
    case RowSense::EQ:
      return std::abs(r);
  }
  return 0.0;
}

}  // namespace

double lowered_violation(const LoweredModel& lm, const Vec& a, double b) {
  Vec w = Vec::Zero(lm.nvars);
  w.head(a.size()) = a;
  w[a.size()] = b;
  if (lm.l1_lift_base >= 0) {
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      w[lm.l1_lift_base + k] = std::abs(a[k]);
    }
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [c, sense] : lm.rows) {
    worst = std::max(worst, sense_violation(c.dot(w), sense));
  }
  for (const auto& [F, f] : lm.socs) {
    worst = std::max(worst, (F * w).norm() - f.dot(w));
  }
  return worst;
}

double UncertaintyModel::violation(const Vec& a, double b) const {
  return lowered_violation(lower_model(*this), a, b);
}

namespace {

// Rows enforcing membership of a in the cone generated by the
// subdifferential of ||.||_norm1 at dir, i.e. a^T u = ||a||_norm1^* for the
// unit direction u. Emits explicit equalities so flat faces stay visible to
// the nullspace machinery.
void lower_alignment(const Vec& dir, NormKind norm1, LoweredModel& out,
                     const Tolerances& tols) {
  const auto p = dir.size();
  const int n = out.nvars;
  auto coeff_a = [&](Eigen::Index i, double v) {
    Vec c = Vec::Zero(n);
    c[i] = v;
    return c;
  };
  if (norm1.differentiable()) {
    const Vec g = norm_gradient(dir, norm1);
    const auto basis = basis_containing(g, tols);
    for (std::size_t k = 1; k < basis.size(); ++k) {
      Vec c = Vec::Zero(n);
      c.head(p) = basis[k];
      out.rows.emplace_back(std::move(c), RowSense::EQ);
    }
    Vec c = Vec::Zero(n);
    c.head(p) = g;
    out.rows.emplace_back(std::move(c), RowSense::GE);
    return;
  }
  if (norm1.family() == NormFamily::L1) {
    const Vec u = dir / dir.lpNorm<1>();
    std::vector<Eigen::Index> supp;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (std::abs(u[i]) > tols.band(1.0)) supp.push_back(i);
    }
    const Eigen::Index k0 = supp.front();
    const double s0 = u[k0] >= 0 ? 1.0 : -1.0;
    // sgn(u_k) a_k all equal on the support; that common value is ||a||_inf
    for (std::size_t j = 1; j < supp.size(); ++j) {
      Vec c = Vec::Zero(n);
      c[supp[j]] = u[supp[j]] >= 0 ? 1.0 : -1.0;
      c[k0] -= s0;
      out.rows.emplace_back(std::move(c), RowSense::EQ);
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      if (std::find(supp.begin(), supp.end(), i) != supp.end()) continue;
      Vec c1 = coeff_a(k0, s0);
      c1[i] -= 1.0;
      out.rows.emplace_back(std::move(c1), RowSense::GE);
      Vec c2 = coeff_a(k0, s0);
      c2[i] += 1.0;
      out.rows.emplace_back(std::move(c2), RowSense::GE);
    }
    out.rows.emplace_back(coeff_a(k0, s0), RowSense::GE);
    return;
  }
  // linf: coordinates where |u_i| < 1 force a_i = 0, the rest pin the sign
  const Vec u = dir / dir.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::abs(u[i]) >= 1.0 - tols.band(1.0)) {
      out.rows.emplace_back(coeff_a(i, u[i] >= 0 ? 1.0 : -1.0), RowSense::GE);
    } else {
      out.rows.emplace_back(coeff_a(i, 1.0), RowSense::EQ);
    }
  }
}

struct BallLowering {
  bool needs_l1_lift = false;
};

// rho * ||a||_{dual(ball)} <= affine . w with affine = side * (b - a^T x).
void lower_ball_row(const NormBallConstraint& nc, LoweredModel& out,
                    int l1_lift_base, const Tolerances& tols) {
  const auto p = nc.x.size();
  const int n = out.nvars;
  Vec affine = Vec::Zero(n);
  affine.head(p) = -nc.side * nc.x;
  affine[p] = nc.side;
  if (nc.rho <= tols.band(1.0)) {
    // degenerate radius: plain half-space 0 <= affine . w
    out.rows.emplace_back(-affine, RowSense::LE);
    return;
  }
  const NormKind dual = nc.ball_norm.dual();
  switch (dual.family()) {
    case NormFamily::Linf: {  // ball = l1: rho |a_k| <= affine
      for (Eigen::Index k = 0; k < p; ++k) {
        for (double s : {1.0, -1.0}) {
          Vec c = -affine;
          c[k] += s * nc.rho;
          out.rows.emplace_back(std::move(c), RowSense::LE);
        }
      }
      return;
    }
    case NormFamily::L1: {  // ball = linf: shared lift t_k >= |a_k|
      Vec c = -affine;
      for (Eigen::Index k = 0; k < p; ++k) c[l1_lift_base + k] += nc.rho;
      out.rows.emplace_back(std::move(c), RowSense::LE);
      return;
    }
    case NormFamily::L2: {
      Eigen::MatrixXd F = Eigen::MatrixXd::Zero(p, n);
      F.topLeftCorner(p, p) = nc.rho * Eigen::MatrixXd::Identity(p, p);
      out.socs.emplace_back(std::move(F), affine);
      return;
    }
    case NormFamily::Lp: {
      // sound outer relaxation: ||a||_q >= ||a||_inf and
      // ||a||_q >= p^{min(0, 1/q - 1/2)} ||a||_2
      out.relaxed = true;
      for (Eigen::Index k = 0; k < p; ++k) {
        for (double s : {1.0, -1.0}) {
          Vec c = -affine;
          c[k] += s * nc.rho;
          out.rows.emplace_back(std::move(c), RowSense::LE);
        }
      }
      const double q = dual.exponent();
      const double c2 = std::pow(static_cast<double>(p),
                                 std::min(0.0, 1.0 / q - 0.5));
      Eigen::MatrixXd F = Eigen::MatrixXd::Zero(p, n);
      F.topLeftCorner(p, p) = nc.rho * c2 * Eigen::MatrixXd::Identity(p, p);
      out.socs.emplace_back(std::move(F), affine);
      return;
    }
  }
}

// Linear expression equal to ||a||_{norm2}^* on the face pinned by the
// alignment rows of dir, when one exists.
std::optional<Vec> pinned_dual_norm_expr(const Vec& dir, NormKind norm1,
                                         NormKind norm2, int nvars,
                                         const Tolerances& tols) {
  const auto p = dir.size();
  if (norm1.differentiable()) {
    // a = t g, t >= 0: ||a||_{norm2}^* = t ||g||_{norm2}^*, t = g.a / g.g
    const Vec g = norm_gradient(dir, norm1);
    Vec c = Vec::Zero(nvars);
    c.head(p) = g * (dual_norm_eval(g, norm2) / g.squaredNorm());
    return c;
  }
  if (norm1.family() == NormFamily::L1 && norm2.family() == NormFamily::L1) {
    // ||a||_{l1}^* = ||a||_inf = sgn(u_k0) a_k0 on the pinned face
    const Vec u = dir / dir.lpNorm<1>();
    Eigen::Index k0 = 0;
    u.cwiseAbs().maxCoeff(&k0);
    Vec c = Vec::Zero(nvars);
    c[k0] = u[k0] >= 0 ? 1.0 : -1.0;
    return c;
  }
  if (norm1.family() == NormFamily::Linf && norm2.family() == NormFamily::Linf) {
    // ||a||_{linf}^* = ||a||_1 = sum of pinned signs (zeroed coords drop out)
    const Vec u = dir / dir.lpNorm<Eigen::Infinity>();
    Vec c = Vec::Zero(nvars);
    for (Eigen::Index i = 0; i < p; ++i) {
      if (std::abs(u[i]) >= 1.0 - tols.band(1.0)) {
        c[i] = u[i] >= 0 ? 1.0 : -1.0;
      }
    }
    return c;
  }
  return std::nullopt;
}

}  // namespace

LoweredModel lower_model(const UncertaintyModel& model, const Tolerances& tols) {
  LoweredModel out;
  out.p = model.dim;
  const int p = model.dim;
  bool l1_lift = false;
  auto dual_is_l1 = [](NormKind ball) {
    return ball.family() == NormFamily::Linf;
  };
  for (const auto& nc : model.norm_constraints) {
    if (!nc.implied && dual_is_l1(nc.ball_norm) && nc.rho > tols.band(1.0)) {
      l1_lift = true;
    }
  }
  for (const auto& de : model.dualnorm_equalities) {
    // intractable touch equalities relax to ball rows and may need the lift
    if (dual_is_l1(de.norm2) && de.rho > tols.band(1.0) &&
        !pinned_dual_norm_expr(de.dir, de.norm1, de.norm2, p + 1, tols)) {
      l1_lift = true;
    }
  }
  const int l1_lift_base = p + 1;
  out.nvars = p + 1 + (l1_lift ? p : 0);
  out.l1_lift_base = l1_lift ? l1_lift_base : -1;

  auto widen = [&](const Vec& c) {
    Vec w = Vec::Zero(out.nvars);
    w.head(c.size()) = c;
    return w;
  };

  for (const auto& lc : model.linear_constraints) {
    out.rows.emplace_back(widen(lc.coeff), lc.sense);
  }
  for (const auto& nc : model.norm_constraints) {
    if (nc.implied) continue;  // entailed by equality + alignment rows
    lower_ball_row(nc, out, l1_lift_base, tols);
  }
  for (const auto& de : model.dualnorm_equalities) {
    const auto expr =
        pinned_dual_norm_expr(de.dir, de.norm1, de.norm2, out.nvars, tols);
    if (expr) {
      Vec c = widen(point_row(de.x_rcf));
      c += de.label * de.rho * *expr;
      out.rows.emplace_back(std::move(c), RowSense::EQ);
    } else {
      // intractable equality: keep the sound ball inequality instead
      out.relaxed = true;
      NormBallConstraint nc{de.x_rcf, de.rho, de.norm2, de.label};
      lower_ball_row(nc, out, l1_lift_base, tols);
    }
  }
  for (const auto& sc : model.subgradient_constraints) {
    lower_alignment(sc.dir, sc.norm1, out, tols);
  }
  if (l1_lift) {
    // t_k >= |a_k|
    for (int k = 0; k < p; ++k) {
      for (double s : {1.0, -1.0}) {
        Vec c = Vec::Zero(out.nvars);
        c[k] = s;
        c[l1_lift_base + k] = -1.0;
        out.rows.emplace_back(std::move(c), RowSense::LE);
      }
    }
  }
  out.relaxed = out.relaxed || model.relaxed;
  return out;
}

UncertaintyModel model_from_ledger(const QueryLedger& ledger, NormKind norm1,
                                   std::optional<RobustnessSpec> spec,
                                   bool strict_rcf, const Tolerances& tols) {
  UncertaintyModel m;
  m.norm1 = norm1;
  m.rspec = spec;
  m.strict_rcf = strict_rcf;
  if (ledger.records().empty()) {
    throw std::invalid_argument("model_from_ledger: empty ledger");
  }
  m.dim = static_cast<int>(ledger.records().front().input.size());
  const int p = m.dim;

  // structural consistency: no point may carry both labels
  auto same_point = [&](const Vec& x, const Vec& y) {
    return (x - y).lpNorm<Eigen::Infinity>() <=
           tols.band(x.lpNorm<Eigen::Infinity>());
  };
  std::vector<std::pair<Vec, int>> seen;
  auto note_label = [&](const Vec& x, int label) {
    if (label == 0) return;
    for (const auto& [px, pl] : seen) {
      if (same_point(px, x) && pl != label) {
        throw std::invalid_argument("inconsistent ledger");
      }
    }
    seen.emplace_back(x, label);
  };

  for (const auto& rec : ledger.records()) {
    if (rec.input.size() != p) {
      throw std::invalid_argument("model_from_ledger: mixed dimensions");
    }
    switch (rec.kind) {
      case QueryKind::Factual: {
        note_label(rec.input, rec.output_label);
        m.factuals.push_back({rec.input, rec.output_label});
        break;
      }
      case QueryKind::Counterfactual: {
        if (rec.factual_label_at_input == 0) {
          throw std::invalid_argument(
              "model_from_ledger: cf record lacks the factual label of its input");
        }
        note_label(rec.input, rec.factual_label_at_input);
        const double rho = norm_eval(rec.input - rec.output_point, norm1);
        m.cfs.push_back({rec.input, rec.output_point,
                         rec.factual_label_at_input, rho});
        m.kind = ModelKind::Counterfactual;
        break;
      }
      case QueryKind::RobustCounterfactual: {
        if (!spec) {
          throw std::invalid_argument(
              "model_from_ledger: rcf records need a robustness spec");
        }
        if (rec.factual_label_at_input == 0) {
          throw std::invalid_argument(
              "model_from_ledger: rcf record lacks the factual label of its input");
        }
        note_label(rec.input, rec.factual_label_at_input);
        m.rcfs.push_back({rec.input, rec.output_point,
                          rec.factual_label_at_input});
        m.kind = ModelKind::RobustCounterfactual;
        break;
      }
    }
  }

  // typed rows
  for (const auto& f : m.factuals) {
    m.linear_constraints.push_back(
        {point_row(f.x), f.label > 0 ? RowSense::GE : RowSense::LE});
  }
  for (const auto& cf : m.cfs) {
    const bool has_direction = cf.rho > tols.band(1.0);
    // ball of radius rho_j around the factual stays on its side; with the
    // boundary equality and the alignment rows below this is implied exactly
    m.norm_constraints.push_back({cf.x, cf.rho, norm1, -cf.label, has_direction});
    // the counterfactual itself sits on the boundary
    m.linear_constraints.push_back({point_row(cf.x_cf), RowSense::EQ});
    if (has_direction) {
      m.subgradient_constraints.push_back(
          {-cf.label * (cf.x_cf - cf.x), norm1});
    }
  }
  for (const auto& rc : m.rcfs) {
    m.linear_constraints.push_back(
        {point_row(rc.x), rc.label > 0 ? RowSense::GE : RowSense::LE});
    const Vec dir = -rc.label * (rc.x_rcf - rc.x);
    if (m.strict_rcf) {
      m.dualnorm_equalities.push_back(
          {rc.x_rcf, spec->rho, spec->norm2, rc.label, dir, norm1});
    } else {
      m.norm_constraints.push_back({rc.x_rcf, spec->rho, spec->norm2, rc.label});
    }
    m.subgradient_constraints.push_back({dir, norm1});
  }
  return m;
}

UncertaintyModel augment_rcf_model(const UncertaintyModel& model,
                                   bool enable_perspective,
                                   [[maybe_unused]] const Tolerances& tols) {
  if (model.kind != ModelKind::RobustCounterfactual || !model.rspec) {
    throw std::invalid_argument("augment_rcf_model: model is not an RCF model");
  }
  UncertaintyModel out = model;
  out.augmented = true;
  const auto& spec = *model.rspec;
  const double rho = spec.rho;
  const int p = model.dim;
  const bool same_norm = model.norm1 == spec.norm2;

  auto dual_exponent = [](NormKind k) {
    switch (k.family()) {
      case NormFamily::L1:
        return std::numeric_limits<double>::infinity();
      case NormFamily::Linf:
        return 1.0;
      case NormFamily::L2:
        return 2.0;
      case NormFamily::Lp:
        return k.dual().exponent();
    }
    return 2.0;
  };
  // smallest C with ||a||_{norm2}^* <= C ||a||_{norm1}^* for all a:
  // for exponents alpha <= beta, ||a||_alpha <= p^{1/alpha - 1/beta} ||a||_beta
  const double alpha = dual_exponent(spec.norm2);
  const double beta = dual_exponent(model.norm1);
  double inv_alpha = std::isinf(alpha) ? 0.0 : 1.0 / alpha;
  double inv_beta = std::isinf(beta) ? 0.0 : 1.0 / beta;
  const double C =
      std::pow(static_cast<double>(p), std::max(0.0, inv_alpha - inv_beta));

  if (same_norm) {
    // the touch point is known exactly; the touching equalities convert to
    // ball inequalities plus the x_s boundary row
    out.dualnorm_equalities.clear();
    for (const auto& rc : model.rcfs) {
      out.norm_constraints.push_back({rc.x_rcf, rho, spec.norm2, rc.label});
    }
  }
  for (const auto& rc : model.rcfs) {
    const Vec dir = rc.x_rcf - rc.x;
    const Vec v_hat = dir / norm_eval(dir, model.norm1);
    if (enable_perspective) {
      const Vec x_bar = rc.x_rcf - (rho * C) * v_hat;
      out.linear_constraints.push_back(
          {point_row(x_bar), rc.label > 0 ? RowSense::GE : RowSense::LE});
      out.factuals.push_back({x_bar, rc.label});
    }
    if (same_norm) {
      const Vec x_s = rc.x_rcf - rho * v_hat;
      out.linear_constraints.push_back({point_row(x_s), RowSense::EQ});
    }
  }
  return out;
}

namespace {

FeasibilityProblem margin_problem(const LoweredModel& lm, const Vec& x,
                                  int margin_sign, double eps, double box) {
  FeasibilityProblem fp(lm.nvars);
  for (const auto& [c, sense] : lm.rows) {
    switch (sense) {
      case RowSense::LE:
        fp.add_le(c, 0.0);
        break;
      case RowSense::GE:
        fp.add_ge(c, 0.0);
        break;
      case RowSense::EQ:
        fp.add_eq(c, 0.0);
        break;
    }
  }
  for (const auto& [F, f] : lm.socs) {
    fp.add_soc(F, Vec::Zero(F.rows()), f, 0.0);
  }
  Vec margin = Vec::Zero(lm.nvars);
  margin.head(x.size()) = margin_sign * x;
  margin[x.size()] = -margin_sign;
  fp.add_ge(margin, eps);
  fp.add_box(box);
  return fp;
}

bool margin_infeasible(const LoweredModel& lm, const Vec& x, int margin_sign,
                       const Tolerances& tols) {
  const auto fp = margin_problem(lm, x, margin_sign, tols.strict_eps, 1.0);
  const FeasResult r = fp.solve(tols);
  if (r.status == FeasStatus::NumericalFailure) {
    throw FeasibilityError("feasibility solver failed in membership");
  }
  return r.status == FeasStatus::Infeasible;
}

RegionLabel membership_lowered(const LoweredModel& lm, const Vec& x,
                               const Tolerances& tols) {
  const bool no_infeasible = margin_infeasible(lm, x, +1, tols);
  const bool yes_infeasible = margin_infeasible(lm, x, -1, tols);
  if (no_infeasible && yes_infeasible) return RegionLabel::Yes;  // boundary everywhere
  if (no_infeasible) return RegionLabel::No;
  if (yes_infeasible) return RegionLabel::Yes;
  return RegionLabel::Unknown;
}

}  // namespace

RegionLabel membership(const UncertaintyModel& model, const Vec& x,
                       const Tolerances& tols) {
  return membership_lowered(lower_model(model, tols), x, tols);
}

namespace {

// Theorem-style dual systems. target = -1 tests the No region, +1 the Yes
// region: the witness system is feasible iff x belongs to that region.
bool dual_system_feasible(const UncertaintyModel& model, const Vec& x,
                          int target, const Tolerances& tols) {
  const int p = model.dim;
  struct Known {
    Vec x;
    int label;
  };
  std::vector<Known> known;
  for (const auto& f : model.factuals) known.push_back({f.x, f.label});
  for (const auto& cf : model.cfs) known.push_back({cf.x, cf.label});
  const auto nI = static_cast<int>(known.size());
  const auto nJ = static_cast<int>(model.cfs.size());

  if (nJ == 0) {
    // convex-combination witness: sum_{No} u - sum_{Yes} u = -target,
    // sum_{No} x u - sum_{Yes} x u = -target * x, u >= 0
    FeasibilityProblem fp(nI);
    Vec srow(nI);
    for (int i = 0; i < nI; ++i) srow[i] = known[i].label < 0 ? 1.0 : -1.0;
    fp.add_eq(srow, -static_cast<double>(target));
    for (int d = 0; d < p; ++d) {
      Vec row(nI);
      for (int i = 0; i < nI; ++i) {
        row[i] = (known[i].label < 0 ? 1.0 : -1.0) * known[i].x[d];
      }
      fp.add_eq(row, -target * x[d]);
    }
    for (int i = 0; i < nI; ++i) {
      Vec e = Vec::Zero(nI);
      e[i] = 1.0;
      fp.add_ge(e, 0.0);
    }
    fp.add_box(tols.witness_box);
    const FeasResult r = fp.solve(tols);
    if (r.status == FeasStatus::NumericalFailure) {
      throw FeasibilityError("feasibility solver failed in membership_dual");
    }
    return r.status == FeasStatus::Feasible;
  }

  // perspective/conic witness system for factual + counterfactual records
  const NormKind n1 = model.norm1;
  bool lift = n1.family() == NormFamily::L1;
  if (n1.family() == NormFamily::Lp) {
    throw std::invalid_argument(
        "membership_dual: lp(general) perspective rows are not supported");
  }
  // Variables: t(nI), u(nJ), v(nJ), y_a(nJ*p), q(nJ*p), [l1 lifts]. The y_b
  // block is eliminated analytically via y_b_j = label_j u_j, and u_j is
  // stored rescaled by rho_j so witnesses stay O(1) even for counterfactuals
  // that barely moved. The q_j blocks close the aggregated multiplier cone:
  // because each counterfactual ball touches its own boundary point, the
  // cone of aggregations u_j z^(j) + v_j (x_cf, -1) is not closed, and near
  // the region boundary the witness escapes along limit rays
  // (z_a - chi x_cf, 0). Those rays form the conic hull of a norm ball
  // through the origin, i.e. the tangent cone at 0 - a handful of linear
  // rows (the polar of the norm's subdifferential at the negated center).
  const int off_t = 0, off_u = nI, off_v = nI + nJ, off_ya = nI + 2 * nJ;
  const int off_q = off_ya + nJ * p;
  const int off_m = off_q + nJ * p;
  const int nv = off_m + (lift ? 2 * nJ * p : 0);
  FeasibilityProblem fp(nv);

  auto u_scale = [&](int j) {
    const double rho = model.cfs[static_cast<std::size_t>(j)].rho;
    return rho > tols.band(1.0) ? rho : 1.0;
  };

  // scalar row: -sum_{I0} t + sum_{I1} t + sum_J label_j u_j - sum_J v =
  // target. The +1 coefficient on the eliminated y_b block follows the conic
  // aggregation sum_j u_j z^(j) of the duality argument (validated
  // numerically by primal/dual raster agreement).
  Vec srow = Vec::Zero(nv);
  for (int i = 0; i < nI; ++i) srow[off_t + i] = known[i].label < 0 ? -1.0 : 1.0;
  for (int j = 0; j < nJ; ++j) {
    srow[off_u + j] = model.cfs[static_cast<std::size_t>(j)].label / u_scale(j);
    srow[off_v + j] = -1.0;
  }
  fp.add_eq(srow, static_cast<double>(target));

  // vector rows: sum_{I0} t x - sum_{I1} t x + sum_J y_a + sum_J q +
  // sum_J v x_cf = -target*x
  for (int d = 0; d < p; ++d) {
    Vec row = Vec::Zero(nv);
    for (int i = 0; i < nI; ++i) {
      row[off_t + i] = (known[i].label < 0 ? 1.0 : -1.0) * known[i].x[d];
    }
    for (int j = 0; j < nJ; ++j) {
      row[off_ya + j * p + d] = 1.0;
      row[off_q + j * p + d] = 1.0;
      row[off_v + j] = model.cfs[static_cast<std::size_t>(j)].x_cf[d];
    }
    fp.add_eq(row, -target * x[d]);
  }

  // || vec(vars) - center * scale_var ||_n1 <= radius * scale_var, lowered
  // per norm family; lift_base indexes this block's |.|-lift variables
  auto add_perspective = [&](int vec_base, int scale_var, const Vec& center,
                             double radius, int lift_base) {
    auto resid_coeff = [&](int d) {
      Vec c = Vec::Zero(nv);
      c[vec_base + d] = 1.0;
      c[scale_var] = -center[d];
      return c;
    };
    Vec rhs = Vec::Zero(nv);
    rhs[scale_var] = radius;
    switch (n1.family()) {
      case NormFamily::L2: {
        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(p, nv);
        for (int d = 0; d < p; ++d) F.row(d) = resid_coeff(d).transpose();
        fp.add_soc(std::move(F), Vec::Zero(p), rhs, 0.0);
        break;
      }
      case NormFamily::Linf: {
        for (int d = 0; d < p; ++d) {
          fp.add_le(resid_coeff(d) - rhs, 0.0);
          fp.add_le(-resid_coeff(d) - rhs, 0.0);
        }
        break;
      }
      case NormFamily::L1: {
        Vec msum = -rhs;
        for (int d = 0; d < p; ++d) {
          Vec me = Vec::Zero(nv);
          me[lift_base + d] = 1.0;
          fp.add_le(resid_coeff(d) - me, 0.0);
          fp.add_le(-resid_coeff(d) - me, 0.0);
          msum[lift_base + d] += 1.0;
        }
        fp.add_le(msum, 0.0);
        break;
      }
      default:
        break;
    }
  };

  for (int j = 0; j < nJ; ++j) {
    const auto& cf = model.cfs[static_cast<std::size_t>(j)];
    const double chi = -cf.label;  // +1 for 'No' records, -1 for 'Yes'
    const double us = u_scale(j);
    // u_j >= 0
    Vec ue = Vec::Zero(nv);
    ue[off_u + j] = 1.0;
    fp.add_ge(ue, 0.0);
    if (cf.rho <= tols.band(1.0)) {
      // boundary factual: the perspective row collapses to y_a = chi u x and
      // the closure ray vanishes
      for (int d = 0; d < p; ++d) {
        Vec c = Vec::Zero(nv);
        c[off_ya + j * p + d] = 1.0;
        c[off_u + j] = -chi * cf.x[d] / us;
        fp.add_eq(c, 0.0);
        Vec cq = Vec::Zero(nv);
        cq[off_q + j * p + d] = 1.0;
        fp.add_eq(cq, 0.0);
      }
      continue;
    }
    // || y_a_j - chi u_j x_j ||_n1 <= rho_j u_j with u_j = u'_j / us
    add_perspective(off_ya + j * p, off_u + j, chi * cf.x / us, cf.rho / us,
                    off_m + 2 * j * p);
    // closure rays: q_j in the tangent cone at 0 of Ball_n1(c_j, rho_j)
    // with c_j = chi (x_j - x_cf_j), i.e. g.q_j <= 0 for every extreme
    // subgradient g of ||.||_n1 at -c_j
    const Vec c_j = chi * (cf.x - cf.x_cf);
    const double cmax = c_j.cwiseAbs().maxCoeff();
    switch (n1.family()) {
      case NormFamily::L2: {
        Vec row = Vec::Zero(nv);
        for (int d = 0; d < p; ++d) row[off_q + j * p + d] = c_j[d];
        fp.add_ge(row, 0.0);
        break;
      }
      case NormFamily::Linf: {
        // subdifferential at -c: convex hull of sgn(-c_i) e^i over argmax
        for (int d = 0; d < p; ++d) {
          if (std::abs(c_j[d]) >= cmax * (1.0 - tols.band(1.0))) {
            Vec row = Vec::Zero(nv);
            row[off_q + j * p + d] = c_j[d] >= 0 ? 1.0 : -1.0;
            fp.add_ge(row, 0.0);
          }
        }
        break;
      }
      case NormFamily::L1: {
        // sum_{supp} sgn(c_i) q_i >= sum_{off-supp} |q_i|, lifted
        Vec row = Vec::Zero(nv);
        bool any_off = false;
        for (int d = 0; d < p; ++d) {
          if (std::abs(c_j[d]) > tols.band(cmax)) {
            row[off_q + j * p + d] = c_j[d] >= 0 ? 1.0 : -1.0;
          } else {
            any_off = true;
            const int md = off_m + (2 * j + 1) * p + d;
            row[md] = -1.0;
            Vec le1 = Vec::Zero(nv);
            le1[off_q + j * p + d] = 1.0;
            le1[md] = -1.0;
            fp.add_le(le1, 0.0);
            Vec le2 = Vec::Zero(nv);
            le2[off_q + j * p + d] = -1.0;
            le2[md] = -1.0;
            fp.add_le(le2, 0.0);
          }
        }
        (void)any_off;
        fp.add_ge(row, 0.0);
        break;
      }
      default:
        break;
    }
  }
  for (int i = 0; i < nI; ++i) {
    Vec e = Vec::Zero(nv);
    e[off_t + i] = 1.0;
    fp.add_ge(e, 0.0);
  }
  fp.add_box(tols.witness_box);
  const FeasResult r = fp.solve(tols);
  if (r.status == FeasStatus::NumericalFailure) {
    throw FeasibilityError("feasibility solver failed in membership_dual");
  }
  return r.status == FeasStatus::Feasible;
}

}  // namespace

RegionLabel membership_dual(const UncertaintyModel& model, const Vec& x,
                            const Tolerances& tols) {
  if (model.kind == ModelKind::RobustCounterfactual) {
    throw std::invalid_argument("membership_dual: RCF models are not supported");
  }
  const bool in_no = dual_system_feasible(model, x, -1, tols);
  const bool in_yes = dual_system_feasible(model, x, +1, tols);
  if (in_no && in_yes) return RegionLabel::Yes;  // on every consistent boundary
  if (in_no) return RegionLabel::No;
  if (in_yes) return RegionLabel::Yes;
  return RegionLabel::Unknown;
}

SampleResult sample_consistent_hyperplanes(const UncertaintyModel& model,
                                           int n, std::uint64_t seed,
                                           long max_proposals,
                                           const Tolerances& tols) {
  if (n < 1) throw std::invalid_argument("sample_consistent_hyperplanes: n >= 1");
  const int p = model.dim;
  const LoweredModel lm = lower_model(model, tols);

  // nullspace of the implied equality rows over (a, b): sampling on the
  // equality manifold keeps the acceptance rate away from zero
  std::vector<Vec> eqs;
  for (const auto& [c, sense] : lm.rows) {
    if (sense == RowSense::EQ) eqs.push_back(c.head(p + 1));
  }
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(p + 1, p + 1);
  if (!eqs.empty()) {
    Eigen::MatrixXd E(static_cast<Eigen::Index>(eqs.size()), p + 1);
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      E.row(static_cast<Eigen::Index>(i)) = eqs[i].transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double thresh = sv.size() > 0 ? sv[0] * tols.rank_rel : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += (sv[i] > thresh) ? 1 : 0;
    if (rank >= p + 1) {
      throw std::runtime_error("model measure-zero or infeasible");
    }
    N = svd.matrixV().rightCols(p + 1 - rank);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SampleResult out;
  const double accept_tol = 1e-9;
  while (static_cast<int>(out.hyperplanes.size()) < n &&
         out.proposals < max_proposals) {
    ++out.proposals;
    Vec z(N.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = gauss(rng);
    if (z.norm() == 0.0) continue;
    Vec w = N * z;
    w /= w.norm();
    const Vec a = w.head(p);
    const double b = w[p];
    if (a.lpNorm<Eigen::Infinity>() <= tols.band(1.0)) continue;
    if (lowered_violation(lm, a, b) <= accept_tol) {
      out.hyperplanes.emplace_back(a, b);
    }
  }
  out.acceptance_rate =
      out.proposals > 0
          ? static_cast<double>(out.hyperplanes.size()) / out.proposals
          : 0.0;
  if (out.hyperplanes.empty()) {
    throw std::runtime_error("model measure-zero or infeasible");
  }
  return out;
}

int RasterResult::count(RegionLabel l) const {
  int n = 0;
  for (auto v : labels) n += (v == l) ? 1 : 0;
  return n;
}

Vec RasterResult::center(int ix, int iy) const {
  Vec c(2);
  c[0] = lo[0] + (ix + 0.5) * (hi[0] - lo[0]) / resolution;
  c[1] = lo[1] + (iy + 0.5) * (hi[1] - lo[1]) / resolution;
  return c;
}

RasterResult raster(const UncertaintyModel& model, const Vec& lo, const Vec& hi,
                    int resolution, const Tolerances& tols, bool dual_route) {
  if (model.dim != 2) {
    throw std::invalid_argument("raster: only 2-dimensional models");
  }
  if (resolution < 2) {
    throw std::invalid_argument("raster: resolution >= 2");
  }
  RasterResult out;
  out.resolution = resolution;
  out.lo = lo;
  out.hi = hi;
  out.labels.assign(static_cast<std::size_t>(resolution) * resolution,
                    RegionLabel::Unknown);

  const LoweredModel lm = lower_model(model, tols);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int nthreads = static_cast<int>(std::min<unsigned>(hw, 8));
  std::vector<std::thread> workers;
  std::atomic<int> next_row{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  auto work = [&]() {
    for (;;) {
      const int iy = next_row.fetch_add(1);
      if (iy >= resolution || failed.load()) return;
      for (int ix = 0; ix < resolution; ++ix) {
        try {
          const Vec c = out.center(ix, iy);
          out.labels[static_cast<std::size_t>(iy) * resolution + ix] =
              dual_route ? membership_dual(model, c, tols)
                         : membership_lowered(lm, c, tols);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          failed.store(true);
          error_message = e.what();
          return;
        }
      }
    }
  };
  for (int k = 0; k < nthreads; ++k) workers.emplace_back(work);
  for (auto& w : workers) w.join();
  if (failed.load()) {
    throw FeasibilityError("raster: " + error_message);
  }
  return out;
}

std::string raster_csv(const RasterResult& r) {
  std::ostringstream os;
  os << "x1,x2,label\n";
  char buf[80];
  for (int iy = 0; iy < r.resolution; ++iy) {
    for (int ix = 0; ix < r.resolution; ++ix) {
      const Vec c = r.center(ix, iy);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%c", c[0], c[1],
                    label_char(r.at(ix, iy)));
      os << buf << '\n';
    }
  }
  return os.str();
}

}  // namespace linex
