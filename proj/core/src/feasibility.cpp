#include "linex/feasibility.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

namespace linex {

void FeasibilityProblem::add_le(Vec a, double b) {
  const double s = std::max(a.lpNorm<Eigen::Infinity>(), std::abs(b));
  if (s > 0.0) {
    a /= s;
    b /= s;
  }
  le_a_.push_back(std::move(a));
  le_b_.push_back(b);
}

void FeasibilityProblem::add_ge(Vec a, double b) { add_le(-a, -b); }

void FeasibilityProblem::add_eq(Vec a, double b) {
  const double s = std::max(a.lpNorm<Eigen::Infinity>(), std::abs(b));
  if (s > 0.0) {
    a /= s;
    b /= s;
  }
  eq_a_.push_back(std::move(a));
  eq_b_.push_back(b);
}

void FeasibilityProblem::add_soc(Eigen::MatrixXd F, Vec g, Vec f, double h) {
  double s = std::max({F.cwiseAbs().maxCoeff(), g.lpNorm<Eigen::Infinity>(),
                       f.lpNorm<Eigen::Infinity>(), std::abs(h)});
  if (s > 0.0) {
    F /= s;
    g /= s;
    f /= s;
    h /= s;
  }
  soc_F_.push_back(std::move(F));
  soc_g_.push_back(std::move(g));
  soc_f_.push_back(std::move(f));
  soc_h_.push_back(h);
}

namespace {

struct Reduced {
  // w = w0 + N z
  Vec w0;
  Eigen::MatrixXd N;
  bool consistent = true;
  double eq_residual = 0.0;
};

Reduced reduce_equalities(int n, const std::vector<Vec>& eq_a,
                          const std::vector<double>& eq_b,
                          const Tolerances& tols) {
  Reduced r;
  if (eq_a.empty()) {
    r.w0 = Vec::Zero(n);
    r.N = Eigen::MatrixXd::Identity(n, n);
    return r;
  }
  const auto k = static_cast<Eigen::Index>(eq_a.size());
  Eigen::MatrixXd E(k, n);
  Vec e(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    E.row(i) = eq_a[static_cast<std::size_t>(i)].transpose();
    e[i] = eq_b[static_cast<std::size_t>(i)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = sv.size() > 0 ? std::max(sv[0], 1.0) * tols.rank_rel : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += (sv[i] > thresh) ? 1 : 0;
  svd.setThreshold(tols.rank_rel);
  r.w0 = svd.solve(e);
  r.eq_residual = (E * r.w0 - e).lpNorm<Eigen::Infinity>();
  if (r.eq_residual > tols.band(1.0 + e.lpNorm<Eigen::Infinity>())) {
    r.consistent = false;
    return r;
  }
  r.N = svd.matrixV().rightCols(n - rank);
  return r;
}

}  // namespace

FeasResult FeasibilityProblem::solve(const Tolerances& tols) const {
  FeasResult out;
  const Reduced red = reduce_equalities(n_, eq_a_, eq_b_, tols);
  if (!red.consistent) {
    out.status = FeasStatus::Infeasible;
    out.slack = red.eq_residual;
    out.witness = red.w0;
    return out;
  }
  const auto n_lin0 = static_cast<Eigen::Index>(le_a_.size());
  const auto n_soc = static_cast<Eigen::Index>(soc_F_.size());

  if (n_lin0 == 0 && n_soc == 0 && box_ <= 0.0) {
    out.status = FeasStatus::Feasible;
    out.slack = -1.0;
    out.witness = red.w0;
    return out;
  }

  // reduced genuine rows over z (w = w0 + N z): lin a'.z <= b', soc
  // ||F'z + g'|| <= f'.z + h'
  Eigen::MatrixXd A0(n_lin0, red.N.cols());
  Vec b0(n_lin0);
  for (Eigen::Index k = 0; k < n_lin0; ++k) {
    const auto& a = le_a_[static_cast<std::size_t>(k)];
    A0.row(k) = (red.N.transpose() * a).transpose();
    b0[k] = le_b_[static_cast<std::size_t>(k)] - a.dot(red.w0);
  }
  std::vector<Eigen::MatrixXd> Fz(soc_F_.size());
  std::vector<Vec> gz(soc_F_.size()), fz(soc_F_.size());
  std::vector<double> hz(soc_F_.size());
  for (std::size_t j = 0; j < soc_F_.size(); ++j) {
    Fz[j] = soc_F_[j] * red.N;
    gz[j] = soc_F_[j] * red.w0 + soc_g_[j];
    fz[j] = red.N.transpose() * soc_f_[j];
    hz[j] = soc_h_[j] + soc_f_[j].dot(red.w0);
  }

  // project out directions no genuine row touches; they cannot affect
  // feasibility and would leave the barrier Hessian singular
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(red.N.cols(), red.N.cols());
  {
    Eigen::Index stack_rows = n_lin0;
    for (std::size_t j = 0; j < soc_F_.size(); ++j) {
      stack_rows += Fz[j].rows() + 1;
    }
    if (stack_rows > 0 && red.N.cols() > 0) {
      Eigen::MatrixXd S(stack_rows, red.N.cols());
      Eigen::Index r = 0;
      S.topRows(n_lin0) = A0;
      r = n_lin0;
      for (std::size_t j = 0; j < soc_F_.size(); ++j) {
        S.middleRows(r, Fz[j].rows()) = Fz[j];
        r += Fz[j].rows();
        S.row(r++) = fz[j].transpose();
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      const double thresh =
          sv.size() > 0 ? std::max(sv[0], 1.0) * 1e-13 : 0.0;
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i) rank += (sv[i] > thresh) ? 1 : 0;
      if (rank < red.N.cols()) {
        basis = svd.matrixV().leftCols(rank);
      }
    }
  }
  const Eigen::MatrixXd NB = red.N * basis;  // orthonormal columns
  const auto m = NB.cols();

  Eigen::MatrixXd A = A0 * basis;
  Vec b = b0;
  for (std::size_t j = 0; j < soc_F_.size(); ++j) {
    Fz[j] = Eigen::MatrixXd(Fz[j] * basis);
    fz[j] = Vec(basis.transpose() * fz[j]);
  }
  // box rows |(w0 + NB z)_i| <= box, normalized like every other row
  if (box_ > 0.0) {
    const auto old_rows = A.rows();
    A.conservativeResize(old_rows + 2 * n_, m);
    b.conservativeResize(old_rows + 2 * n_);
    for (int i = 0; i < n_; ++i) {
      const double scale = std::max(1.0, box_);
      A.row(old_rows + 2 * i) = NB.row(i) / scale;
      b[old_rows + 2 * i] = (box_ - red.w0[i]) / scale;
      A.row(old_rows + 2 * i + 1) = -NB.row(i) / scale;
      b[old_rows + 2 * i + 1] = (box_ + red.w0[i]) / scale;
    }
  }
  const auto n_lin = A.rows();

  auto max_violation = [&](const Vec& z) {
    double v = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n_lin; ++k) v = std::max(v, A.row(k).dot(z) - b[k]);
    for (std::size_t j = 0; j < soc_F_.size(); ++j) {
      v = std::max(v, (Fz[j] * z + gz[j]).norm() - (fz[j].dot(z) + hz[j]));
    }
    return v;
  };

  if (m == 0) {
    // equalities pin the point; just evaluate
    const double v = max_violation(Vec::Zero(0));
    out.slack = v;
    out.status = v <= tols.band(1.0) ? FeasStatus::Feasible : FeasStatus::Infeasible;
    out.witness = red.w0;
    return out;
  }

  // phase-1 barrier over u = (z, s): minimize s subject to every row
  // violation <= s. Strictly feasible start: z = 0, s above the worst
  // violation. A_ext carries the linear rows as (-a_k, 1) so phi = A_ext u + b.
  const double nu = static_cast<double>(n_lin) + 2.0 * static_cast<double>(n_soc);
  Eigen::MatrixXd A_ext(n_lin, m + 1);
  A_ext.leftCols(m) = -A;
  A_ext.col(m).setOnes();

  Vec u_cur(m + 1);
  u_cur.setZero();
  u_cur[m] = max_violation(Vec::Zero(m)) + 1.0;

  Vec phi(n_lin), inv_phi(n_lin);
  auto eval_phi = [&](const Vec& u, Vec& out_phi) {
    out_phi.noalias() = A_ext * u;
    out_phi += b;
  };

  auto in_domain = [&](const Vec& u) {
    eval_phi(u, phi);
    if (n_lin > 0 && phi.minCoeff() <= 0.0) return false;
    for (std::size_t j = 0; j < soc_F_.size(); ++j) {
      const double uj = fz[j].dot(u.head(m)) + hz[j] + u[m];
      if (uj <= 0.0) return false;
      if (uj * uj - (Fz[j] * u.head(m) + gz[j]).squaredNorm() <= 0.0) return false;
    }
    return true;
  };

  auto barrier = [&](const Vec& u, double t) {
    eval_phi(u, phi);
    double val = t * u[m] - phi.array().log().sum();
    for (std::size_t j = 0; j < soc_F_.size(); ++j) {
      const double uj = fz[j].dot(u.head(m)) + hz[j] + u[m];
      val -= std::log(uj * uj - (Fz[j] * u.head(m) + gz[j]).squaredNorm());
    }
    return val;
  };

  const double decide_band = 1e-12;
  double t = 100.0;
  double mu = 30.0;  // adaptive: backs off when a stage fails to center
  const double t_max = 1e15;
  const int max_total_newton = 6000;
  int total_newton = 0;

  Vec grad(m + 1), step(m + 1), dD(m + 1), u_try(m + 1);
  Eigen::MatrixXd H(m + 1, m + 1);

  while (true) {
    // center at the current t
    bool centered = false;
    for (int it = 0; it < 50; ++it) {
      if (u_cur[m] < -decide_band) {
        // any domain point with s < 0 proves feasibility
        out.status = FeasStatus::Feasible;
        out.slack = u_cur[m];
        out.witness = red.w0 + NB * u_cur.head(m);
        out.newton_iters = total_newton;
        return out;
      }
      eval_phi(u_cur, phi);
      inv_phi = phi.cwiseInverse();
      grad.noalias() = -A_ext.transpose() * inv_phi;
      grad[m] += t;
      H.noalias() = A_ext.transpose() * inv_phi.array().square().matrix().asDiagonal() * A_ext;
      for (std::size_t j = 0; j < soc_F_.size(); ++j) {
        const Vec y = Fz[j] * u_cur.head(m) + gz[j];
        const double uj = fz[j].dot(u_cur.head(m)) + hz[j] + u_cur[m];
        const double D = uj * uj - y.squaredNorm();
        dD.head(m).noalias() = 2.0 * uj * fz[j] - 2.0 * Fz[j].transpose() * y;
        dD[m] = 2.0 * uj;
        grad -= dD / D;
        H.noalias() += dD * dD.transpose() / (D * D);
        H.topLeftCorner(m, m).noalias() -=
            (2.0 * fz[j] * fz[j].transpose() - 2.0 * Fz[j].transpose() * Fz[j]) / D;
        H.col(m).head(m).noalias() -= 2.0 * fz[j] / D;
        H.row(m).head(m).noalias() -= 2.0 * fz[j].transpose() / D;
        H(m, m) -= 2.0 / D;
      }
      // small absolute Levenberg term: variables touched only by far-away box
      // rows carry almost no barrier curvature and would otherwise make the
      // Newton system singular
      H.diagonal().array() += 1e-9;

      double reg = 0.0;
      for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(
            reg == 0.0 ? H
                       : Eigen::MatrixXd(H + reg * Eigen::MatrixXd::Identity(
                                                       m + 1, m + 1)));
        step = ldlt.solve(-grad);
        if (ldlt.info() == Eigen::Success && step.allFinite()) break;
        reg = reg == 0.0 ? 1e-8 * (1.0 + H.diagonal().cwiseAbs().maxCoeff())
                         : reg * 100.0;
      }
      const bool trustworthy_step = reg == 0.0;
      if (!step.allFinite()) {
        out.status = FeasStatus::NumericalFailure;
        out.slack = u_cur[m];
        out.witness = red.w0 + NB * u_cur.head(m);
        out.newton_iters = total_newton;
        return out;
      }
      const double decrement_sq = -grad.dot(step);
      ++total_newton;
      // lambda <= 0.1 puts the iterate well inside the quadratic-convergence
      // region; the certification pad below absorbs the residual offset. A
      // tighter threshold would chase a rounding floor that scales with t.
      // Steps that needed extra regularization cannot certify centrality:
      // their decrement underestimates the true one.
      if (decrement_sq <= 1e-2 && trustworthy_step) {
        centered = true;
        break;
      }

      // line search: bisect the largest in-domain step, then pick the best
      // barrier value among a few candidates (full, near-maximal, damped).
      // Pure backtracking would crawl when the Newton direction grazes a
      // nearly active constraint.
      const double f0 = barrier(u_cur, t);
      double alpha_max = 1.0;
      u_try = u_cur + step;
      if (!in_domain(u_try)) {
        double lo = 0.0, hi = 1.0;
        for (int b = 0; b < 14; ++b) {
          const double mid = 0.5 * (lo + hi);
          u_try = u_cur + mid * step;
          if (in_domain(u_try)) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        alpha_max = lo;
      }
      const double damped =
          1.0 / (1.0 + std::sqrt(std::max(0.0, decrement_sq)));
      bool moved_ok = false;
      double best_f = f0;
      Vec best_u;
      for (double alpha :
           {0.99 * alpha_max, 0.6 * alpha_max, std::min(damped, alpha_max)}) {
        if (alpha <= 0.0) continue;
        u_try = u_cur + alpha * step;
        if (!in_domain(u_try)) continue;
        const double f_try = barrier(u_try, t);
        if (f_try < best_f) {
          best_f = f_try;
          best_u = u_try;
          moved_ok = true;
          if (f_try <= f0 - 0.2 * alpha * decrement_sq) break;
        }
      }
      if (moved_ok) u_cur = best_u;
      if (!moved_ok || total_newton > max_total_newton) break;
    }

    // central-path bounds: s* in [s - nu/t, s], valid only at (near-)centered
    // iterates; the sqrt(nu) pad covers the inexactness of the centering
    const double lower = u_cur[m] - (nu + 2.0 * std::sqrt(nu) + 1.0) / t;
    if (centered && lower > decide_band) {
      out.status = FeasStatus::Infeasible;
      out.slack = lower;
      out.witness = red.w0 + NB * u_cur.head(m);
      out.newton_iters = total_newton;
      return out;
    }
    if (t >= t_max || total_newton > max_total_newton) {
      // ladder exhausted: feasible only when the current point is itself a
      // within-tolerance witness (max violation <= s ~ 0); anything else is
      // an honest numerical failure rather than a guess
      out.status = u_cur[m] <= 10.0 * tols.abs ? FeasStatus::Feasible
                                               : FeasStatus::NumericalFailure;
      out.slack = u_cur[m] - 0.5 * nu / t;
      out.witness = red.w0 + NB * u_cur.head(m);
      out.newton_iters = total_newton;
      return out;
    }
    mu = centered ? std::min(30.0, mu * 2.0) : std::max(5.0, mu * 0.5);
    t *= mu;
  }
}

}  // namespace linex
