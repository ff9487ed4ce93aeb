#pragma once

#include <Eigen/Core>
#include <vector>

#include "linex/norms.hpp"

namespace linex {

enum class FeasStatus { Feasible, Infeasible, NumericalFailure };

struct FeasResult {
  FeasStatus status = FeasStatus::NumericalFailure;
  /// Feasible: an attained value of the worst-case row violation (<= 0 up to
  /// tolerance). Infeasible: a certified positive lower bound on the
  /// minimized worst-case violation.
  double slack = 0.0;
  /// A point achieving (approximately) the reported slack. When the status is
  /// Feasible every row holds at it within |slack| + solver tolerance.
  Vec witness;
  int newton_iters = 0;
};

/// Feasibility of { w : A_eq w = b_eq, a_k.w <= b_k, ||F_j w + g_j||_2 <=
/// f_j.w + h_j }, decided by minimizing the worst violation (phase-1) with a
/// log-barrier Newton method. Equalities are eliminated up front through a
/// nullspace parameterization, so flat systems are handled exactly. The
/// phase-1 program always has a strictly feasible interior, which makes the
/// barrier start unconditionally; certification uses the standard duality-gap
/// bound of the central path.
class FeasibilityProblem {
 public:
  explicit FeasibilityProblem(int n) : n_(n) {}

  int n() const { return n_; }
  void add_le(Vec a, double b);          // a.w <= b
  void add_ge(Vec a, double b);          // a.w >= b
  void add_eq(Vec a, double b);          // a.w == b
  /// ||F w + g||_2 <= f.w + h
  void add_soc(Eigen::MatrixXd F, Vec g, Vec f, double h);
  /// |w_i| <= radius for all i. The rows are materialized inside solve(),
  /// after directions untouched by every genuine row have been projected
  /// out (the box alone must not make such directions look constrained).
  void add_box(double radius) { box_ = radius; }
  std::size_t rows() const { return le_a_.size() + 2 * soc_F_.size(); }

  FeasResult solve(const Tolerances& tols = default_tols()) const;

 private:
  int n_;
  double box_ = 0.0;
  std::vector<Vec> eq_a_;
  std::vector<double> eq_b_;
  std::vector<Vec> le_a_;
  std::vector<double> le_b_;
  std::vector<Eigen::MatrixXd> soc_F_;
  std::vector<Vec> soc_g_;
  std::vector<Vec> soc_f_;
  std::vector<double> soc_h_;
};

}  // namespace linex
