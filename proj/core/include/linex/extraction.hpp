#pragma once

#include <optional>
#include <vector>

#include "linex/oracle.hpp"

namespace linex {

enum class DegeneratePath { None, ZeroCf, BoundaryFactual };

std::string to_string(DegeneratePath p);

/// Outcome of one attack run. Query counts mirror the oracle ledger; the
/// equivalence residual against the hidden model is filled by the caller
/// that owns the ground truth (attacks only see the query surface).
struct ExtractionReport {
  Hyperplane recovered;
  int queries_cf = 0;
  int queries_rcf = 0;
  int queries_factual = 0;
  double equivalence_residual = -1.0;
  DegeneratePath degenerate_path = DegeneratePath::None;
};

struct EquivalenceResult {
  bool equivalent = false;
  double residual = 0.0;
  bool orientation_flipped = false;
};

/// Same zero set up to a non-zero scalar on (a, b). The residual is
/// ||n1 - s*n2||_2 over normalized parameter vectors with the sign s chosen
/// to minimize; orientation_flipped reports s = -1 (classes swap).
EquivalenceResult hyperplanes_equivalent(const Hyperplane& h1,
                                         const Hyperplane& h2,
                                         double tol = 1e-9);

/// Solve a^T x_i - b = 0 for points on the hyperplane (k = p points), or
/// a^T x_i = 0 with fixed_b = 0 (k = p-1 points). Returns the unique ray,
/// normalized to ||a||_2 = 1 with the first non-zero weight positive.
/// Throws std::runtime_error reporting the measured rank when the system
/// does not pin the hyperplane down to one ray.
Hyperplane solve_hyperplane_from_boundary_points(
    const std::vector<Vec>& points, std::optional<double> fixed_b = std::nullopt,
    const Tolerances& tols = default_tols());

/// One counterfactual query (Theorem-style gradient readout) plus one factual
/// query to orient the classes. Requires a differentiable norm1; falls back
/// to probing x_F + e^i when x_F sits on the hyperplane.
ExtractionReport extract_cf_differentiable(QueryOracle& oracle, const Vec& x_F,
                                           const Tolerances& tols = default_tols());

/// Probe e^1, e^2, ... until a counterfactual moves, extract the common
/// direction, query counterfactuals of a basis containing it, and solve the
/// resulting linear system; p+1 counterfactual queries on the non-degenerate
/// path, at most 2p-1 otherwise. Handles the zero-counterfactual case by
/// fixing b = 0. One extra factual query orients the classes.
ExtractionReport extract_cf_nondifferentiable(QueryOracle& oracle,
                                              const Tolerances& tols = default_tols());

/// One robust counterfactual plus one factual query; the factual label feeds
/// the offset formula, so orientation comes out right without extra queries.
ExtractionReport extract_rcf_differentiable(QueryOracle& oracle, const Vec& x_F,
                                            const Tolerances& tols = default_tols());

/// Non-differentiable robust variant: the probe schedule of the plain
/// counterfactual attack with a factual query before every robust
/// counterfactual query. Solves the p touch equations over the 1-dimensional
/// solution line, scales to a unit dual norm of the robustness ball, and
/// eliminates inconsistent sign/scale candidates against the optimality
/// conditions of every observed record. p+1 robust counterfactual and p+1
/// factual queries.
ExtractionReport extract_rcf_nondifferentiable(QueryOracle& oracle,
                                               const Tolerances& tols = default_tols());

/// Candidates of the touch-equation system
///   a^T x_rcf_i - b + label_i * rho * ||a||_{norm2}^* = 0
/// under the scaling ||a||_{norm2}^* = 1. The equations are linear on the
/// scaled solution line; the unit dual-norm level set of a convex function
/// meets the line in at most two points, and consistency with the optimality
/// conditions of every record singles out the real one.
struct RcfSystemResult {
  std::vector<Hyperplane> candidates;
  std::vector<bool> consistent;
  int chosen = -1;  // index into candidates, -1 when none is consistent
};
RcfSystemResult solve_rcf_touch_system(const std::vector<Vec>& x_f,
                                       const std::vector<Vec>& x_rcf,
                                       const std::vector<int>& labels,
                                       NormKind norm1,
                                       const RobustnessSpec& spec,
                                       const Tolerances& tols = default_tols());

}  // namespace linex
