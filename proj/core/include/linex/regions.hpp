#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "linex/feasibility.hpp"
#include "linex/oracle.hpp"

namespace linex {

enum class ModelKind { Factual, Counterfactual, RobustCounterfactual };
enum class RegionLabel { Yes, No, Unknown };
enum class RowSense { LE, EQ, GE };

char label_char(RegionLabel l);
std::string to_string(ModelKind k);

/// coeff . (a, b)  {<=, ==, >=}  0
struct LinearConstraint {
  Vec coeff;
  RowSense sense;
};

/// a^T x - b + side * rho * ||a||_{ball_norm}^*  {<= 0 if side=+1, >= 0 if
/// side=-1}; equivalently rho * ||a||^* <= side * (b - a^T x). Both senses
/// bound the dual norm from above, so the row is convex. Rows marked implied
/// are exactly entailed by a boundary equality plus the matching alignment
/// rows (Hoelder equality) and are skipped by the solver lowering, which
/// keeps the phase-1 interior away from implicit equalities.
struct NormBallConstraint {
  Vec x;
  double rho;
  NormKind ball_norm;
  int side;
  bool implied = false;
};

/// Touching equality a^T x_rcf - b + label * rho * ||a||_{norm2}^* = 0 of the
/// strict robust-counterfactual set. dir is the oriented perturbation used to
/// decide whether the dual norm linearizes exactly.
struct DualNormEquality {
  Vec x_rcf;
  double rho;
  NormKind norm2;
  int label;
  Vec dir;  // oriented: -label * (x_rcf - x_f)
  NormKind norm1;
};

/// a lies in the cone generated by the subdifferential of ||.||_{norm1} at
/// dir, i.e. a^T (dir/||dir||_{norm1}) = ||a||_{norm1}^*.
struct SubgradientConstraint {
  Vec dir;  // oriented: -label * (output - input)
  NormKind norm1;
};

struct FactualRecord {
  Vec x;
  int label;
};
struct CfRecord {
  Vec x;
  Vec x_cf;
  int label;
  double rho;
};
struct RcfRecord {
  Vec x;
  Vec x_rcf;
  int label;
};

/// Constraint set on the classifier parameters (a, b) induced by a query
/// ledger. All rows are positively homogeneous, so the set is a cone and
/// (a, b) = 0 always satisfies it. Models are immutable once built.
struct UncertaintyModel {
  ModelKind kind = ModelKind::Factual;
  int dim = 0;
  NormKind norm1 = NormKind::l2();
  std::optional<RobustnessSpec> rspec;
  bool strict_rcf = false;  // touching equalities instead of ball inequalities
  bool augmented = false;
  bool relaxed = false;  // some rows were lowered to a sound outer relaxation

  std::vector<FactualRecord> factuals;
  std::vector<CfRecord> cfs;
  std::vector<RcfRecord> rcfs;

  std::vector<LinearConstraint> linear_constraints;
  std::vector<NormBallConstraint> norm_constraints;
  std::vector<DualNormEquality> dualnorm_equalities;
  std::vector<SubgradientConstraint> subgradient_constraints;

  /// Worst violation at (a, b) of the rows the solver actually sees (the
  /// lowered form, which relaxes intractable touch equalities); <= tol means
  /// consistent. Membership and the sampler share this notion exactly.
  double violation(const Vec& a, double b) const;
};

/// Build U^F / U^CF / U^RCF (or the stricter touching form when strict_rcf)
/// from a ledger. CF and RCF records must carry the factual label of their
/// input. Throws std::invalid_argument("inconsistent ledger") when a point
/// carries both labels.
UncertaintyModel model_from_ledger(const QueryLedger& ledger, NormKind norm1,
                                   std::optional<RobustnessSpec> spec = std::nullopt,
                                   bool strict_rcf = true,
                                   const Tolerances& tols = default_tols());

/// Tighten an RCF model with the perspective-point rows: x_bar =
/// x_rcf - d*v classified like the factual for the smallest valid d, and,
/// when norm1 == norm2, the exact touch point x_s = x_rcf - rho*v on the
/// hyperplane (the touching equality is then replaced by the ball inequality
/// plus the x_s equality).
UncertaintyModel augment_rcf_model(const UncertaintyModel& model,
                                   bool enable_perspective = true,
                                   const Tolerances& tols = default_tols());

/// Homogeneous solver rows lowered from the typed model: rows over
/// (a, b, aux...) plus second-order-cone rows ||F w|| <= f.w.
struct LoweredModel {
  int p = 0;
  int nvars = 0;
  int l1_lift_base = -1;  // first index of the |a_k| lift variables, if any
  std::vector<std::pair<Vec, RowSense>> rows;
  std::vector<std::pair<Eigen::MatrixXd, Vec>> socs;
  bool relaxed = false;
};
LoweredModel lower_model(const UncertaintyModel& model,
                         const Tolerances& tols = default_tols());

/// Worst violation of the lowered rows at (a, b); lift variables take their
/// tight values |a_k|.
double lowered_violation(const LoweredModel& lm, const Vec& a, double b);

/// Raised when the feasibility subsystem fails numerically; distinct from an
/// Unknown label by contract.
struct FeasibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// x is No iff {(a,b) in model, a^T x - b >= eps, ||(a,b)||_inf <= 1} is
/// infeasible (symmetrically for Yes) with eps = tols.strict_eps. When both
/// margin systems are infeasible every consistent hyperplane passes within
/// the band of x and the boundary convention (+1) applies.
RegionLabel membership(const UncertaintyModel& model, const Vec& x,
                       const Tolerances& tols = default_tols());

/// Same label computed from the dual feasibility systems (convex-combination
/// witnesses for factual-only models, perspective/conic systems for CF
/// models). Serves as an independent cross-check of membership. RCF models
/// and lp(general) norms are not supported here.
RegionLabel membership_dual(const UncertaintyModel& model, const Vec& x,
                            const Tolerances& tols = default_tols());

struct SampleResult {
  std::vector<Hyperplane> hyperplanes;
  double acceptance_rate = 0.0;
  long proposals = 0;
};

/// Rejection-sample parameter vectors consistent with the model: uniform on
/// the unit sphere of the nullspace of the model's (implied) equality rows,
/// accepted when every typed row holds within 1e-9. Statistical falsifier
/// for the exact membership routes.
SampleResult sample_consistent_hyperplanes(const UncertaintyModel& model,
                                           int n, std::uint64_t seed,
                                           long max_proposals = 10'000'000,
                                           const Tolerances& tols = default_tols());

struct RasterResult {
  int resolution = 0;
  Vec lo, hi;
  std::vector<RegionLabel> labels;  // row-major, cell centers
  int count(RegionLabel l) const;
  RegionLabel at(int ix, int iy) const {
    return labels[static_cast<std::size_t>(iy) * resolution + ix];
  }
  Vec center(int ix, int iy) const;
};

/// 2-D membership raster at cell centers (row-major). Cells are independent
/// and evaluated in parallel.
RasterResult raster(const UncertaintyModel& model, const Vec& lo, const Vec& hi,
                    int resolution, const Tolerances& tols = default_tols(),
                    bool dual_route = false);

/// CSV with header "x1,x2,label", label in {Y,N,U}.
std::string raster_csv(const RasterResult& r);

}  // namespace linex
