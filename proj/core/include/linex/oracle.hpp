#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "linex/hyperplane.hpp"
#include "linex/ledger.hpp"

namespace linex {

/// Robustness ball S = { s : ||s||_norm2 <= rho }, rho > 0.
struct RobustnessSpec {
  NormKind norm2 = NormKind::l2();
  double rho = 0.0;

  RobustnessSpec() = default;
  RobustnessSpec(NormKind n2, double r) : norm2(n2), rho(r) {
    if (!(rho > 0.0) || !std::isfinite(rho)) {
      throw std::invalid_argument("RobustnessSpec: rho must be > 0");
    }
  }
};

/// Controls which optimal counterfactual is returned when the optimal set is
/// a face of the norm ball rather than a single vertex.
///   Vertex       - the canonical vertex maximizer.
///   FaceInterior - a fixed strict convex combination of two optimal vertices
///                  (theta in (0,1)); falls back to the vertex when the
///                  optimal face is a point.
///   Seeded       - a pseudorandom point of the optimal face.
struct TieBreakPolicy {
  enum class Kind { Vertex, FaceInterior, Seeded };
  Kind kind = Kind::Vertex;
  double theta = 0.5;
  std::uint64_t seed = 0;

  static TieBreakPolicy vertex() { return {}; }
  static TieBreakPolicy face_interior(double theta) {
    if (!(theta > 0.0 && theta < 1.0)) {
      throw std::invalid_argument("FaceInterior theta must lie in (0,1)");
    }
    TieBreakPolicy p;
    p.kind = Kind::FaceInterior;
    p.theta = theta;
    return p;
  }
  static TieBreakPolicy seeded(std::uint64_t seed) {
    TieBreakPolicy p;
    p.kind = Kind::Seeded;
    p.seed = seed;
    return p;
  }
};

/// Maximizer of a^T v over the unit norm1 ball with the policy choosing the
/// point of the optimal face. rng drives the Seeded policy only.
Vec tie_broken_maximizer(const Vec& a, NormKind norm1,
                         const TieBreakPolicy& policy, std::mt19937_64& rng,
                         const Tolerances& tols = default_tols());

/// Exact optimal counterfactual of x: the nearest point (under norm1) of the
/// closed opposite classification region. Points on the hyperplane map to
/// themselves.
Vec optimal_counterfactual(const Hyperplane& h, const Vec& x, NormKind norm1,
                           const TieBreakPolicy& policy, std::mt19937_64& rng,
                           const Tolerances& tols = default_tols());

/// Exact optimal robust counterfactual: the nearest point whose entire
/// rho-ball (under spec.norm2) lies in the closed opposite region; the ball
/// touches the decision boundary.
Vec optimal_robust_counterfactual(const Hyperplane& h, const Vec& x,
                                  NormKind norm1, const RobustnessSpec& spec,
                                  const TieBreakPolicy& policy,
                                  std::mt19937_64& rng,
                                  const Tolerances& tols = default_tols());

/// The hidden model plus its query surface. Every query appends one ledger
/// record. The hyperplane and specs are immutable after construction; the
/// ledger is single-writer.
class QueryOracle {
 public:
  QueryOracle(Hyperplane h, NormKind norm1,
              std::optional<RobustnessSpec> spec = std::nullopt,
              TieBreakPolicy policy = TieBreakPolicy::vertex())
      : h_(std::move(h)),
        norm1_(norm1),
        spec_(spec),
        policy_(policy),
        rng_(policy.seed) {}

  int factual_query(const Vec& x);
  Vec counterfactual_query(const Vec& x);
  Vec robust_counterfactual_query(const Vec& x);

  Eigen::Index dim() const { return h_.dim(); }
  NormKind norm1() const { return norm1_; }
  const std::optional<RobustnessSpec>& robustness() const { return spec_; }
  const QueryLedger& ledger() const { return ledger_; }

 private:
  Hyperplane h_;
  NormKind norm1_;
  std::optional<RobustnessSpec> spec_;
  TieBreakPolicy policy_;
  QueryLedger ledger_;
  std::mt19937_64 rng_;
};

}  // namespace linex
