#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "linex/extraction.hpp"
#include "linex/scenario.hpp"

using namespace linex;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

const Hyperplane worked{v2(2, -1), 3.0};

Hyperplane seeded_hyp(int p, std::uint64_t seed, bool e1_off_plane = true) {
  std::mt19937_64 rng(seed);
  for (;;) {
    Hyperplane h = random_hyperplane(p, rng);
    if (!e1_off_plane) return h;
    if (std::abs(h.a[0] - h.b) > 1e-3 * (h.a.norm() + std::abs(h.b))) return h;
  }
}

bool equivalent(const Hyperplane& got, const Hyperplane& hidden,
                double tol = 1e-8) {
  return hyperplanes_equivalent(got, hidden, tol).equivalent;
}

}  // namespace

TEST_CASE("hyperplanes_equivalent") {
  const auto r1 = hyperplanes_equivalent(worked, Hyperplane(v2(4, -2), 6.0));
  CHECK(r1.equivalent);
  CHECK(r1.residual == doctest::Approx(0.0));
  CHECK_FALSE(r1.orientation_flipped);

  const auto r2 = hyperplanes_equivalent(worked, Hyperplane(v2(-2, 1), -3.0));
  CHECK(r2.equivalent);
  CHECK(r2.orientation_flipped);

  const auto r3 = hyperplanes_equivalent(worked, Hyperplane(v2(2, -1), 4.0));
  CHECK_FALSE(r3.equivalent);
}

TEST_CASE("solve_hyperplane_from_boundary_points worked system") {
  // points (2,1) and (1,-1) pin the hyperplane 2x1 - x2 = 3
  const Hyperplane h = solve_hyperplane_from_boundary_points({v2(2, 1), v2(1, -1)});
  CHECK(equivalent(h, worked, 1e-12));
  CHECK(h.a.norm() == doctest::Approx(1.0));
  CHECK(h.a[0] > 0);  // first non-zero weight positive
}

TEST_CASE("solve_hyperplane accepts the rank-deficient-looking axis pair") {
  const Hyperplane h = solve_hyperplane_from_boundary_points({v2(0, 1), v2(0, -1)});
  CHECK(h.a[0] == doctest::Approx(1.0));
  CHECK(h.a[1] == doctest::Approx(0.0));
  CHECK(h.b == doctest::Approx(0.0));
}

TEST_CASE("solve_hyperplane recovers a random p=6 hyperplane from samples") {
  std::mt19937_64 rng(41);
  const int p = 6;
  const Hyperplane hidden = seeded_hyp(p, 117, false);
  // sample points on the hyperplane: x = x0 + span of a-orthogonal directions
  const auto basis = basis_containing(hidden.a);
  std::vector<Vec> pts;
  std::normal_distribution<double> gauss(0.0, 2.0);
  const Vec x0 = hidden.a * (hidden.b / hidden.a.squaredNorm());
  for (int i = 0; i < p; ++i) {
    Vec x = x0;
    for (std::size_t k = 1; k < basis.size(); ++k) x += gauss(rng) * basis[k];
    pts.push_back(x);
  }
  const Hyperplane got = solve_hyperplane_from_boundary_points(pts);
  CHECK(hyperplanes_equivalent(got, hidden, 1e-10).equivalent);
}

TEST_CASE("solve_hyperplane reports the measured rank on degenerate input") {
  CHECK_THROWS_WITH_AS(
      solve_hyperplane_from_boundary_points({v2(1, 1), v2(1, 1)}),
      "degenerate query set: measured rank 1, need 2", std::runtime_error);
}

TEST_CASE("cf-diff worked example under l2") {
  QueryOracle oracle(worked, NormKind::l2());
  const auto rep = extract_cf_differentiable(oracle, v2(3, 0));
  CHECK(equivalent(rep.recovered, worked, 1e-9));
  CHECK(rep.queries_cf == 1);
  CHECK(rep.queries_factual == 1);
  CHECK(rep.queries_rcf == 0);
  CHECK(rep.degenerate_path == DegeneratePath::None);
  // recovered classifies like the hidden model
  CHECK(classify_agreement(rep.recovered, worked, 10000, 5) == 1.0);
}

TEST_CASE("cf-diff axis-aligned case") {
  const Hyperplane axis{v2(0, 1), 0.0};
  QueryOracle oracle(axis, NormKind::l2());
  const auto rep = extract_cf_differentiable(oracle, v2(5, 5));
  CHECK(equivalent(rep.recovered, axis, 1e-9));
}

TEST_CASE("cf-diff random p=50") {
  const int p = 50;
  const Hyperplane hidden = seeded_hyp(p, 1231);
  QueryOracle oracle(hidden, NormKind::l2());
  std::mt19937_64 rng(77);
  const auto rep = extract_cf_differentiable(oracle, random_point(p, rng));
  const auto eq = hyperplanes_equivalent(rep.recovered, hidden, 1e-8);
  CHECK(eq.equivalent);
  CHECK(eq.residual <= 1e-8);
}

TEST_CASE("cf-diff boundary factual falls back to probing") {
  QueryOracle oracle(worked, NormKind::l2());
  const auto rep = extract_cf_differentiable(oracle, v2(2, 1));  // on the plane
  CHECK(rep.degenerate_path == DegeneratePath::BoundaryFactual);
  CHECK(equivalent(rep.recovered, worked, 1e-9));
}

TEST_CASE("cf-diff rejects non-differentiable norms") {
  QueryOracle oracle(worked, NormKind::l1());
  CHECK_THROWS_AS(extract_cf_differentiable(oracle, v2(3, 0)),
                  std::invalid_argument);
  QueryOracle oracle2(worked, NormKind::l2());
  CHECK_THROWS_AS(extract_cf_nondifferentiable(oracle2), std::invalid_argument);
}

TEST_CASE("cf-nondiff worked example uses exactly p+1 = 3 queries") {
  QueryOracle oracle(worked, NormKind::linf());
  const auto rep = extract_cf_nondifferentiable(oracle);
  CHECK(equivalent(rep.recovered, worked, 1e-9));
  CHECK(rep.queries_cf == 3);
  CHECK(rep.queries_factual == 1);
  CHECK(oracle.ledger().count(QueryKind::Counterfactual) == 3);
}

TEST_CASE("cf-nondiff zero-counterfactual path fixes b = 0") {
  const Hyperplane through_origin{v2(1, 1), 0.0};
  QueryOracle oracle(through_origin, NormKind::l1());
  const auto rep = extract_cf_nondifferentiable(oracle);
  CHECK(rep.degenerate_path == DegeneratePath::ZeroCf);
  CHECK(equivalent(rep.recovered, through_origin, 1e-9));
}

TEST_CASE("cf-nondiff degenerate start stays within 2p-1 queries") {
  // e^1 lies on the hyperplane a.x = b with a = (1,2), b = 1
  const Hyperplane h2{v2(1, 2), 1.0};
  QueryOracle o2(h2, NormKind::linf());
  const auto r2 = extract_cf_nondifferentiable(o2);
  CHECK(equivalent(r2.recovered, h2, 1e-9));
  CHECK(r2.queries_cf <= 2 * 2 - 1);

  Vec a3(3);
  a3 << 1, 2, 0.5;
  const Hyperplane h3{a3, 1.0};
  QueryOracle o3(h3, NormKind::l1());
  const auto r3 = extract_cf_nondifferentiable(o3);
  CHECK(equivalent(r3.recovered, h3, 1e-9));
  CHECK(r3.queries_cf <= 2 * 3 - 1);
}

TEST_CASE("cf-nondiff budget is exactly p+1 over seeded instances") {
  for (int p : {2, 5, 10}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Hyperplane hidden = seeded_hyp(p, 1000 * p + s);
      for (const auto& norm1 : {NormKind::l1(), NormKind::linf()}) {
        QueryOracle oracle(hidden, norm1);
        const auto rep = extract_cf_nondifferentiable(oracle);
        CHECK(rep.queries_cf == p + 1);
        CHECK(equivalent(rep.recovered, hidden, 1e-7));
      }
    }
  }
}

TEST_CASE("rcf-diff worked hyperplane under l2 ball") {
  QueryOracle oracle(worked, NormKind::l2(), RobustnessSpec(NormKind::l2(), 1.0));
  const auto rep = extract_rcf_differentiable(oracle, v2(3, 0));
  CHECK(equivalent(rep.recovered, worked, 1e-9));
  CHECK(rep.queries_rcf == 1);
  CHECK(rep.queries_factual == 1);
  CHECK(rep.queries_cf == 0);
  CHECK(classify_agreement(rep.recovered, worked, 10000, 7) == 1.0);
}

TEST_CASE("rcf-diff with rho -> 0 matches cf-diff") {
  QueryOracle cf_oracle(worked, NormKind::l2());
  const auto cf_rep = extract_cf_differentiable(cf_oracle, v2(3, 0));
  QueryOracle rcf_oracle(worked, NormKind::l2(),
                         RobustnessSpec(NormKind::l1(), 1e-12));
  const auto rcf_rep = extract_rcf_differentiable(rcf_oracle, v2(3, 0));
  CHECK(hyperplanes_equivalent(cf_rep.recovered, rcf_rep.recovered, 1e-8).equivalent);
}

TEST_CASE("rcf-diff random p=50 under lp(3) with l1 ball") {
  const int p = 50;
  const Hyperplane hidden = seeded_hyp(p, 4321);
  QueryOracle oracle(hidden, NormKind::lp(3.0),
                     RobustnessSpec(NormKind::l1(), 0.5));
  std::mt19937_64 rng(9);
  const auto rep = extract_rcf_differentiable(oracle, random_point(p, rng));
  CHECK(hyperplanes_equivalent(rep.recovered, hidden, 1e-7).equivalent);
}

TEST_CASE("rcf-nondiff worked example: candidates and budget") {
  const RobustnessSpec spec(NormKind::l1(), 1.0);
  QueryOracle probe_oracle(worked, NormKind::linf(), spec);
  const int l1 = probe_oracle.factual_query(v2(3, 0));
  const Vec r1 = probe_oracle.robust_counterfactual_query(v2(3, 0));
  const int l2 = probe_oracle.factual_query(v2(-1, 1));
  const Vec r2 = probe_oracle.robust_counterfactual_query(v2(-1, 1));
  const auto sol = solve_rcf_touch_system({v2(3, 0), v2(-1, 1)}, {r1, r2},
                                          {l1, l2}, NormKind::linf(), spec);
  REQUIRE(sol.candidates.size() == 2);
  REQUIRE(sol.chosen >= 0);
  const auto& fin = sol.candidates[static_cast<std::size_t>(sol.chosen)];
  CHECK((fin.a - v2(1, -0.5)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(fin.b == doctest::Approx(1.5).epsilon(1e-12));
  int rejected = 0;
  for (bool ok : sol.consistent) rejected += ok ? 0 : 1;
  CHECK(rejected == 1);

  QueryOracle oracle(worked, NormKind::linf(), spec);
  const auto rep = extract_rcf_nondifferentiable(oracle);
  CHECK(rep.queries_rcf == 3);
  CHECK(rep.queries_factual == 3);
  CHECK(equivalent(rep.recovered, worked, 1e-9));
}

TEST_CASE("rcf-nondiff random p=10 under l1 with linf ball") {
  const int p = 10;
  const Hyperplane hidden = seeded_hyp(p, 5150);
  QueryOracle oracle(hidden, NormKind::l1(), RobustnessSpec(NormKind::linf(), 2.0));
  const auto rep = extract_rcf_nondifferentiable(oracle);
  CHECK(rep.queries_rcf == p + 1);
  CHECK(rep.queries_factual == p + 1);
  CHECK(hyperplanes_equivalent(rep.recovered, hidden, 1e-7).equivalent);
  CHECK(classify_agreement(rep.recovered, hidden, 100000, 99) >= 1.0 - 1e-6);
}

TEST_CASE("attacks succeed under every tie-break policy") {
  // l1 attack against tied |a_i|, linf attack against a zero coordinate
  Vec tie(3);
  tie << 1.5, -1.5, 0.4;
  const Hyperplane h_tie{tie, 0.7};
  Vec zero(3);
  zero << 2.0, 0.0, -1.0;
  const Hyperplane h_zero{zero, 0.9};
  const std::vector<TieBreakPolicy> policies = {
      TieBreakPolicy::vertex(), TieBreakPolicy::face_interior(0.37),
      TieBreakPolicy::seeded(17)};
  for (const auto& policy : policies) {
    {
      QueryOracle oracle(h_tie, NormKind::l1(), std::nullopt, policy);
      const auto rep = extract_cf_nondifferentiable(oracle);
      CHECK(rep.queries_cf == 4);
      CHECK(equivalent(rep.recovered, h_tie, 1e-7));
    }
    {
      QueryOracle oracle(h_zero, NormKind::linf(), std::nullopt, policy);
      const auto rep = extract_cf_nondifferentiable(oracle);
      CHECK(rep.queries_cf == 4);
      CHECK(equivalent(rep.recovered, h_zero, 1e-7));
    }
    {
      QueryOracle oracle(h_tie, NormKind::l1(),
                         RobustnessSpec(NormKind::l2(), 0.8), policy);
      const auto rep = extract_rcf_nondifferentiable(oracle);
      CHECK(rep.queries_rcf == 4);
      CHECK(rep.queries_factual == 4);
      CHECK(equivalent(rep.recovered, h_tie, 1e-7));
    }
    {
      QueryOracle oracle(h_zero, NormKind::linf(),
                         RobustnessSpec(NormKind::l1(), 1.3), policy);
      const auto rep = extract_rcf_nondifferentiable(oracle);
      CHECK(rep.queries_rcf == 4);
      CHECK(rep.queries_factual == 4);
      CHECK(equivalent(rep.recovered, h_zero, 1e-7));
    }
  }
}

TEST_CASE("attack ledgers and outputs are invariant under positive scaling") {
  const Hyperplane hidden = seeded_hyp(4, 2024);
  const Hyperplane scaled{hidden.a * 5.0, hidden.b * 5.0};
  QueryOracle o1(hidden, NormKind::linf());
  QueryOracle o2(scaled, NormKind::linf());
  const auto r1 = extract_cf_nondifferentiable(o1);
  const auto r2 = extract_cf_nondifferentiable(o2);
  CHECK(r1.queries_cf == r2.queries_cf);
  CHECK(hyperplanes_equivalent(r1.recovered, r2.recovered, 1e-9).equivalent);
  REQUIRE(o1.ledger().size() == o2.ledger().size());
  for (std::size_t i = 0; i < o1.ledger().size(); ++i) {
    const auto& a = o1.ledger().records()[i];
    const auto& b = o2.ledger().records()[i];
    CHECK((a.input - b.input).lpNorm<Eigen::Infinity>() < 1e-12);
    if (a.kind != QueryKind::Factual) {
      CHECK((a.output_point - b.output_point).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }
}
