#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "linex/regions.hpp"
#include "linex/scenario.hpp"

using namespace linex;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

const Hyperplane worked{v2(2, -1), 3.0};

QueryLedger make_ledger(const Hyperplane& h, NormKind norm1,
                        std::optional<RobustnessSpec> spec,
                        const std::vector<std::pair<QueryKind, Vec>>& queries,
                        TieBreakPolicy policy = TieBreakPolicy::vertex()) {
  QueryOracle oracle(h, norm1, spec, policy);
  for (const auto& [kind, x] : queries) {
    switch (kind) {
      case QueryKind::Factual:
        oracle.factual_query(x);
        break;
      case QueryKind::Counterfactual:
        oracle.counterfactual_query(x);
        break;
      case QueryKind::RobustCounterfactual:
        oracle.robust_counterfactual_query(x);
        break;
    }
  }
  return oracle.ledger();
}

}  // namespace

TEST_CASE("single 'No' factual at the origin lowers to -b <= 0") {
  QueryLedger ledger;
  QueryRecord r;
  r.kind = QueryKind::Factual;
  r.input = v2(0, 0);
  r.output_label = -1;
  r.factual_label_at_input = -1;
  ledger.append(std::move(r));
  const auto model = model_from_ledger(ledger, NormKind::l2());
  REQUIRE(model.linear_constraints.size() == 1);
  CHECK(model.linear_constraints[0].sense == RowSense::LE);
  // b >= 0 consistent, b < 0 not
  CHECK(model.violation(v2(1, 1), 0.5) <= 0.0);
  CHECK(model.violation(v2(1, 1), -0.5) > 0.0);
}

TEST_CASE("factual + counterfactual rows match the worked geometry") {
  const auto ledger = make_ledger(worked, NormKind::linf(), std::nullopt,
                                  {{QueryKind::Factual, v2(3, 0)},
                                   {QueryKind::Counterfactual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::linf());
  CHECK(model.kind == ModelKind::Counterfactual);
  REQUIRE(model.cfs.size() == 1);
  CHECK(model.cfs[0].rho == doctest::Approx(1.0));  // ||(3,0)-(2,1)||_inf
  CHECK(model.cfs[0].label == 1);
  // the hidden model satisfies every row
  CHECK(model.violation(worked.a, worked.b) <= 1e-9);
  // and so does any positive scaling
  CHECK(model.violation(worked.a * 7.0, worked.b * 7.0) <= 1e-8);
}

TEST_CASE("inconsistent ledger is rejected") {
  QueryLedger ledger;
  QueryRecord r1;
  r1.kind = QueryKind::Factual;
  r1.input = v2(1, 1);
  r1.output_label = 1;
  r1.factual_label_at_input = 1;
  ledger.append(std::move(r1));
  QueryRecord r2;
  r2.kind = QueryKind::Factual;
  r2.input = v2(1, 1);
  r2.output_label = -1;
  r2.factual_label_at_input = -1;
  ledger.append(std::move(r2));
  CHECK_THROWS_WITH_AS(model_from_ledger(ledger, NormKind::l2()),
                       "inconsistent ledger", std::invalid_argument);
}

TEST_CASE("membership: convex hull of 'No' factuals is No") {
  QueryLedger ledger;
  for (const Vec& x : {v2(0, 0), v2(1, 0)}) {
    QueryRecord r;
    r.kind = QueryKind::Factual;
    r.input = x;
    r.output_label = -1;
    r.factual_label_at_input = -1;
    ledger.append(std::move(r));
  }
  const auto model = model_from_ledger(ledger, NormKind::l2());
  CHECK(membership(model, v2(0.5, 0)) == RegionLabel::No);
  CHECK(membership(model, v2(0, 0)) == RegionLabel::No);
  CHECK(membership(model, v2(9, 9)) == RegionLabel::Unknown);
}

TEST_CASE("membership: one factual+cf under l2 decides the whole plane") {
  const auto ledger = make_ledger(worked, NormKind::l2(), std::nullopt,
                                  {{QueryKind::Factual, v2(3, 0)},
                                   {QueryKind::Counterfactual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::l2());
  const auto rr = raster(model, v2(-5, -5), v2(5, 5), 40);
  // every cell whose center is off the boundary band is decided
  int unknown_off_band = 0;
  for (int iy = 0; iy < 40; ++iy) {
    for (int ix = 0; ix < 40; ++ix) {
      if (rr.at(ix, iy) != RegionLabel::Unknown) continue;
      const Vec c = rr.center(ix, iy);
      const double dist =
          std::abs(worked.a.dot(c) - worked.b) / worked.a.norm();
      if (dist > 2.0 * (10.0 / 40) * std::sqrt(2.0)) ++unknown_off_band;
    }
  }
  CHECK(unknown_off_band == 0);
  // ground truth agreement where decided
  for (int iy = 0; iy < 40; iy += 3) {
    for (int ix = 0; ix < 40; ix += 3) {
      const RegionLabel l = rr.at(ix, iy);
      if (l == RegionLabel::Unknown) continue;
      const Vec c = rr.center(ix, iy);
      if (std::abs(worked.a.dot(c) - worked.b) < 1e-3) continue;
      CHECK((l == RegionLabel::Yes) == (classify(worked, c) == 1));
    }
  }
}

TEST_CASE("membership: linf leaves an undecided wedge") {
  const auto ledger = make_ledger(worked, NormKind::linf(), std::nullopt,
                                  {{QueryKind::Factual, v2(3, 0)},
                                   {QueryKind::Counterfactual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::linf());
  CHECK(membership(model, v2(3, 0)) == RegionLabel::Yes);
  CHECK(membership(model, v2(-1, 1)) == RegionLabel::No);
  CHECK(membership(model, v2(0, 0)) == RegionLabel::Unknown);
}

TEST_CASE("membership_dual agrees on factual-only witnesses") {
  QueryLedger ledger;
  auto add_factual = [&](const Vec& x, int label) {
    QueryRecord r;
    r.kind = QueryKind::Factual;
    r.input = x;
    r.output_label = label;
    r.factual_label_at_input = label;
    ledger.append(std::move(r));
  };
  add_factual(v2(0, 0), -1);
  add_factual(v2(2, 0), -1);
  add_factual(v2(1, 2), 1);
  const auto model = model_from_ledger(ledger, NormKind::l2());
  // inside the 'No' hull
  CHECK(membership_dual(model, v2(1, 0)) == RegionLabel::No);
  CHECK(membership(model, v2(1, 0)) == RegionLabel::No);
  // far away: both routes say unknown
  CHECK(membership_dual(model, v2(30, -40)) == RegionLabel::Unknown);
  CHECK(membership(model, v2(30, -40)) == RegionLabel::Unknown);
  // the 'Yes' anchor
  CHECK(membership_dual(model, v2(1, 2)) == RegionLabel::Yes);
}

TEST_CASE("primal and dual membership agree cell-by-cell") {
  std::mt19937_64 rng(37);
  // a handful of factual-only and cf scenarios across the norm families
  for (int scenario = 0; scenario < 6; ++scenario) {
    const Hyperplane hidden = random_hyperplane(2, rng);
    const NormKind norm1 = scenario % 3 == 0   ? NormKind::l1()
                           : scenario % 3 == 1 ? NormKind::l2()
                                               : NormKind::linf();
    std::vector<std::pair<QueryKind, Vec>> queries;
    for (int k = 0; k < 3; ++k) {
      queries.emplace_back(QueryKind::Factual, random_point(2, rng));
    }
    if (scenario >= 3) {
      queries.emplace_back(QueryKind::Counterfactual, random_point(2, rng));
    }
    const auto ledger = make_ledger(hidden, norm1, std::nullopt, queries);
    const auto model = model_from_ledger(ledger, norm1);
    const auto primal = raster(model, v2(-4, -4), v2(4, 4), 14);
    const auto dual = raster(model, v2(-4, -4), v2(4, 4), 14, default_tols(),
                             /*dual_route=*/true);
    for (int iy = 0; iy < 14; ++iy) {
      for (int ix = 0; ix < 14; ++ix) {
        CHECK(primal.at(ix, iy) == dual.at(ix, iy));
      }
    }
  }
}

TEST_CASE("membership_dual rejects rcf models and lp norms") {
  const auto ledger = make_ledger(worked, NormKind::linf(),
                                  RobustnessSpec(NormKind::l1(), 1.0),
                                  {{QueryKind::RobustCounterfactual, v2(3, 0)}});
  const auto model =
      model_from_ledger(ledger, NormKind::linf(), RobustnessSpec(NormKind::l1(), 1.0));
  CHECK_THROWS_AS(membership_dual(model, v2(0, 0)), std::invalid_argument);
}

TEST_CASE("sampler: empty model accepts everything") {
  UncertaintyModel empty;
  empty.dim = 2;
  const auto s = sample_consistent_hyperplanes(empty, 100, 5);
  CHECK(s.acceptance_rate > 0.99);
}

TEST_CASE("sampler: half-space cone accepts about half the sphere") {
  QueryLedger ledger;
  QueryRecord r;
  r.kind = QueryKind::Factual;
  r.input = v2(0, 0);
  r.output_label = -1;
  r.factual_label_at_input = -1;
  ledger.append(std::move(r));
  const auto model = model_from_ledger(ledger, NormKind::l2());
  const auto s = sample_consistent_hyperplanes(model, 100000, 11, 100000);
  CHECK(s.acceptance_rate == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("sampler stays on the counterfactual equality manifold") {
  const auto ledger = make_ledger(worked, NormKind::linf(), std::nullopt,
                                  {{QueryKind::Factual, v2(3, 0)},
                                   {QueryKind::Counterfactual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::linf());
  const auto s = sample_consistent_hyperplanes(model, 200, 13);
  REQUIRE(s.hyperplanes.size() == 200);
  const Vec x_cf = model.cfs[0].x_cf;
  for (const auto& h : s.hyperplanes) {
    CHECK(std::abs(h.a.dot(x_cf) - h.b) <= 1e-9);
  }
}

TEST_CASE("augment: perspective point carries the factual's class (linf, l1)") {
  const RobustnessSpec spec(NormKind::l1(), 1.0);
  const auto ledger = make_ledger(worked, NormKind::linf(), spec,
                                  {{QueryKind::RobustCounterfactual, v2(3, 0)},
                                   {QueryKind::RobustCounterfactual, v2(-1, 1)}});
  const auto model = model_from_ledger(ledger, NormKind::linf(), spec);
  const auto aug = augment_rcf_model(model, true);
  CHECK(aug.augmented);
  REQUIRE(aug.factuals.size() == model.factuals.size() + 2);
  // corollary case (ii): d = rho and the added point classifies like x_F
  for (std::size_t k = model.factuals.size(); k < aug.factuals.size(); ++k) {
    CHECK(classify(worked, aug.factuals[k].x) == aug.factuals[k].label);
  }
  // the hidden model still satisfies the augmented rows
  CHECK(aug.violation(worked.a, worked.b) <= 1e-9);
}

TEST_CASE("augment: n1 == n2 touch point lies on the hyperplane") {
  std::mt19937_64 rng(43);
  for (const auto& nk : {NormKind::l1(), NormKind::linf()}) {
    for (int rep = 0; rep < 25; ++rep) {
      const Hyperplane hidden = random_hyperplane(2, rng);
      const RobustnessSpec spec(nk, 0.5 + 0.1 * (rep % 4));
      const Vec x = random_point(2, rng);
      const auto ledger = make_ledger(hidden, nk, spec,
                                      {{QueryKind::RobustCounterfactual, x}});
      const auto model = model_from_ledger(ledger, nk, spec);
      const auto aug = augment_rcf_model(model, true);
      // the last linear row added is a^T x_s - b = 0; the hidden model
      // satisfies it within tolerance
      const auto& row = aug.linear_constraints.back();
      REQUIRE(row.sense == RowSense::EQ);
      Vec w(3);
      w << hidden.a, hidden.b;
      const double scale = hidden.a.norm() + std::abs(hidden.b);
      CHECK(std::abs(row.coeff.dot(w)) <= 1e-9 * (1 + scale));
    }
  }
}

TEST_CASE("augment: l1 objective with l2 ball uses d = rho * sqrt(p)") {
  const RobustnessSpec spec(NormKind::l2(), 1.0);
  const auto ledger = make_ledger(worked, NormKind::l1(), spec,
                                  {{QueryKind::RobustCounterfactual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::l1(), spec);
  const auto aug = augment_rcf_model(model, true);
  const auto& rc = model.rcfs[0];
  const Vec v_hat = (rc.x_rcf - rc.x) / norm_eval(rc.x_rcf - rc.x, NormKind::l1());
  const Vec expected = rc.x_rcf - std::sqrt(2.0) * v_hat;  // p = 2, q = 2
  CHECK((aug.factuals.back().x - expected).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(classify(worked, aug.factuals.back().x) == rc.label);
}

TEST_CASE("lowering flags the lp ball relaxation") {
  const RobustnessSpec spec(NormKind::lp(3.0), 1.0);
  const auto ledger = make_ledger(worked, NormKind::linf(), spec,
                                  {{QueryKind::RobustCounterfactual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::linf(), spec);
  const auto lm = lower_model(model);
  CHECK(lm.relaxed);
  // the hidden model still satisfies the relaxed rows
  Vec a = worked.a;
  CHECK(lowered_violation(lm, a / a.norm(), worked.b / a.norm()) <= 1e-9);
}

TEST_CASE("region monotonicity: more records never shrink the regions") {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 4; ++rep) {
    const Hyperplane hidden = random_hyperplane(2, rng);
    std::vector<std::pair<QueryKind, Vec>> q1 = {
        {QueryKind::Factual, random_point(2, rng)},
        {QueryKind::Counterfactual, random_point(2, rng)}};
    auto q2 = q1;
    q2.emplace_back(QueryKind::Factual, random_point(2, rng));
    q2.emplace_back(QueryKind::Counterfactual, random_point(2, rng));
    const auto m1 = model_from_ledger(make_ledger(hidden, NormKind::linf(),
                                                  std::nullopt, q1),
                                      NormKind::linf());
    const auto m2 = model_from_ledger(make_ledger(hidden, NormKind::linf(),
                                                  std::nullopt, q2),
                                      NormKind::linf());
    const auto r1 = raster(m1, v2(-4, -4), v2(4, 4), 12);
    const auto r2 = raster(m2, v2(-4, -4), v2(4, 4), 12);
    for (int iy = 0; iy < 12; ++iy) {
      for (int ix = 0; ix < 12; ++ix) {
        const RegionLabel l1 = r1.at(ix, iy), l2 = r2.at(ix, iy);
        if (l1 == RegionLabel::No) CHECK(l2 == RegionLabel::No);
        if (l1 == RegionLabel::Yes) CHECK(l2 == RegionLabel::Yes);
      }
    }
  }
}

TEST_CASE("anchor facts: factual points are certified, cf points are boundary") {
  const auto ledger = make_ledger(worked, NormKind::linf(), std::nullopt,
                                  {{QueryKind::Factual, v2(-1, 1)},
                                   {QueryKind::Counterfactual, v2(-1, 1)}});
  const auto model = model_from_ledger(ledger, NormKind::linf());
  CHECK(membership(model, v2(-1, 1)) == RegionLabel::No);
  // the counterfactual lies on every consistent hyperplane
  const Vec x_cf = model.cfs[0].x_cf;
  const auto s = sample_consistent_hyperplanes(model, 300, 17);
  for (const auto& h : s.hyperplanes) {
    CHECK(std::abs(h.a.dot(x_cf) - h.b) <= 1e-8);
  }
  CHECK(membership(model, x_cf) != RegionLabel::Unknown);
}

TEST_CASE("membership labels are never contradicted by sampled hyperplanes") {
  std::mt19937_64 rng(53);
  const double eps = default_tols().strict_eps;
  for (int scenario = 0; scenario < 6; ++scenario) {
    const Hyperplane hidden = random_hyperplane(2, rng);
    const NormKind norm1 =
        scenario % 2 == 0 ? NormKind::l2() : NormKind::linf();
    std::vector<std::pair<QueryKind, Vec>> queries = {
        {QueryKind::Factual, random_point(2, rng)},
        {QueryKind::Counterfactual, random_point(2, rng)}};
    const auto model = model_from_ledger(
        make_ledger(hidden, norm1, std::nullopt, queries), norm1);
    const auto rr = raster(model, v2(-3, -3), v2(3, 3), 10);
    const auto samples = sample_consistent_hyperplanes(model, 400, 1000 + scenario);
    for (int iy = 0; iy < 10; ++iy) {
      for (int ix = 0; ix < 10; ++ix) {
        const RegionLabel label = rr.at(ix, iy);
        if (label == RegionLabel::Unknown) continue;
        const Vec c = rr.center(ix, iy);
        const double band = eps * (1 + c.lpNorm<Eigen::Infinity>());
        for (const auto& h : samples.hyperplanes) {
          const double m = h.a.dot(c) - h.b;
          if (label == RegionLabel::No) CHECK(m <= band);
          if (label == RegionLabel::Yes) CHECK(m >= -band);
        }
      }
    }
  }
}

TEST_CASE("every model is a cone: (a,b) = 0 satisfies all lowered rows") {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 10; ++rep) {
    const Hyperplane hidden = random_hyperplane(2, rng);
    const NormKind norm1 = rep % 2 == 0 ? NormKind::l1() : NormKind::l2();
    const RobustnessSpec spec(rep % 3 == 0 ? NormKind::linf() : NormKind::l2(),
                              0.5);
    const auto ledger = make_ledger(hidden, norm1, spec,
                                    {{QueryKind::Factual, random_point(2, rng)},
                                     {QueryKind::Counterfactual, random_point(2, rng)},
                                     {QueryKind::RobustCounterfactual, random_point(2, rng)}});
    const auto model = model_from_ledger(ledger, norm1, spec);
    CHECK(model.violation(Vec::Zero(2), 0.0) <= 0.0);
    // positive homogeneity: scaling a consistent vector stays consistent
    CHECK(model.violation(hidden.a * 0.03, hidden.b * 0.03) <= 1e-10);
    // every ledger record produced at least one constraint
    CHECK(model.linear_constraints.size() + model.norm_constraints.size() +
              model.dualnorm_equalities.size() >= ledger.size());
  }
}

TEST_CASE("raster csv shape") {
  const auto ledger = make_ledger(worked, NormKind::l2(), std::nullopt,
                                  {{QueryKind::Factual, v2(3, 0)}});
  const auto model = model_from_ledger(ledger, NormKind::l2());
  const auto rr = raster(model, v2(-1, -1), v2(1, 1), 4);
  const std::string csv = raster_csv(rr);
  CHECK(csv.rfind("x1,x2,label\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);  // header + 16 cells
  CHECK_THROWS(raster(model, v2(-1, -1), v2(1, 1), 1));
}
