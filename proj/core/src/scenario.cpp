#include "linex/scenario.hpp"

#include <cmath>
#include <sstream>

namespace linex {

namespace {

Vec vec_from_json(const Json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  return v;
}

Json vec_to_json(const Vec& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

TieBreakPolicy tiebreak_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "vertex") return TieBreakPolicy::vertex();
    throw std::invalid_argument("unknown tiebreak: " + j.get<std::string>());
  }
  if (j.contains("face_interior")) {
    return TieBreakPolicy::face_interior(j.at("face_interior").get<double>());
  }
  if (j.contains("seeded")) {
    return TieBreakPolicy::seeded(j.at("seeded").get<std::uint64_t>());
  }
  throw std::invalid_argument("unknown tiebreak encoding");
}

Json tiebreak_to_json(const TieBreakPolicy& p) {
  switch (p.kind) {
    case TieBreakPolicy::Kind::Vertex:
      return "vertex";
    case TieBreakPolicy::Kind::FaceInterior:
      return Json{{"face_interior", p.theta}};
    case TieBreakPolicy::Kind::Seeded:
      return Json{{"seeded", p.seed}};
  }
  return nullptr;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const Json& j) {
  ScenarioConfig c;
  c.dimension = j.value("dimension", 2);
  if (j.contains("model")) {
    c.model = hyperplane_from_json(j.at("model"));
    c.dimension = static_cast<int>(c.model->dim());
  }
  if (j.contains("norm1")) c.norm1 = norm_from_json(j.at("norm1"));
  if (j.contains("robustness")) {
    const auto& r = j.at("robustness");
    c.robustness = RobustnessSpec(norm_from_json(r.at("norm2")),
                                  r.at("rho").get<double>());
  }
  if (j.contains("tiebreak")) c.tiebreak = tiebreak_from_json(j.at("tiebreak"));
  c.attack = j.value("attack", std::string("cf-diff"));
  c.trials = j.value("trials", 1);
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("queries")) {
    for (const auto& q : j.at("queries")) {
      c.queries.push_back({query_kind_from_string(q.at("kind").get<std::string>()),
                           vec_from_json(q.at("point"))});
    }
  }
  if (j.contains("raster")) {
    const auto& r = j.at("raster");
    c.raster = RasterSpec{vec_from_json(r.at("lo")), vec_from_json(r.at("hi")),
                          r.at("resolution").get<int>()};
  }
  c.strict_rcf = j.value("strict_rcf", true);
  c.augment = j.value("augment", false);
  c.sampler_check = j.value("sampler_check", 0);
  if (c.trials < 1) throw std::invalid_argument("trials must be >= 1");
  return c;
}

Json ScenarioConfig::to_json() const {
  Json j{{"dimension", dimension},
         {"norm1", norm_to_json(norm1)},
         {"tiebreak", tiebreak_to_json(tiebreak)},
         {"attack", attack},
         {"trials", trials},
         {"seed", seed},
         {"strict_rcf", strict_rcf},
         {"augment", augment},
         {"sampler_check", sampler_check}};
  if (model) j["model"] = linex::to_json(*model);
  if (robustness) {
    j["robustness"] = Json{{"norm2", norm_to_json(robustness->norm2)},
                           {"rho", robustness->rho}};
  }
  if (!queries.empty()) {
    Json qs = Json::array();
    for (const auto& q : queries) {
      qs.push_back(Json{{"kind", to_string(q.kind)}, {"point", vec_to_json(q.point)}});
    }
    j["queries"] = qs;
  }
  if (raster) {
    j["raster"] = Json{{"lo", vec_to_json(raster->lo)},
                       {"hi", vec_to_json(raster->hi)},
                       {"resolution", raster->resolution}};
  }
  return j;
}

BudgetExpectation expected_budget(const std::string& attack, int p) {
  if (attack == "cf-diff") return {1, 0, 1};
  if (attack == "cf-nondiff") return {p + 1, 0, 1};
  if (attack == "rcf-diff") return {0, 1, 1};
  if (attack == "rcf-nondiff") return {0, p + 1, p + 1};
  throw std::invalid_argument("unknown attack: " + attack);
}

Hyperplane random_hyperplane(int p, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    Vec a(p);
    for (int i = 0; i < p; ++i) a[i] = gauss(rng);
    if (a.lpNorm<Eigen::Infinity>() < 0.1) continue;
    const double b = gauss(rng);
    return Hyperplane(std::move(a), b);
  }
}

Vec random_point(int p, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  Vec x(p);
  for (int i = 0; i < p; ++i) x[i] = gauss(rng);
  return x;
}

double classify_agreement(const Hyperplane& h1, const Hyperplane& h2,
                          int samples, std::uint64_t seed, double margin_band) {
  const int p = static_cast<int>(h1.dim());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 3.0);
  const double s1 = h1.a.norm() + std::abs(h1.b);
  const double s2 = h2.a.norm() + std::abs(h2.b);
  long agree = 0, counted = 0;
  Vec x(p);
  for (int k = 0; k < samples; ++k) {
    for (int i = 0; i < p; ++i) x[i] = gauss(rng);
    const double m1 = h1.a.dot(x) - h1.b;
    const double m2 = h2.a.dot(x) - h2.b;
    if (std::abs(m1) <= margin_band * s1 || std::abs(m2) <= margin_band * s2) {
      continue;  // inside the boundary band of either model
    }
    ++counted;
    agree += ((m1 >= 0) == (m2 >= 0)) ? 1 : 0;
  }
  return counted > 0 ? static_cast<double>(agree) / counted : 1.0;
}

namespace {

// A start that keeps the one-query differentiable attacks on their
// non-degenerate path.
Vec off_boundary_point(const Hyperplane& h, int p, std::mt19937_64& rng) {
  for (;;) {
    Vec x = random_point(p, rng);
    const double scale = h.a.norm() * (1.0 + x.norm()) + std::abs(h.b);
    if (std::abs(h.a.dot(x) - h.b) > 1e-3 * scale) return x;
  }
}

Hyperplane trial_hidden(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  if (cfg.model) return *cfg.model;
  for (;;) {
    Hyperplane h = random_hyperplane(cfg.dimension, rng);
    // keep e^1 clearly off the hyperplane so probe schedules stay on the
    // p+1-query path
    const double scale = h.a.norm() + std::abs(h.b);
    if (std::abs(h.a[0] - h.b) > 1e-3 * scale) return h;
  }
}

}  // namespace

RunReport run_extract(const ScenarioConfig& cfg) {
  RunReport out;
  const int p = cfg.dimension;
  const BudgetExpectation expect = expected_budget(cfg.attack, p);
  const bool needs_rcf = cfg.attack.rfind("rcf", 0) == 0;
  if (needs_rcf && !cfg.robustness) {
    throw std::invalid_argument("run_extract: attack needs a robustness spec");
  }

  Json trials = Json::array();
  int equivalent_count = 0;
  int budget_exact_count = 0;
  for (int t = 0; t < cfg.trials; ++t) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    const Hyperplane hidden = trial_hidden(cfg, rng);
    TieBreakPolicy policy = cfg.tiebreak;
    if (policy.kind == TieBreakPolicy::Kind::Seeded) {
      policy.seed = mix_seed(cfg.seed, 7777 + static_cast<std::uint64_t>(t));
    }
    QueryOracle oracle(hidden, cfg.norm1, cfg.robustness, policy);

    ExtractionReport rep;
    if (cfg.attack == "cf-diff") {
      rep = extract_cf_differentiable(oracle, off_boundary_point(hidden, p, rng));
    } else if (cfg.attack == "cf-nondiff") {
      rep = extract_cf_nondifferentiable(oracle);
    } else if (cfg.attack == "rcf-diff") {
      rep = extract_rcf_differentiable(oracle, off_boundary_point(hidden, p, rng));
    } else if (cfg.attack == "rcf-nondiff") {
      rep = extract_rcf_nondifferentiable(oracle);
    } else {
      throw std::invalid_argument("unknown attack: " + cfg.attack);
    }

    const EquivalenceResult eq = hyperplanes_equivalent(rep.recovered, hidden, 1e-6);
    rep.equivalence_residual = eq.residual;
    const double agreement = classify_agreement(
        rep.recovered, hidden, 2000, mix_seed(cfg.seed, 31 + static_cast<std::uint64_t>(t)));
    const bool equivalent = eq.equivalent && agreement == 1.0;
    const bool budget_exact = rep.queries_cf == expect.cf &&
                              rep.queries_rcf == expect.rcf &&
                              rep.queries_factual == expect.factual;
    equivalent_count += equivalent ? 1 : 0;
    budget_exact_count += budget_exact ? 1 : 0;
    Json tj = to_json(rep);
    tj["equivalent"] = equivalent;
    tj["classify_agreement"] = agreement;
    tj["budget_exact"] = budget_exact;
    trials.push_back(std::move(tj));
    if (!budget_exact || !equivalent) out.pass = false;
  }

  out.json = Json{
      {"config", cfg.to_json()},
      {"expected_budget",
       {{"cf", expect.cf}, {"rcf", expect.rcf}, {"factual", expect.factual}}},
      {"aggregate",
       {{"trials", cfg.trials},
        {"equivalent", equivalent_count},
        {"budget_exact", budget_exact_count}}},
      {"trials", trials},
      {"pass", out.pass}};
  return out;
}

QueryLedger synthesize_ledger(const ScenarioConfig& cfg) {
  std::mt19937_64 rng(mix_seed(cfg.seed, 0));
  const Hyperplane hidden =
      cfg.model ? *cfg.model : random_hyperplane(cfg.dimension, rng);
  QueryOracle oracle(hidden, cfg.norm1, cfg.robustness, cfg.tiebreak);
  for (const auto& q : cfg.queries) {
    switch (q.kind) {
      case QueryKind::Factual:
        oracle.factual_query(q.point);
        break;
      case QueryKind::Counterfactual:
        oracle.counterfactual_query(q.point);
        break;
      case QueryKind::RobustCounterfactual:
        oracle.robust_counterfactual_query(q.point);
        break;
    }
  }
  return oracle.ledger();
}

RunReport run_regions(const ScenarioConfig& cfg, const QueryLedger& ledger) {
  RunReport out;
  UncertaintyModel model =
      model_from_ledger(ledger, cfg.norm1, cfg.robustness, cfg.strict_rcf);
  if (cfg.augment && model.kind == ModelKind::RobustCounterfactual) {
    model = augment_rcf_model(model, true);
  }
  model.relaxed = lower_model(model).relaxed;  // flag sound relaxations
  Json j{{"config", cfg.to_json()}, {"model", to_json(model)}};

  if (cfg.raster) {
    const RasterResult rr =
        raster(model, cfg.raster->lo, cfg.raster->hi, cfg.raster->resolution);
    out.csv = raster_csv(rr);
    j["raster_counts"] = Json{{"yes", rr.count(RegionLabel::Yes)},
                              {"no", rr.count(RegionLabel::No)},
                              {"unknown", rr.count(RegionLabel::Unknown)}};
    if (cfg.sampler_check > 0) {
      const SampleResult samples = sample_consistent_hyperplanes(
          model, cfg.sampler_check, mix_seed(cfg.seed, 99));
      long violations = 0;
      const double eps = default_tols().strict_eps;
      for (int iy = 0; iy < rr.resolution; ++iy) {
        for (int ix = 0; ix < rr.resolution; ++ix) {
          const RegionLabel label = rr.at(ix, iy);
          if (label == RegionLabel::Unknown) continue;
          const Vec c = rr.center(ix, iy);
          const double band = eps * (1.0 + c.lpNorm<Eigen::Infinity>());
          for (const auto& h : samples.hyperplanes) {
            const double m = h.a.dot(c) - h.b;
            if (label == RegionLabel::No && m > band) ++violations;
            if (label == RegionLabel::Yes && m < -band) ++violations;
          }
        }
      }
      j["sampler"] = Json{{"samples", static_cast<int>(samples.hyperplanes.size())},
                          {"acceptance_rate", samples.acceptance_rate},
                          {"violations", violations}};
      if (violations > 0) out.pass = false;
    }
  }
  j["pass"] = out.pass;
  out.json = std::move(j);
  return out;
}

namespace {

struct DemoCheck {
  std::ostringstream log;
  bool ok = true;
  void expect_vec(const std::string& what, const Vec& got, const Vec& want) {
    const double err = (got - want).lpNorm<Eigen::Infinity>();
    log << "  " << what << " = [" << got.transpose() << "]  (expected ["
        << want.transpose() << "], err " << err << ")\n";
    if (err > 1e-9) ok = false;
  }
  void expect_num(const std::string& what, double got, double want) {
    const double err = std::abs(got - want);
    log << "  " << what << " = " << got << "  (expected " << want << ", err "
        << err << ")\n";
    if (err > 1e-9) ok = false;
  }
};

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

}  // namespace

RunReport run_demo() {
  RunReport out;
  DemoCheck d;
  const Hyperplane hidden(v2(2, -1), 3.0);
  const NormKind linf = NormKind::linf();

  d.log << "worked example 1: counterfactual extraction, norm1 = linf\n";
  d.log << "hidden hyperplane: 2 x1 - x2 = 3\n";
  {
    QueryOracle oracle(hidden, linf);
    d.expect_num("boundary distance d at (3,0)",
                 boundary_distance(hidden, v2(3, 0), linf), -1.0);
    const Vec cf1 = oracle.counterfactual_query(v2(3, 0));
    d.expect_vec("q_cf(3,0)", cf1, v2(2, 1));
    d.expect_vec("direction v = q_cf(3,0) - (3,0)", cf1 - v2(3, 0), v2(-1, 1));
    const Vec cf2 = oracle.counterfactual_query(v2(-1, 1));
    d.expect_vec("q_cf(-1,1)", cf2, v2(1, -1));
    d.log << "  system: a.(2,1) = b ; a.(1,-1) = b\n";
    const Hyperplane solved = solve_hyperplane_from_boundary_points({cf1, cf2});
    const EquivalenceResult eq = hyperplanes_equivalent(solved, hidden, 1e-12);
    d.log << "  solved hyperplane: a = [" << solved.a.transpose()
          << "], b = " << solved.b << "\n";
    d.expect_num("equivalence residual vs hidden", eq.residual, 0.0);
  }

  d.log << "\nworked example 2: robust counterfactual extraction, norm1 = linf, "
           "norm2 = l1, rho = 1\n";
  {
    const RobustnessSpec spec(NormKind::l1(), 1.0);
    QueryOracle oracle(hidden, linf, spec);
    const int l1 = oracle.factual_query(v2(3, 0));
    d.log << "  q_f(3,0) = " << l1
          << "  (the sign convention labels the boundary side +1)\n";
    d.expect_num("q_f(3,0)", l1, 1.0);
    const Vec r1 = oracle.robust_counterfactual_query(v2(3, 0));
    d.expect_vec("q_rcf(3,0)", r1, v2(4.0 / 3, 5.0 / 3));
    const int l2 = oracle.factual_query(v2(-1, 1));
    d.expect_num("q_f(-1,1)", l2, -1.0);
    const Vec r2 = oracle.robust_counterfactual_query(v2(-1, 1));
    d.expect_vec("q_rcf(-1,1)", r2, v2(5.0 / 3, -5.0 / 3));
    d.log << "  system under ||a||_inf = 1:\n"
          << "    (4 a1 + 5 a2)/3 - b + 1 = 0\n"
          << "    (5 a1 - 5 a2)/3 - b - 1 = 0\n"
          << "  solution line: b = 1.5 a1, a2 = a1/10 - 3/5\n";
    const RcfSystemResult sol = solve_rcf_touch_system(
        {v2(3, 0), v2(-1, 1)}, {r1, r2}, {l1, l2}, linf, spec);
    for (std::size_t k = 0; k < sol.candidates.size(); ++k) {
      d.log << "  candidate a1 = " << sol.candidates[k].a[0] << ": a = ["
            << sol.candidates[k].a.transpose() << "], b = "
            << sol.candidates[k].b
            << (sol.consistent[k] ? "  [consistent]"
                                  : "  [rejected: violates optimality conditions]")
            << "\n";
    }
    if (sol.chosen < 0) {
      d.ok = false;
    } else {
      const Hyperplane& fin = sol.candidates[static_cast<std::size_t>(sol.chosen)];
      d.expect_vec("final a", fin.a, v2(1, -0.5));
      d.expect_num("final b", fin.b, 1.5);
      const EquivalenceResult eq = hyperplanes_equivalent(fin, hidden, 1e-9);
      d.expect_num("equivalence residual vs hidden", eq.residual, 0.0);
    }
    bool rejected_minus_one = false;
    for (std::size_t k = 0; k < sol.candidates.size(); ++k) {
      if (!sol.consistent[k] && std::abs(sol.candidates[k].a[0] + 1.0) < 1e-6) {
        rejected_minus_one = true;
      }
    }
    d.log << "  candidate a1 = -1 rejected: " << (rejected_minus_one ? "yes" : "NO")
          << "\n";
    if (!rejected_minus_one) d.ok = false;
  }

  d.log << "\n" << (d.ok ? "demo: all values match" : "demo: MISMATCH") << "\n";
  out.text = d.log.str();
  out.pass = d.ok;
  out.json = Json{{"pass", out.pass}};
  return out;
}

}  // namespace linex
