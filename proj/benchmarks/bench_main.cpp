#include <benchmark/benchmark.h>

#include <random>

#include "linex/extraction.hpp"
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

UncertaintyModel cf_model(NormKind norm1) {
  QueryOracle oracle(worked, norm1);
  oracle.factual_query(v2(3, 0));
  oracle.counterfactual_query(v2(3, 0));
  return model_from_ledger(oracle.ledger(), norm1);
}

}  // namespace

static void BM_NormEval(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Vec x = random_point(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(norm_eval(x, NormKind::lp(3.0)));
  }
}
BENCHMARK(BM_NormEval)->Arg(8)->Arg(64);

static void BM_DualMaximizer(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Vec a = random_point(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dual_maximizer(a, NormKind::l1()));
  }
}
BENCHMARK(BM_DualMaximizer)->Arg(8)->Arg(64);

static void BM_CounterfactualQuery(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  const Hyperplane h = random_hyperplane(p, rng);
  const Vec x = random_point(p, rng);
  std::mt19937_64 policy_rng(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_counterfactual(
        h, x, NormKind::linf(), TieBreakPolicy::vertex(), policy_rng));
  }
}
BENCHMARK(BM_CounterfactualQuery)->Arg(2)->Arg(25);

static void BM_ExtractCfNondiff(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  const Hyperplane h = random_hyperplane(p, rng);
  for (auto _ : state) {
    QueryOracle oracle(h, NormKind::linf());
    benchmark::DoNotOptimize(extract_cf_nondifferentiable(oracle));
  }
}
BENCHMARK(BM_ExtractCfNondiff)->Arg(2)->Arg(25);

static void BM_ExtractRcfNondiff(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(6);
  const Hyperplane h = random_hyperplane(p, rng);
  for (auto _ : state) {
    QueryOracle oracle(h, NormKind::l1(), RobustnessSpec(NormKind::l2(), 0.5));
    benchmark::DoNotOptimize(extract_rcf_nondifferentiable(oracle));
  }
}
BENCHMARK(BM_ExtractRcfNondiff)->Arg(2)->Arg(25);

static void BM_MembershipL2(benchmark::State& state) {
  const auto model = cf_model(NormKind::l2());
  std::mt19937_64 rng(7);
  std::vector<Vec> pts;
  for (int i = 0; i < 64; ++i) pts.push_back(random_point(2, rng, 3.0));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(membership(model, pts[i++ % pts.size()]));
  }
}
BENCHMARK(BM_MembershipL2);

static void BM_MembershipLinf(benchmark::State& state) {
  const auto model = cf_model(NormKind::linf());
  std::mt19937_64 rng(8);
  std::vector<Vec> pts;
  for (int i = 0; i < 64; ++i) pts.push_back(random_point(2, rng, 3.0));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(membership(model, pts[i++ % pts.size()]));
  }
}
BENCHMARK(BM_MembershipLinf);

static void BM_MembershipDualLinf(benchmark::State& state) {
  const auto model = cf_model(NormKind::linf());
  std::mt19937_64 rng(9);
  std::vector<Vec> pts;
  for (int i = 0; i < 64; ++i) pts.push_back(random_point(2, rng, 3.0));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(membership_dual(model, pts[i++ % pts.size()]));
  }
}
BENCHMARK(BM_MembershipDualLinf);

BENCHMARK_MAIN();
