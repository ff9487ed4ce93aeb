#pragma once

#include <random>
#include <string>

#include "linex/json_io.hpp"

namespace linex {

struct RasterSpec {
  Vec lo, hi;
  int resolution = 100;
};

struct QuerySpec {
  QueryKind kind = QueryKind::Factual;
  Vec point;
};

/// One experiment: a hidden model (explicit or seeded), the query mechanism
/// configuration, and what to run against it.
struct ScenarioConfig {
  int dimension = 2;
  std::optional<Hyperplane> model;  // seeded random when absent
  NormKind norm1 = NormKind::l2();
  std::optional<RobustnessSpec> robustness;
  TieBreakPolicy tiebreak = TieBreakPolicy::vertex();
  std::string attack = "cf-diff";
  int trials = 1;
  std::uint64_t seed = 0;
  std::vector<QuerySpec> queries;  // ledger synthesis for regions/raster runs
  std::optional<RasterSpec> raster;
  bool strict_rcf = true;
  bool augment = false;
  int sampler_check = 0;  // consistent-hyperplane samples; 0 disables

  static ScenarioConfig from_json(const Json& j);
  Json to_json() const;
};

struct RunReport {
  Json json;
  std::string text;  // human-readable log (demo)
  std::string csv;   // raster payload when produced
  bool pass = true;
};

struct BudgetExpectation {
  int cf = 0, rcf = 0, factual = 0;
};
/// Exact per-attack query budgets on non-degenerate starts.
BudgetExpectation expected_budget(const std::string& attack, int p);

Hyperplane random_hyperplane(int p, std::mt19937_64& rng);
Vec random_point(int p, std::mt19937_64& rng, double scale = 2.0);

/// Fraction of off-band sample points the two classifiers label identically.
double classify_agreement(const Hyperplane& h1, const Hyperplane& h2,
                          int samples, std::uint64_t seed,
                          double margin_band = 1e-6);

/// Run the configured attack over `trials` seeded hidden models, assert the
/// exact query budgets, and report per-trial outcomes. pass is false on any
/// budget mismatch or failed recovery.
RunReport run_extract(const ScenarioConfig& config);

/// Execute config.queries against the configured hidden model and return the
/// resulting ledger.
QueryLedger synthesize_ledger(const ScenarioConfig& config);

/// Build the uncertainty model from a ledger, rasterize the classification
/// regions, and optionally falsify the labels against sampled consistent
/// hyperplanes.
RunReport run_regions(const ScenarioConfig& config, const QueryLedger& ledger);

/// Replay both worked 2-D examples end to end, printing every intermediate
/// quantity; pass is false when any value drifts beyond 1e-9.
RunReport run_demo();

}  // namespace linex
