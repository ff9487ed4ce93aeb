#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "linex/scenario.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spill(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

linex::ScenarioConfig load_config(const std::string& path) {
  auto cfg = linex::ScenarioConfig::from_json(linex::Json::parse(slurp(path)));
  if (const char* env = std::getenv("TOOL_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-based extraction and region certification for linear classifiers"};
  app.require_subcommand(1);

  std::string config_path, out_path, ledger_path, raster_path, ledger_out;

  auto* extract = app.add_subcommand(
      "extract", "run an extraction attack over seeded trials and assert its query budget");
  extract->add_option("--config", config_path, "scenario config (JSON)")->required();
  extract->add_option("--out", out_path, "report output path (JSON)");

  auto* regions = app.add_subcommand(
      "regions", "certify classification regions from a query ledger");
  regions->add_option("--config", config_path, "scenario config (JSON)")->required();
  regions->add_option("--ledger", ledger_path, "query ledger (JSONL)")->required();
  regions->add_option("--raster", raster_path, "raster CSV output path");
  regions->add_option("--out", out_path, "report output path (JSON)");

  auto* rasterize = app.add_subcommand(
      "raster", "synthesize the configured queries against the hidden model and rasterize");
  rasterize->add_option("--config", config_path, "scenario config (JSON)")->required();
  rasterize->add_option("--raster", raster_path, "raster CSV output path");
  rasterize->add_option("--out", out_path, "report output path (JSON)");
  rasterize->add_option("--ledger-out", ledger_out, "export the synthesized ledger (JSONL)");

  auto* demo = app.add_subcommand(
      "demo", "replay both worked 2-D examples, printing every intermediate value");

  CLI11_PARSE(app, argc, argv);

  try {
    linex::RunReport report;
    if (extract->parsed()) {
      report = linex::run_extract(load_config(config_path));
    } else if (regions->parsed()) {
      const auto cfg = load_config(config_path);
      const auto ledger = linex::ledger_from_jsonl(slurp(ledger_path));
      report = linex::run_regions(cfg, ledger);
    } else if (rasterize->parsed()) {
      const auto cfg = load_config(config_path);
      const auto ledger = linex::synthesize_ledger(cfg);
      if (!ledger_out.empty()) spill(ledger_out, linex::ledger_to_jsonl(ledger));
      report = linex::run_regions(cfg, ledger);
    } else if (demo->parsed()) {
      report = linex::run_demo();
      std::cout << report.text;
    }

    if (!raster_path.empty() && !report.csv.empty()) {
      spill(raster_path, report.csv);
    }
    const std::string dumped = linex::canonical_dump(report.json, 2) + "\n";
    if (!out_path.empty()) {
      spill(out_path, dumped);
    } else if (!demo->parsed()) {
      std::cout << dumped;
    }
    return report.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
