// vecsim: run, sweep, validate and re-render vehicular edge caching simulations.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 invariant failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vecache/error.hpp"
#include "vecache/invariants.hpp"
#include "vecache/simulation.hpp"

namespace fs = std::filesystem;
using namespace vecache;
using namespace vecache::harness;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

SimConfig resolve_config(const std::string& preset_name, const std::string& path,
                         const std::vector<std::string>& overrides) {
  SimConfig cfg = preset(preset_name);
  if (!path.empty()) cfg = load_config(path, cfg);
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << text;
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

void write_outputs(const fs::path& dir, const SimConfig& cfg, const SimulationResult& r) {
  fs::create_directories(dir);
  write_file(dir / "report.csv", emit_report(r.report, ReportFormat::Csv));
  write_file(dir / "report.json", emit_report(r.report, ReportFormat::Json));
  write_file(dir / "metrics.json", metrics_json(r.metrics) + "\n");
  write_file(dir / "config.txt", dump_config(cfg));
}

void write_trace(const SimConfig& cfg, const SimulationResult& r) {
  if (cfg.trace_path.empty()) return;
  const auto* cell = r.metrics.find(Scheme::Proposed, cfg.capacities.front());
  if (!cell) throw ConfigError("sim.trace_path needs the proposed scheme");
  std::ofstream out(cfg.trace_path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + cfg.trace_path);
  cell->ledger.write_ndjson(out);
}

bool print_invariants(const std::vector<InvariantResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << '\n';
    ok = ok && r.passed;
  }
  return ok;
}

// Grid file: ordinary `key = value` lines set the base config; `sweep.<key> =
// a, b, c` lines declare axes whose cartesian product forms the cells.
struct Grid {
  SimConfig base;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
};

Grid load_grid(const std::string& path, const SimConfig& start) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid '" + path + "'");
  Grid g{start, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("grid line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.rfind("sweep.", 0) == 0) {
      auto values = split_list(value);
      if (values.empty()) throw ConfigError("grid line " + std::to_string(lineno) + ": empty axis");
      SimConfig probe = g.base;
      for (const auto& v : values) apply_setting(probe, key.substr(6), v);
      g.axes.emplace_back(key.substr(6), std::move(values));
    } else {
      apply_setting(g.base, key, value);
    }
  }
  return g;
}

int cmd_run(const std::string& preset_name, const std::string& config_path, const std::vector<std::string>& sets,
            const std::string& out_dir, const std::string& format) {
  const auto cfg = resolve_config(preset_name, config_path, sets);
  const auto fmt = parse_format(format);
  const auto result = run_simulation(cfg);
  emit_report(std::cout, result.report, fmt);
  if (!out_dir.empty()) write_outputs(out_dir, cfg, result);
  write_trace(cfg, result);
  return 0;
}

int cmd_sweep(const std::string& preset_name, const std::string& grid_path, const std::string& out_dir) {
  const Grid grid = load_grid(grid_path, preset(preset_name));
  std::vector<SimConfig> cells{grid.base};
  for (const auto& [key, values] : grid.axes) {
    std::vector<SimConfig> next;
    for (const auto& c : cells) {
      for (const auto& v : values) {
        SimConfig x = c;
        apply_setting(x, key, v);
        next.push_back(std::move(x));
      }
    }
    cells = std::move(next);
  }
  Report all;
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].validate();
    std::cerr << "cell " << (i + 1) << "/" << cells.size() << '\n';
    const auto result = run_simulation(cells[i]);
    write_outputs(fs::path(out_dir) / ("cell_" + std::to_string(i)), cells[i], result);
    all.rows.insert(all.rows.end(), result.report.rows.begin(), result.report.rows.end());
  }
  write_file(fs::path(out_dir) / "results.csv", emit_report(all, ReportFormat::Csv));
  write_file(fs::path(out_dir) / "results.json", emit_report(all, ReportFormat::Json));
  emit_report(std::cout, all, ReportFormat::Csv);
  return 0;
}

int cmd_validate(const std::string& config_path, const std::vector<std::string>& sets) {
  SimConfig cfg = validation_preset();
  if (!config_path.empty()) cfg = load_config(config_path, cfg);
  for (const auto& o : sets) apply_override(cfg, o);
  cfg.validate();
  return print_invariants(validate_suite(cfg)) ? 0 : kExitInvariant;
}

int cmd_report(const std::string& in_path, const std::string& format) {
  std::ifstream in(in_path);
  if (!in) throw ConfigError("cannot open report '" + in_path + "'");
  const auto in_fmt = fs::path(in_path).extension() == ".json" ? ReportFormat::Json : ReportFormat::Csv;
  const auto report = parse_report(in, in_fmt);
  emit_report(std::cout, report, parse_format(format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicular edge caching simulator with federated-distillation popularity prediction"};
  app.require_subcommand(1);

  std::string preset_name = "desk", config_path, out_dir, format = "csv", grid_path, in_path;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Run one configuration and print its report");
  run->add_option("--config", config_path, "Config file (key = value lines)");
  run->add_option("--preset", preset_name, "Starting preset: desk or paper");
  run->add_option("--set", sets, "Override, key=value (repeatable)");
  run->add_option("--out", out_dir, "Directory for report.csv/json, metrics.json and config.txt");
  run->add_option("--format", format, "Report format on stdout: csv or json");

  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of a grid file");
  sweep->add_option("--grid", grid_path, "Grid file")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--preset", preset_name, "Starting preset: desk or paper");

  auto* validate = app.add_subcommand("validate", "Run the invariant suite on a small configuration");
  validate->add_option("--config", config_path, "Config file applied on top of the validation preset");
  validate->add_option("--set", sets, "Override, key=value (repeatable)");

  auto* report = app.add_subcommand("report", "Re-render a saved report");
  report->add_option("--in", in_path, "Saved report (.csv or .json)")->required();
  report->add_option("--format", format, "Output format: csv or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(preset_name, config_path, sets, out_dir, format);
    if (*sweep) return cmd_sweep(preset_name, grid_path, out_dir);
    if (*validate) return cmd_validate(config_path, sets);
    if (*report) return cmd_report(in_path, format);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
