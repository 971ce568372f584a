#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellsense/error.hpp"
#include "cellsense/estimators.hpp"
#include "cellsense/eval.hpp"
#include "cellsense/gp.hpp"
#include "cellsense/map_io.hpp"
#include "cellsense/radio_map.hpp"
#include "cellsense/synth.hpp"
#include "cellsense/trace_io.hpp"

namespace fs = std::filesystem;
using namespace cellsense;

namespace {

const std::vector<std::string> kTechniques{"cellsense", "hybrid", "deterministic", "gp", "cellid"};
const std::vector<std::string> kTestbeds{"rural", "urban"};

struct TechniqueArgs {
  std::string technique = "cellsense";
  std::string testbed = "rural";
  std::optional<int> ns;
  std::optional<int> k;

  void attach(CLI::App* cmd) {
    cmd->add_option("--technique", technique, "Localization technique")
        ->check(CLI::IsMember(kTechniques));
    cmd->add_option("--testbed", testbed, "Testbed whose tuned defaults fill in --ns/--k")
        ->check(CLI::IsMember(kTestbeds));
    cmd->add_option("--ns", ns, "Scans per estimate (N_s)")->check(CLI::PositiveNumber);
    cmd->add_option("--k", k, "Cells or neighbours averaged per estimate")
        ->check(CLI::PositiveNumber);
  }

  Technique parsed() const { return parse_technique(technique); }

  EstimatorParams params() const {
    EstimatorParams p = default_params(parsed(), parse_testbed(testbed));
    if (ns) p.n_samples = *ns;
    if (k) p.k = *k;
    return p;
  }
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

RadioMap load_map_with_towers(const fs::path& map_path, const std::string& towers_path) {
  RadioMap map = load_radio_map(map_path);
  if (!towers_path.empty()) attach_tower_locations(map, read_tower_locations(fs::path(towers_path)));
  return map;
}

PrecomputedGrid fit_gp_grid(const RadioMap& map, std::size_t points, std::uint64_t seed) {
  GpFitOptions fit;
  fit.seed = seed;
  const auto models = fit_tower_models(map, fit);
  const Rect bounds = training_bounds(map);
  return gp_build_grid(models, bounds, spacing_for_point_count(bounds, points), map.origin);
}

std::optional<PrecomputedGrid> gp_grid_for(Technique technique, const RadioMap& map,
                                           const std::string& grid_path) {
  if (technique != Technique::gp) return std::nullopt;
  if (!grid_path.empty()) return load_gp_grid(fs::path(grid_path));
  std::cerr << "fitting GP models (pass --gp-grid to reuse a saved grid)\n";
  return fit_gp_grid(map, 1019, 1);
}

std::vector<double> parse_doubles(const std::vector<std::string>& values) {
  std::vector<double> out;
  for (const auto& v : values) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size()) throw CLI::ValidationError("--values", "not a number: " + v);
    out.push_back(d);
  }
  return out;
}

std::vector<int> parse_ints(const std::vector<std::string>& values) {
  std::vector<int> out;
  for (double d : parse_doubles(values)) {
    if (d != static_cast<double>(static_cast<int>(d))) {
      throw CLI::ValidationError("--values", "expected integers");
    }
    out.push_back(static_cast<int>(d));
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Grid-based probabilistic GSM localization toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic training/test data set");
  std::string preset_name = "rural";
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--preset", preset_name, "Synthetic world preset")
      ->check(CLI::IsMember(kTestbeds));
  synth->add_option("--seed", synth_seed, "World and trace seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // build
  auto* build = app.add_subcommand("build", "Build a radio map from a training trace");
  std::string build_traces;
  double build_grid = 70.0;
  std::string build_out;
  std::string build_towers;
  bool strip = false;
  build->add_option("--traces", build_traces, "Training trace CSV")->required()->check(CLI::ExistingFile);
  build->add_option("--grid-length", build_grid, "Grid cell length in meters")->check(CLI::PositiveNumber);
  build->add_option("--out", build_out, "Radio map JSON to write")->required();
  build->add_option("--towers", build_towers, "Tower location CSV (needed for cell-ID)")
      ->check(CLI::ExistingFile);
  build->add_flag("--strip-points", strip, "Drop raw fingerprint points (hybrid needs them)");

  // gp-grid
  auto* gpgrid = app.add_subcommand("gp-grid", "Fit per-tower GP models and precompute a grid");
  std::string gp_map;
  std::string gp_out;
  std::size_t gp_points = 1019;
  std::uint64_t gp_seed = 1;
  gpgrid->add_option("--map", gp_map, "Radio map JSON with fingerprint points")->required()
      ->check(CLI::ExistingFile);
  gpgrid->add_option("--out", gp_out, "GP grid JSON to write")->required();
  gpgrid->add_option("--points", gp_points, "Approximate number of grid points")
      ->check(CLI::PositiveNumber);
  gpgrid->add_option("--seed", gp_seed, "Training subsample seed");

  // locate
  auto* locate = app.add_subcommand("locate", "Estimate a location for every scan of a trace");
  TechniqueArgs locate_args;
  std::string locate_map;
  std::string locate_scans;
  std::string locate_towers;
  std::string locate_gp;
  std::string locate_out;
  locate->add_option("--map", locate_map, "Radio map JSON")->required()->check(CLI::ExistingFile);
  locate->add_option("--scans", locate_scans, "Trace CSV to localize")->required()
      ->check(CLI::ExistingFile);
  locate_args.attach(locate);
  locate->add_option("--towers", locate_towers, "Tower location CSV")->check(CLI::ExistingFile);
  locate->add_option("--gp-grid", locate_gp, "Precomputed GP grid JSON")->check(CLI::ExistingFile);
  locate->add_option("--out", locate_out, "Estimates CSV (default: stdout)");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a technique against a test trace");
  TechniqueArgs eval_args;
  std::string eval_map;
  std::string eval_scans;
  std::string eval_towers;
  std::string eval_gp;
  std::string eval_report;
  std::string eval_cdf;
  bool truth_required = false;
  int eval_reps = 3;
  evaluate_cmd->add_option("--map", eval_map, "Radio map JSON")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--scans", eval_scans, "Test trace CSV with ground truth")->required()
      ->check(CLI::ExistingFile);
  eval_args.attach(evaluate_cmd);
  evaluate_cmd->add_option("--towers", eval_towers, "Tower location CSV")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--gp-grid", eval_gp, "Precomputed GP grid JSON")->check(CLI::ExistingFile);
  evaluate_cmd->add_flag("--truth-required", truth_required,
                         "Fail on scans without ground truth instead of skipping them");
  evaluate_cmd->add_option("--report", eval_report, "Report CSV (default: stdout)");
  evaluate_cmd->add_option("--cdf", eval_cdf, "Error CDF CSV");
  evaluate_cmd->add_option("--repetitions", eval_reps, "Timed repetitions per estimate")
      ->check(CLI::PositiveNumber);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Re-evaluate while varying one parameter");
  TechniqueArgs sweep_args;
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  std::string sweep_preset;
  std::string sweep_train;
  std::string sweep_test;
  std::string sweep_towers_path;
  std::optional<double> sweep_grid;
  std::uint64_t sweep_seed = 1;
  std::string sweep_report;
  int sweep_reps = 1;
  sweep->add_option("--param", sweep_param, "Parameter to vary")->required()
      ->check(CLI::IsMember({"grid", "ns", "k", "towers", "density"}));
  sweep->add_option("--values", sweep_values,
                    "Values: grid lengths, N_s, K, tower drop fractions or fingerprint keep fractions")
      ->required();
  auto* preset_opt = sweep->add_option("--preset", sweep_preset, "Generate data from a preset")
                         ->check(CLI::IsMember(kTestbeds));
  auto* train_opt = sweep->add_option("--train", sweep_train, "Training trace CSV")
                        ->check(CLI::ExistingFile);
  auto* test_opt = sweep->add_option("--test", sweep_test, "Test trace CSV")->check(CLI::ExistingFile);
  sweep->add_option("--towers", sweep_towers_path, "Tower location CSV")->check(CLI::ExistingFile);
  preset_opt->excludes(train_opt)->excludes(test_opt);
  train_opt->needs(test_opt);
  test_opt->needs(train_opt);
  sweep_args.attach(sweep);
  sweep->add_option("--grid-length", sweep_grid, "Grid cell length when not swept")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "Base seed for data and ablations");
  sweep->add_option("--report", sweep_report, "Report CSV (default: stdout)");
  sweep->add_option("--repetitions", sweep_reps, "Timed repetitions per estimate")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    const Preset preset = make_preset(preset_name, synth_seed);
    const Dataset data = generate_dataset(preset, synth_seed);
    const fs::path dir(synth_out);
    fs::create_directories(dir);
    write_trace(dir / "train.csv", data.training);
    write_trace(dir / "test.csv", data.test);
    write_tower_locations(dir / "towers.csv", data.tower_locations);
    std::size_t readings = 0;
    for (const auto& s : data.training) readings += s.readings.size();
    std::printf("%zu training scans, %zu test scans, %zu towers, %.2f towers per scan\n",
                data.training.size(), data.test.size(), data.tower_locations.size(),
                static_cast<double>(readings) / static_cast<double>(data.training.size()));
    return 0;
  }

  if (build->parsed()) {
    const auto scans = read_trace(fs::path(build_traces));
    BuildOptions options;
    options.grid_length = build_grid;
    options.keep_points = !strip;
    RadioMap map = build_radio_map(scans, options);
    if (!build_towers.empty()) attach_tower_locations(map, read_tower_locations(fs::path(build_towers)));
    save_radio_map(map, fs::path(build_out));
    std::printf("%zu cells, %zu towers, %zu points\n", map.cells.size(), map.towers.size(),
                map.point_count());
    return 0;
  }

  if (gpgrid->parsed()) {
    const RadioMap map = load_radio_map(fs::path(gp_map));
    const PrecomputedGrid grid = fit_gp_grid(map, gp_points, gp_seed);
    save_gp_grid(grid, fs::path(gp_out));
    std::printf("%zu grid points, %zu tower fields\n", grid.points.size(), grid.towers.size());
    return 0;
  }

  if (locate->parsed()) {
    const RadioMap map = load_map_with_towers(fs::path(locate_map), locate_towers);
    const auto scans = read_trace(fs::path(locate_scans));
    if (scans.empty()) throw DataError(locate_scans + ": no scans");
    const Technique technique = locate_args.parsed();
    const EstimatorParams params = locate_args.params();
    const auto grid = gp_grid_for(technique, map, locate_gp);
    std::optional<CellSenseEstimator> cs;
    std::optional<HybridEstimator> hy;
    std::optional<DeterministicEstimator> det;
    if (technique == Technique::cellsense) cs.emplace(map, params.smoothing);
    if (technique == Technique::hybrid) hy.emplace(map, params.smoothing);
    if (technique == Technique::deterministic) det.emplace(map);

    std::ofstream file;
    if (!locate_out.empty()) file = open_output(fs::path(locate_out));
    std::ostream& out = locate_out.empty() ? std::cout : file;
    const Projection frame = map.projection();
    out << "timestamp,lat,lon\n";
    const std::span<const ScanVector> all(scans);
    for (std::size_t i = 0; i < scans.size(); ++i) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(params.n_samples), i + 1);
      const ScanWindow window(all.subspan(i + 1 - n, n));
      LocationEstimate est;
      switch (technique) {
        case Technique::cellsense: est = cs->locate(window, params.k); break;
        case Technique::hybrid: est = hy->locate(window, params.k); break;
        case Technique::deterministic: est = det->locate(window, params.k); break;
        case Technique::gp: est = gp_locate(*grid, window); break;
        case Technique::cellid: est = cellid_locate(map, window.back()); break;
      }
      const GeoPoint g = frame.unproject(est.location);
      out << format_double(scans[i].timestamp) << ',' << format_double(g.lat) << ','
          << format_double(g.lon) << '\n';
    }
    return 0;
  }

  if (evaluate_cmd->parsed()) {
    const RadioMap map = load_map_with_towers(fs::path(eval_map), eval_towers);
    auto scans = read_trace(fs::path(eval_scans));
    const Technique technique = eval_args.parsed();
    const EstimatorParams params = eval_args.params();
    const auto grid = gp_grid_for(technique, map, eval_gp);
    if (!truth_required) {
      std::erase_if(scans, [](const ScanVector& s) { return !s.truth.has_value(); });
    }
    const EvalReport report =
        evaluate(map, grid ? &*grid : nullptr, scans, technique, params, eval_reps);
    if (eval_report.empty()) {
      write_report_csv(std::cout, std::span(&report, 1));
    } else {
      auto out = open_output(fs::path(eval_report));
      write_report_csv(out, std::span(&report, 1));
    }
    if (!eval_cdf.empty()) {
      auto out = open_output(fs::path(eval_cdf));
      write_cdf_csv(out, report);
    }
    return 0;
  }

  if (sweep->parsed()) {
    if (sweep_preset.empty() && sweep_train.empty()) {
      throw CLI::RequiredError("sweep needs --preset or --train/--test");
    }
    SweepSetup setup;
    setup.technique = sweep_args.parsed();
    setup.params = sweep_args.params();
    Testbed testbed = parse_testbed(sweep_args.testbed);
    if (!sweep_preset.empty()) {
      testbed = parse_testbed(sweep_preset);
      if (!sweep_args.ns || !sweep_args.k) {
        const EstimatorParams d = default_params(setup.technique, testbed);
        if (!sweep_args.ns) setup.params.n_samples = d.n_samples;
        if (!sweep_args.k) setup.params.k = d.k;
      }
      Dataset data = generate_dataset(make_preset(sweep_preset, sweep_seed), sweep_seed);
      setup.training = std::move(data.training);
      setup.test = std::move(data.test);
      setup.tower_locations = std::move(data.tower_locations);
    } else {
      setup.training = read_trace(fs::path(sweep_train));
      setup.test = read_trace(fs::path(sweep_test));
      if (!sweep_towers_path.empty()) {
        setup.tower_locations = read_tower_locations(fs::path(sweep_towers_path));
      }
    }
    setup.grid_length = sweep_grid.value_or(default_grid_length(setup.technique, testbed));
    setup.seed = sweep_seed;
    setup.timing_repetitions = sweep_reps;

    std::vector<EvalReport> reports;
    if (sweep_param == "grid") {
      reports = sweep_grid_length(setup, parse_doubles(sweep_values));
    } else if (sweep_param == "ns") {
      reports = sweep_ns(setup, parse_ints(sweep_values));
    } else if (sweep_param == "k") {
      reports = sweep_k(setup, parse_ints(sweep_values));
    } else if (sweep_param == "towers") {
      reports = sweep_towers(setup, parse_doubles(sweep_values));
    } else {
      reports = sweep_density(setup, parse_doubles(sweep_values));
    }
    if (sweep_report.empty()) {
      write_report_csv(std::cout, reports);
    } else {
      auto out = open_output(fs::path(sweep_report));
      write_report_csv(out, reports);
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
