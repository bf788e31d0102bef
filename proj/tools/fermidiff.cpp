// fermidiff: run packaged or user-defined simulation scenarios and write
// CSV time series plus a plain-text manifest of run metadata.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdiff/common.hpp"
#include "fdiff/scenario.hpp"

namespace fs = std::filesystem;

namespace {

void write_outputs(const fdiff::RunResult& result, const fs::path& out_dir,
                   const std::string& stem) {
  fs::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / (stem + ".csv"));
    if (!csv) throw fdiff::ConfigError("cannot write to " + out_dir.string());
    fdiff::write_csv(result, csv);
  }
  {
    std::ofstream man(out_dir / (stem + ".manifest"));
    fdiff::write_manifest(result, man);
  }
}

std::vector<double> parse_values(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    // a:b:step expands to an inclusive range
    std::size_t c1 = item.find(':');
    if (c1 != std::string::npos) {
      std::size_t c2 = item.find(':', c1 + 1);
      if (c2 == std::string::npos)
        throw fdiff::ConfigError("range needs start:stop:step, got " + item);
      double a = std::stod(item.substr(0, c1));
      double b = std::stod(item.substr(c1 + 1, c2 - c1 - 1));
      double h = std::stod(item.substr(c2 + 1));
      if (h <= 0) throw fdiff::ConfigError("range step must be > 0");
      for (double v = a; v <= b + 1e-12 * std::abs(h); v += h)
        out.push_back(v);
    } else {
      out.push_back(std::stod(item));
    }
  }
  return out;
}

std::string value_tag(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  std::string s = buf;
  for (char& c : s)
    if (c == '.' || c == '-' || c == '+') c = '_';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fermidiff: quantum dynamics of degenerate fermions diffracted by "
      "quantized light"};
  app.require_subcommand(1);

  std::string scenario_name, out_dir = ".", axis, values_spec;
  int threads = 1;
  double tol_override = -1.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_name,
                    "packaged scenario name or path to a scenario file")
        ->required();
    cmd->add_option("--out", out_dir, "output directory (default: .)");
    cmd->add_option("--tol", tol_override,
                    "integration tolerance override, in [1e-12, 1e-6]");
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario");
  add_common(run);

  CLI::App* sweep =
      app.add_subcommand("sweep", "run a scenario over a parameter axis");
  add_common(sweep);
  sweep->add_option("--axis", axis, "numeric scenario key to vary")
      ->required();
  sweep
      ->add_option("--values", values_spec,
                   "comma list and/or start:stop:step ranges")
      ->required();
  sweep->add_option("--threads", threads, "parallel sweep workers")
      ->check(CLI::Range(1, 64));

  CLI::App* list = app.add_subcommand("list", "list packaged scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& name : fdiff::packaged_scenario_names())
        std::cout << name << "\n";
      return 0;
    }

    fdiff::Scenario sc = fdiff::load_scenario(scenario_name);
    fdiff::apply_env_overrides(sc);  // FC_* variables
    if (tol_override > 0) {
      sc.tol = tol_override;
      sc.validate();
    }

    if (run->parsed()) {
      fdiff::RunResult result = fdiff::run_scenario(sc);
      write_outputs(result, out_dir, sc.name);
      for (const auto& [k, v] : result.manifest)
        if (k == "warning") std::cerr << "warning: " << v << "\n";
      std::cout << "wrote " << (fs::path(out_dir) / (sc.name + ".csv")).string()
                << " (" << result.rows.size() << " rows)\n";
      return 0;
    }

    // sweep
    std::vector<double> values = parse_values(values_spec);
    fdiff::SweepResult sw = fdiff::sweep_scenario(sc, axis, values, threads);
    for (const auto& [v, r] : sw.runs)
      write_outputs(r, out_dir, sc.name + "_" + axis + "_" + value_tag(v));
    write_outputs(sw.aggregate, out_dir, sc.name + "_sweep");
    std::cout << "wrote "
              << (fs::path(out_dir) / (sc.name + "_sweep.csv")).string()
              << " (" << sw.runs.size() << " sweep points)\n";
    return 0;
  } catch (const fdiff::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const fdiff::SolverMismatchError& e) {
    std::cerr << "solver mismatch: " << e.what() << "\n";
    return 3;
  } catch (const fdiff::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
}
