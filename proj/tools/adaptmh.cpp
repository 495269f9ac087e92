// adaptmh: run adaptive Metropolis-Hastings benchmark experiments.
//
//   adaptmh run experiment.cfg --out results --jobs 4
//   adaptmh preset fig1-bimodal --seed 7 --set run.iterations=50000
//   adaptmh presets

#include "adaptmh.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

struct Common {
  std::string out = "adaptmh_out";
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::vector<std::string> overrides;
  std::string timing = "on";
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed (overrides run.seed)");
  cmd->add_option("--jobs", c.jobs, "Samplers run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--set", c.overrides, "Override a setting, key=value (repeatable)");
  cmd->add_option("--timing", c.timing, "Record wall-clock timing in reports (on|off)")
      ->capture_default_str()
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_flag("-q,--quiet", c.quiet, "Suppress the per-sampler summary");
}

int execute(adaptmh::ExperimentSpec spec, const Common& c) {
  for (const auto& kv : c.overrides) spec.settings.apply_override(kv);
  adaptmh::RunOptions opts;
  opts.out_dir = c.out;
  opts.seed = c.seed;
  opts.jobs = c.jobs;
  opts.timing = c.timing == "on";
  opts.quiet = c.quiet;
  return adaptmh::run_experiment(spec, opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Metropolis-Hastings samplers and benchmark runner"};
  app.require_subcommand(1);

  Common run_opts;
  std::string spec_file;
  auto* run = app.add_subcommand("run", "Run an experiment described by a settings file");
  run->add_option("spec", spec_file, "Settings file (key = value lines)")->required()->check(CLI::ExistingFile);
  add_common(run, run_opts);

  Common preset_opts;
  std::string preset_name;
  auto* preset = app.add_subcommand("preset", "Run a built-in experiment");
  preset->add_option("name", preset_name, "Preset name (see `adaptmh presets`)")->required();
  add_common(preset, preset_opts);

  auto* list = app.add_subcommand("presets", "List built-in experiments and their settings");
  bool verbose = false;
  list->add_flag("-v,--verbose", verbose, "Print each preset's settings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::ifstream in(spec_file);
      adaptmh::ExperimentSpec spec;
      spec.name = std::filesystem::path(spec_file).stem().string();
      spec.settings = adaptmh::Settings::parse(in, spec_file);
      spec.base_dir = std::filesystem::path(spec_file).parent_path();
      return execute(std::move(spec), run_opts);
    }
    if (*preset) {
      auto spec = adaptmh::find_preset(preset_name);
      if (!spec) {
        std::cerr << "error: unknown preset '" << preset_name << "'\n";
        return 64;
      }
      return execute(std::move(*spec), preset_opts);
    }
    for (const auto& e : adaptmh::builtin_experiments()) {
      std::cout << e.name << "\n";
      if (verbose) {
        for (const auto& [k, v] : e.settings.all()) std::cout << "  " << k << " = " << v << "\n";
      }
    }
    return 0;
  } catch (const adaptmh::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 64;
  } catch (const adaptmh::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 65;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
