#include "detbound/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw detbound::SpecError("cannot write '" + path + "'");
  out << text;
}

int finish(const detbound::CommandResult& res) {
  if (res.failures.empty()) return 0;
  std::cerr << detbound::failures_json(res.failures) << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detector quantum Fisher information bounds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DETBOUND_VERSION);

  std::string model_path, theta_csv, grid, out_path, format = "csv", summary_path;
  std::uint64_t seed = 1;
  int jobs = 1, count = 1000, dim = 2, outcomes = 2, copies = 4;
  bool with_cfi = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "Output path (stdout if omitted)");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Master seed");
  };

  auto* bounds = app.add_subcommand("bounds", "Bounds at one parameter point");
  bounds->add_option("--model", model_path, "Model spec file")->required();
  bounds->add_option("--theta", theta_csv, "Parameter point, comma separated");
  common(bounds);

  auto* sweep = app.add_subcommand("sweep", "Bounds over a parameter grid");
  sweep->add_option("--model", model_path, "Model spec file")->required();
  sweep->add_option("--grid", grid, "start:stop:count per parameter, ';' separated");
  common(sweep);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimation experiment");
  simulate->add_option("--model,--config", model_path, "Experiment config file")->required();
  common(simulate);

  auto* bench = app.add_subcommand("bench", "Random-model benchmark");
  bench->add_option("--count", count, "Number of models")->check(CLI::PositiveNumber);
  bench->add_option("--d", dim, "Hilbert space dimension");
  bench->add_option("--m", outcomes, "Number of outcomes");
  bench->add_flag("--cfi", with_cfi, "Also optimise the CFI over probes");
  bench->add_option("--summary", summary_path, "Summary JSON path (stderr if omitted)");
  common(bench);

  auto* multicopy = app.add_subcommand("multicopy", "DQFI of n copies probed jointly");
  multicopy->add_option("--model", model_path, "Model spec file")->required();
  multicopy->add_option("--n", copies, "Largest copy count")->check(CLI::PositiveNumber);
  common(multicopy);

  CLI11_PARSE(app, argc, argv);

  try {
    detbound::CommandOptions opts;
    opts.format = detbound::parse_format(format);
    opts.seed = seed;
    opts.jobs = jobs;
    if (!out_path.empty()) opts.outputs.push_back(out_path);

    detbound::CommandResult res;
    if (bounds->parsed()) {
      detbound::ModelSpec spec = detbound::load_model_spec(model_path);
      std::optional<detbound::RVec> theta;
      if (!theta_csv.empty()) {
        auto v = detbound::parse_csv_numbers(theta_csv);
        theta = detbound::RVec::Map(v.data(), Eigen::Index(v.size()));
      }
      res = detbound::cmd_bounds(spec, theta, opts);
    } else if (sweep->parsed()) {
      res = detbound::cmd_sweep(detbound::load_model_spec(model_path), grid, opts);
    } else if (simulate->parsed()) {
      detbound::ExperimentConfig cfg = detbound::load_experiment(model_path);
      if (simulate->count("--seed")) cfg.seed = seed;
      res = detbound::cmd_simulate(cfg, model_path, opts);
    } else if (bench->parsed()) {
      if (!summary_path.empty()) opts.outputs.push_back(summary_path);
      res = detbound::cmd_bench(count, dim, outcomes, with_cfi, opts);
      if (summary_path.empty()) {
        std::cerr << res.summary;
      } else {
        emit(res.summary, summary_path);
      }
    } else if (multicopy->parsed()) {
      res = detbound::cmd_multicopy(detbound::load_model_spec(model_path), copies, opts);
    }
    emit(res.body, out_path);
    return finish(res);
  } catch (const detbound::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
