#pragma once

#include "detbound/fisher.hpp"
#include "detbound/montecarlo.hpp"
#include "detbound/models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace detbound {

// Spec file problems; the message names the line or field at fault.
class SpecError : public Error {
 public:
  using Error::Error;
};

enum class OutputFormat { csv, json };

OutputFormat parse_format(const std::string& s);

// {"name": "...", "fixed": {...}, "theta": [...], "label": "..."}
struct ModelSpec {
  std::string name;
  Fixed fixed;
  std::vector<double> theta;
  std::string label;
};

ModelSpec parse_model_spec(const std::string& text);
ModelSpec load_model_spec(const std::string& path);
// Named models plus "random" (fixed keys d, m, seed).
DetectorModel build_model(const ModelSpec& spec);

// {"model": {...}, "theta_true": x, "probes": {...} or [...], "shots": N, "resamples": R, "seed": s}
ExperimentConfig parse_experiment(const std::string& text);
ExperimentConfig load_experiment(const std::string& path);

// "start:stop:count" per parameter, joined by ';' for a Cartesian grid.
std::vector<RVec> parse_grid(const std::string& grid, int params);
std::vector<double> parse_csv_numbers(const std::string& text);

struct BoundReport {
  std::string model;
  int param = 0;
  RVec theta;
  double cfi_max = 0;
  double j_trace = 0;
  double j_spectral = 0;
  double j_ext = 0;
  bool attainable = false;
  bool real_traces = false;
  bool common_eigvec = false;
  bool top_q = false;
  bool diagonal = false;
  bool ordering_ok = false;
  bool cfi_converged = false;
  Vec probe;
  double probe_polar = 0;
  double probe_azimuth = 0;
};

BoundReport compute_bound_report(const DetectorModel& model, const RVec& theta, int k,
                                 const CfiMaxOptions& opts = {});

struct MultiParamReport {
  double qcrb_trace = 0;
  double qcrb_spectral = 0;
  double gill_massar = 0;
  double ccrb_star = 0;
  double sequential = 0;
  double total_qfi = 0;
};

MultiParamReport compute_multiparam_report(const DetectorModel& model, const RVec& theta);

// Bloch angles of a qubit state vector, polar folded into [0, pi].
std::pair<double, double> bloch_angles(const Vec& psi);

struct RunManifest {
  std::string command;
  std::vector<std::string> models;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_time = 0;

  std::string line() const;
};

struct ItemFailure {
  std::string item;
  std::string error;
};

struct CommandResult {
  std::string body;
  std::string summary;  // bench only
  std::vector<ItemFailure> failures;
  RunManifest manifest;
};

std::string failures_json(const std::vector<ItemFailure>& failures);

// Rounds to 9 significant digits, the precision of every emitted number.
double round9(double x);
std::string fmt9(double x);

struct CommandOptions {
  OutputFormat format = OutputFormat::csv;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::vector<std::string> outputs;
};

CommandResult cmd_bounds(const ModelSpec& spec, const std::optional<RVec>& theta, const CommandOptions& opts);
CommandResult cmd_sweep(const ModelSpec& spec, const std::string& grid, const CommandOptions& opts);
CommandResult cmd_simulate(const ExperimentConfig& cfg, const std::string& label, const CommandOptions& opts);
CommandResult cmd_bench(int count, int d, int m, bool with_cfi, const CommandOptions& opts);
CommandResult cmd_multicopy(const ModelSpec& spec, int n_max, const CommandOptions& opts);

}  // namespace detbound
