#pragma once

#include "raviucb/linmix.hpp"
#include "raviucb/planner.hpp"
#include "raviucb/validation.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace raviucb {

/// Parsed experiment description. Exactly one of `tabular` / `mixture` is
/// set, and it matches the declared backend.
struct ExperimentConfig {
  std::string backend;  // "tabular" | "linmix"
  long T = 0;
  std::vector<std::uint64_t> seeds;
  std::optional<double> eta;
  std::optional<double> beta;
  std::optional<double> reg_lambda;
  std::optional<double> delta;
  std::string out_dir = "raviucb_out";
  std::optional<TabularMdp> tabular;
  std::optional<LinearMixtureMdp> mixture;

  const TabularMdp& env() const { return mixture ? mixture->base() : *tabular; }
};

/// Effective run parameters after filling defaults: eta from the standard
/// rate, delta = 1/T, lambda = 1, and beta from the backend's coefficient.
struct ResolvedParams {
  double eta = 0.0;
  double beta = 0.0;
  double reg_lambda = 0.0;
  double delta = 0.0;
  double H = 0.0;
};

ResolvedParams resolve_params(const ExperimentConfig& config, long T);

/// Loads and validates a JSON experiment config. The `mdp` key may be an
/// inline object or a path relative to the config file.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

struct MetricsRow {
  std::uint64_t seed = 0;
  long T = 0;
  double regret = 0.0;
  double mean_epoch_len = 0.0;
  long K = 0;
  long validity_violations = 0;
  double seconds = 0.0;
};

/// Executes one seeded run of the configured experiment in memory.
RunLog execute_run(const ExperimentConfig& config, long T, std::uint64_t seed);

/// One run per seed; persists per-seed traces, per-epoch sidecars, the
/// resolved config and the instance under config.out_dir, and returns the
/// metrics table (also written as metrics.csv).
std::vector<MetricsRow> run_experiment(const ExperimentConfig& config);

struct SweepRow {
  long T = 0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  std::optional<double> slope;  // least-squares slope over the rows so far
};

/// Regret curve over a horizon grid; writes sweep.csv under out_dir.
std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::vector<long>& T_values);

/// Persistence of run traces: steps.csv plus the per-epoch JSON sidecar.
void save_run_log(const std::filesystem::path& dir, const RunLog& log);
RunLog load_run_log(const std::filesystem::path& dir);

/// Runs the recorded-artifact validation suite over every seed directory of
/// a run produced by run_experiment; writes checks.json into the directory.
std::vector<CheckReport> validate_run_dir(const std::filesystem::path& dir, int trials,
                                          std::uint64_t check_seed);

/// Reference desk instances (also emitted by the gen-mdp subcommand).
TabularMdp reference_tabular_mdp();
LinearMixtureMdp reference_mixture_mdp();

/// Command-line entry point: subcommands run / sweep / validate / gen-mdp.
/// Returns 0 on success (and only if all requested checks pass), 1 on
/// runtime failure, 2 on usage errors.
int cli_main(int argc, const char* const* argv);

}  // namespace raviucb
