#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "crsn/matcore.hpp"
#include "crsn/sysmodel.hpp"

namespace crsn {

enum class SchedulerKind { kOpen, kClosed, kRandomOffline, kPeriodicOffline, kAlways, kNever };

const char* to_string(SchedulerKind k);
SchedulerKind scheduler_kind_from_string(const std::string& s);

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::kAlways;
  SymMatrix trigger;     // Y (open) or Z (closed)
  double rate = 0.0;     // target transmission rate of the offline schedules
  std::uint64_t phase = 0;
};

/// Per-path statistic used for the empirical mean covariance.
enum class PathStatistic {
  kEndpoint,     // P- at the final step (independent steady-state samples)
  kTimeAverage,  // mean of P- over steps [burn_in, horizon)
};

struct ExperimentConfig {
  std::string experiment = "simulate";
  LtiSystem plant = LtiSystem(Matrix::Constant(1, 1, 0.8), Matrix::Identity(1, 1), SymMatrix::identity(1),
                              SymMatrix::identity(1));
  double lambda = 0.8;
  SchedulerSpec scheduler;
  int horizon = 2000;
  int paths = 1000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  PathStatistic statistic = PathStatistic::kTimeAverage;
  std::map<std::string, std::vector<double>> sweep;
  std::string output_dir = ".";
  bool parallel = true;
  bool paper_scale = false;

  /// Throws config unless horizon > burn_in >= 0, paths >= 1, lambda in (0, 1]
  /// and the scheduler has what its kind needs.
  void validate() const;
};

/// Reads a config document. Plant matrices sit either under "plant" or at the
/// top level. CRSN_SEED, when set, replaces the seed.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
void apply_env_seed(ExperimentConfig& c);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
/// Hex FNV-1a of the canonical config dump.
std::string config_hash(const ExperimentConfig& c);

// --- Monte Carlo ---------------------------------------------------------------

struct PathStats {
  double trace_p = 0.0;     // chosen statistic of trace(P-)
  double trace_err = 0.0;   // same statistic of |x - xhat-|^2
  SmallMatrix mean_p;       // same statistic of P-
  long transmissions = 0;   // eta = 1 and epsilon = 1, after burn-in
  long sensor_triggers = 0; // epsilon = 1, after burn-in
  long channel_free = 0;    // eta = 1, after burn-in
  long steps = 0;           // horizon - burn_in
  bool failed = false;
};

/// One simulated step, for full traces.
struct StepRecord {
  std::uint64_t step = 0;
  int eta = 0;
  int epsilon = 0;
  double trace_p_prior = 0.0;
  double trace_p_post = 0.0;
  double err_sq = 0.0;
  SmallVector x, x_post;
  SmallMatrix p_prior;
};

/// Plant, channel, scheduler and filter for `horizon` steps with the streams
/// of `path_index`. Numerical failure of the filter flags the path.
PathStats run_path(const ExperimentConfig& c, std::uint64_t path_index, std::vector<StepRecord>* trace = nullptr);

struct MonteCarloSummary {
  double mean_trace_p = 0.0;
  double se_trace_p = 0.0;
  double mean_trace_err = 0.0;
  double se_trace_err = 0.0;
  SymMatrix mean_p;
  double rate = 0.0;          // transmissions / (paths * (horizon - burn_in))
  double sensor_rate = 0.0;   // sensor triggers / (paths * (horizon - burn_in))
  double channel_rate = 0.0;
  long transmissions = 0;
  int paths = 0;              // paths kept
  int failed = 0;
};

/// Reference loop, one path after the other.
MonteCarloSummary run_paths_serial(const ExperimentConfig& c);
/// Paths in parallel, folded in path order; equal to the serial result bit for bit.
MonteCarloSummary run_paths_parallel(const ExperimentConfig& c);
MonteCarloSummary run_paths(const ExperimentConfig& c);

// --- Experiments ---------------------------------------------------------------

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  double at(std::size_t row, const std::string& column) const;
};

struct ExperimentResult {
  std::string experiment;
  std::string hash;
  nlohmann::json config;
  std::vector<Table> tables;

  const Table& table(const std::string& name) const;
};

/// Y = s I with tr(Pi Y) solving the stationary rate formula for `gamma`.
SymMatrix calibrate_open(const LtiSystem& sys, double lambda, double gamma);
/// Z = s I whose empirical closed-loop transmission rate over a probe path of
/// `probe_steps` steps (after 1000 burn-in steps) matches `gamma`.
SymMatrix calibrate_closed(const LtiSystem& sys, double lambda, double gamma, std::uint64_t seed,
                           int probe_steps = 10000);

/// Scalar plant, target rates in sweep "gamma": open, closed, random and
/// periodic schedules with their mean P- and empirical rates.
ExperimentResult experiment_fig3(const ExperimentConfig& c);
/// Trigger sweep ("gamma") with the two open-loop bound traces and the empirical trace.
ExperimentResult experiment_fig4(const ExperimentConfig& c);
/// Quality sweep ("varpi", M = X0 + varpi I): open design and closed B&B design.
ExperimentResult experiment_fig6(const ExperimentConfig& c);
/// Access probability sweep ("lambda") with always-send schedules and the
/// lower bounds X0 and X_p.
ExperimentResult experiment_fig7(const ExperimentConfig& c);
ExperimentResult run_experiment(const ExperimentConfig& c);

/// Desk-scale config of a named experiment; `paper_scale` restores the full
/// run counts.
ExperimentConfig default_config(const std::string& experiment, bool paper_scale = false);

struct OracleReport {
  int histories = 0;
  double max_mean_abs = 0.0;      // |grid mean - filter mean|
  double max_mean_rel = 0.0;      // same, over the filter standard deviation
  double max_variance_rel = 0.0;  // |grid var - filter var| / filter var
  double max_excess_kurtosis = 0.0;
};

/// Random scalar plants, channels and triggers (open and closed loop
/// alternating), each simulated for `steps` steps and filtered both by the
/// closed-form MMSE filter and by the grid oracle.
OracleReport oracle_check(std::uint64_t seed, int steps, int histories);

// --- Output --------------------------------------------------------------------

/// CSV with a "# {json}" first line holding the config and its hash.
std::string to_csv(const Table& t, const nlohmann::json& header);
/// Writes every table to `{experiment}[-{table}]_{hash}.csv` under `dir`;
/// returns the paths written.
std::vector<std::string> write_result(const ExperimentResult& r, const std::string& dir);

// --- CLI -----------------------------------------------------------------------

/// 0 on success, 2 on config errors, 3 on solver failures.
int cli_main(int argc, char** argv);

}  // namespace crsn
