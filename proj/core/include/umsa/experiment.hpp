#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "umsa/model.hpp"
#include "umsa/unbiased.hpp"

namespace umsa {

/// Everything needed to reproduce a run. Serialised as JSON; every field has
/// a default so a config file only lists what it changes.
struct ExperimentConfig {
  std::string model = "ou";  // "ou" or "kangaroo"

  // OU constants.
  double sigma = 0.4;
  double obs_sd = 1.0;
  double x0 = 100.0;
  int horizon = 10;  // observations at t = 1..horizon

  // Observation source: a CSV path, or synthetic data drawn at theta_true.
  std::string observations_csv;
  std::vector<double> theta_true{0.5};
  std::uint64_t data_seed = 1;
  int data_level = 12;
  // Kangaroo synthetic data: first time, spacing range and count.
  double first_time = 1.0;
  double min_spacing = 0.15;
  double max_spacing = 0.45;
  std::size_t observation_count = 41;
  std::optional<double> initial_state;  // overrides the draw from mu at data generation

  RandomizationSettings law;
  StepSchedule schedule;
  std::size_t particles = 50;
  std::vector<double> theta0{1.0};
  double heavy_tail_threshold = 1e6;

  std::size_t estimate_replicates = 64;
  std::vector<std::size_t> replicates{8, 16, 32, 64, 128, 256, 512};
  std::size_t repetitions = 100;

  // MSE reference: "kalman" (OU level-`reference_level` MLE), "self" (a
  // separate run with reference_replicates) or "fixed" (reference_theta).
  std::string reference = "kalman";
  int reference_level = 12;
  std::size_t reference_replicates = 4096;
  std::vector<double> reference_theta;

  std::uint64_t seed = 20240601;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::string output_dir = "out";

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  std::size_t resolved_threads() const;
};

/// Named presets: "ou_desk", "ou_paper", "kangaroo_desk".
ExperimentConfig preset(const std::string& name);

/// Reads a config file. A run manifest (with a "config" member) is accepted
/// too, so any output directory can be replayed. Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config, int indent = 2);
ExperimentConfig config_from_json(const std::string& text);

std::unique_ptr<SdeModel> make_model(const ExperimentConfig& config);
ParameterVector initial_theta(const ExperimentConfig& config, const SdeModel& model);
UmsaOptions umsa_options(const ExperimentConfig& config);

/// Observation times of the configured experiment (before data is drawn).
ObservationRecord observation_layout(const ExperimentConfig& config);

/// Simulates the model at `level` through the record's times starting from
/// `origin`, then draws each observation from g. Values of `layout` are ignored.
ObservationRecord generate_synthetic_observations(const SdeModel& model,
                                                  const ParameterVector& theta_true,
                                                  const ObservationRecord& layout, int level,
                                                  std::uint64_t seed,
                                                  std::optional<double> initial_state = {});

/// The config's observations: the CSV if given, otherwise synthetic data.
ObservationRecord load_observations(const ExperimentConfig& config, const SdeModel& model);

/// CSV with a header row; first column time, then one column per coordinate.
/// Numbers are written with 17 significant digits.
void write_observations_csv(const std::filesystem::path& path, const ObservationRecord& obs);
ObservationRecord read_observations_csv(const std::filesystem::path& path, double origin,
                                        std::size_t obs_dim);

/// "%.17g" formatting.
std::string format_double(double value);

struct ExperimentOutcome {
  std::vector<double> estimate;  // estimate mode
  std::vector<double> reference;
  struct Row {
    std::size_t replicates = 0;
    std::vector<double> mse;  // per coordinate
    double mse_total = 0.0;
    CostCounters cost;
    std::size_t aborted = 0;
  };
  std::vector<Row> summary;  // mse mode
  std::size_t aborted = 0;
  bool partial = false;
};

/// One UMSA estimate with estimate_replicates replicates. Writes
/// replicates.csv, estimate.csv and manifest.json to output_dir. When
/// trace_path is set, replicate 0 is replayed with a per-iteration trace.
ExperimentOutcome run_estimate(const ExperimentConfig& config,
                               const std::optional<std::filesystem::path>& trace_path = {});

/// The MSE study: `repetitions` independent runs of max(replicates)
/// replicates each; the estimate for M uses the first M. Writes
/// replicates.csv, summary.csv and manifest.json to output_dir.
ExperimentOutcome run_mse(const ExperimentConfig& config);

/// Kalman MLE at every level of the law plus the reference level (OU only).
/// Writes oracle.csv to output_dir.
std::vector<std::pair<int, double>> run_oracle(const ExperimentConfig& config);

/// Writes the configured observations to output_dir/observations.csv.
ObservationRecord run_simulate(const ExperimentConfig& config);

}  // namespace umsa
