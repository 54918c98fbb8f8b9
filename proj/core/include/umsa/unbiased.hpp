#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "umsa/model.hpp"
#include "umsa/rng.hpp"
#include "umsa/sa.hpp"

namespace umsa {

struct RandomizationSettings {
  int l_min = 3;
  int l_max = 12;
  int p_min = 1;
  int p_max = 12;
  std::size_t n0 = 10;  // N_p = n0 2^p
};

/// The joint law of (l, p): P_L(l) proportional to 2^{-1.5 l} on
/// {l_min..l_max}; P(p | l) proportional to 2^{5-p} on {p_min..min(5, l_max-l)}
/// and to 2^{-p} p (log2 p)^2 on {6..p_max}.
class RandomizationLaw {
 public:
  explicit RandomizationLaw(const RandomizationSettings& settings);

  const RandomizationSettings& settings() const { return settings_; }

  double level_mass(int l) const;
  double iteration_mass(int p, int l) const;
  const std::vector<int>& iteration_support(int l) const;
  /// Largest support point below p at level l; empty for the smallest one.
  std::optional<int> previous_support(int p, int l) const;
  std::size_t iterations(int p) const { return settings_.n0 << p; }

  std::pair<int, int> sample(RngStream& rng) const;

 private:
  RandomizationSettings settings_;
  Pmf level_pmf_;
  std::vector<std::vector<int>> supports_;
  std::vector<Pmf> iteration_pmfs_;
};

struct UmsaOptions {
  StepSchedule schedule;
  std::size_t particles = 50;
  /// Records with any |contribution_j| above this are flagged (never dropped).
  double heavy_tail_threshold = 1e6;
  /// Sees every SA iterate of every replicate (fine level for coupled runs).
  /// umsa_estimate may call it from several threads at once.
  IterationObserver observer;
};

/// One replicate of the single-term estimator.
struct EstimatorRecord {
  std::uint64_t replicate = 0;
  std::uint64_t seed = 0;
  int level = 0;
  int p = 0;
  std::size_t iterations = 0;           // N_p
  std::size_t previous_iterations = 0;  // N at the previous support point, 0 at the base
  double level_mass = 0.0;
  double iteration_mass = 0.0;
  std::vector<double> contribution;  // already divided by P_L(l) P(p | l)
  CostCounters cost;
  bool aborted = false;
  std::string abort_reason;
  bool heavy_tail = false;
  double wall_seconds = 0.0;
};

/// Telescoping difference read from SA trajectories, divided by `mass`.
/// With `coarse` empty this is theta_n - theta_prev (or theta_n when prev
/// is empty); otherwise (fine_n - coarse_n) - (fine_prev - coarse_prev).
std::vector<double> contribution_from_trajectories(const ThetaTrajectory& fine,
                                                   const ThetaTrajectory* coarse, std::size_t n,
                                                   std::optional<std::size_t> previous,
                                                   double mass);

/// Samples (l, p) and runs single-level MSA (l = l_min) or coupled MSA
/// (l > l_min) for N_p iterations. Numeric and constraint failures mark the
/// record aborted instead of propagating.
EstimatorRecord umsa_single(const SdeModel& model, const ObservationRecord& obs,
                            const RandomizationLaw& law, const ParameterVector& theta0,
                            const UmsaOptions& options, RngStream& rng);

struct UmsaEstimate {
  std::vector<double> theta;  // mean over completed replicates
  std::vector<EstimatorRecord> records;
  std::size_t aborted = 0;
  bool partial = false;
};

/// M replicates, replicate i on RngStream(seed, i), run on `threads` workers
/// and averaged in replicate order. The result does not depend on `threads`.
UmsaEstimate umsa_estimate(const SdeModel& model, const ObservationRecord& obs,
                           const RandomizationLaw& law, const ParameterVector& theta0,
                           const UmsaOptions& options, std::size_t replicates,
                           std::uint64_t seed, std::size_t threads = 1);

}  // namespace umsa
