#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "umsa/lattice.hpp"
#include "umsa/model.hpp"
#include "umsa/rng.hpp"
#include "umsa/smc.hpp"

namespace umsa {

/// gamma_n = gamma0 (n + n0)^{-kappa}, n >= 1. Coordinate j moves with
/// gain gains[j] * gamma_n; an empty `gains` means 1 everywhere.
struct StepSchedule {
  double gamma0 = 3e-4;
  double n0 = 10.0;
  double kappa = 0.7;
  std::vector<double> gains;

  /// Throws ConfigError unless gamma0 > 0, n0 >= 0, kappa in (1/2, 1] and
  /// every gain is positive.
  void validate() const;
  double operator()(std::size_t n) const;
  double gain(std::size_t j) const { return gains.empty() ? 1.0 : gains[j]; }
};

struct CostCounters {
  std::uint64_t gaussian_draws = 0;
  std::uint64_t density_evaluations = 0;

  CostCounters& operator+=(const CostCounters& other) {
    gaussian_draws += other.gaussian_draws;
    density_evaluations += other.density_evaluations;
    return *this;
  }
};

/// theta_j <- theta_j + gamma_j score_j with gamma_j = gamma * gains[j].
/// Strictly positive coordinates move in log-coordinates:
/// theta_j <- theta_j exp(gamma_j theta_j score_j).
/// Throws ConstraintError if the result is not admissible.
void apply_update(ParameterVector& theta, double gamma, std::span<const double> score,
                  std::span<const double> gains = {});

/// Called after every update with the iteration number n >= 1, the new
/// iterate and gamma_n.
using IterationObserver =
    std::function<void(std::size_t n, const ParameterVector& theta, double gamma)>;

struct MsaOptions {
  int level = 0;
  std::size_t iterations = 1;
  std::size_t particles = 50;
  StepSchedule schedule;
  IterationObserver observer;
};

/// Iterates theta_0, ..., theta_n stored row-major.
class ThetaTrajectory {
 public:
  ThetaTrajectory() = default;
  explicit ThetaTrajectory(std::size_t dim) : dim_(dim) {}

  void push(std::span<const double> theta) { values_.insert(values_.end(), theta.begin(), theta.end()); }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ ? values_.size() / dim_ : 0; }
  std::span<const double> operator[](std::size_t n) const {
    return std::span<const double>(values_).subspan(n * dim_, dim_);
  }
  std::span<const double> back() const { return (*this)[size() - 1]; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct MsaResult {
  ThetaTrajectory theta;
  LatticePath path;  // X_n after the last iteration
  CostCounters cost;
  std::size_t resets = 0;  // reprojection mode only
};

struct CoupledMsaResult {
  ThetaTrajectory fine;
  ThetaTrajectory coarse;
  CoupledPathPair path;
  CostCounters cost;
};

/// Single-level Markovian stochastic approximation: X_n ~ K_{theta_{n-1},l}
/// via one CPF sweep, then an ascent step along H_l(theta_{n-1}, X_n).
/// The initial path is drawn from nu at theta0.
MsaResult msa_run(const SdeModel& model, const ObservationRecord& obs,
                  const ParameterVector& theta0, const MsaOptions& options, RngStream& rng);

/// Two parameter recursions at levels l and l-1 driven by one CCPF chain.
/// The observer, if set, sees the fine iterate.
CoupledMsaResult msa_run_coupled(const SdeModel& model, const ObservationRecord& obs,
                                 const ParameterVector& theta0, const MsaOptions& options,
                                 RngStream& rng);

/// Axis-aligned box [lower, upper].
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(std::span<const double> theta) const;
};

/// Settings of the reprojection safeguard: eps_n = eps_scale gamma_n^eps_exponent
/// and Theta_n = base widened on each side by growth * log(1 + n) times its width.
struct ReprojectionSettings {
  double eps_scale = 10.0;
  double eps_exponent = 0.5;
  Box base;
  double growth = 1.0;

  double epsilon(const StepSchedule& schedule, std::size_t n) const;
  Box compact(std::size_t n) const;
};

/// Stochastic approximation with reprojections: the proposed iterate is kept
/// only if it moved by less than eps_n and lies in Theta_{n}; otherwise theta
/// is reset to theta0 (the path X_n is kept). Reset events are counted.
MsaResult msa_run_reprojected(const SdeModel& model, const ObservationRecord& obs,
                              const ParameterVector& theta0, const MsaOptions& options,
                              const ReprojectionSettings& reprojection, RngStream& rng);

}  // namespace umsa
