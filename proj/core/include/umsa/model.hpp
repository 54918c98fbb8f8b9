#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "umsa/rng.hpp"

namespace umsa {

enum class Constraint { kUnbounded, kPositive };

/// A point in the parameter space together with per-coordinate constraints.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(std::vector<double> values, std::vector<Constraint> constraints);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  /// True when every coordinate is finite and positive coordinates are > 0.
  bool satisfies_constraints() const;
  /// Throws ConstraintError when satisfies_constraints() is false.
  void validate() const;

  std::string to_string() const;

 private:
  std::vector<double> values_;
  std::vector<Constraint> constraints_;
};

/// A partially observed diffusion dX = a_theta(X) dt + sigma(X) dW with
/// X_0 ~ mu_theta and conditionally independent observations Y ~ g_theta(X, .).
///
/// States are passed as spans of length state_dim(); matrices are row-major.
/// Implementations are immutable and safe to share between threads.
class SdeModel {
 public:
  virtual ~SdeModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::vector<Constraint> constraints() const = 0;

  /// Throws ConstraintError when theta is not admissible for this model.
  virtual void check_parameters(const ParameterVector& theta) const;

  virtual void drift(std::span<const double> theta, std::span<const double> x,
                     std::span<double> out) const = 0;
  /// d x d_theta Jacobian of the drift with respect to theta.
  virtual void drift_gradient(std::span<const double> theta, std::span<const double> x,
                              std::span<double> out) const = 0;
  /// d x d diffusion matrix sigma(x).
  virtual void diffusion(std::span<const double> x, std::span<double> out) const = 0;
  /// When true, diffusion() ignores x and callers may cache it.
  virtual bool constant_diffusion() const { return false; }

  /// True when mu_theta is a Dirac mass; log densities are then taken
  /// relative to it (identically zero).
  virtual bool initial_is_point_mass() const { return false; }
  virtual double log_initial_density(std::span<const double> theta,
                                     std::span<const double> x) const = 0;
  virtual void grad_log_initial_density(std::span<const double> theta, std::span<const double> x,
                                        std::span<double> out) const = 0;
  virtual void sample_initial(std::span<const double> theta, RngStream& rng,
                              std::span<double> out) const = 0;

  virtual double log_obs_density(std::span<const double> theta, std::span<const double> x,
                                 std::span<const double> y) const = 0;
  virtual void grad_log_obs_density(std::span<const double> theta, std::span<const double> x,
                                    std::span<const double> y, std::span<double> out) const = 0;
  virtual void sample_observation(std::span<const double> theta, std::span<const double> x,
                                  RngStream& rng, std::span<double> out) const = 0;

  /// Convenience: a ParameterVector carrying this model's constraints.
  ParameterVector make_parameters(std::vector<double> values) const;
};

/// Observation times t_1 < ... < t_P with values in R^{d_y}. `origin` is the
/// time of the initial state U_0 (0 for the OU experiment, t_1 for the
/// kangaroo data).
struct ObservationRecord {
  double origin = 0.0;
  std::vector<double> times;
  std::size_t obs_dim = 1;
  std::vector<double> values;  // P x obs_dim, row-major; NaN marks a missing value

  std::size_t size() const { return times.size(); }
  std::span<const double> value(std::size_t i) const {
    return std::span<const double>(values).subspan(i * obs_dim, obs_dim);
  }
  /// True when any coordinate of observation i is NaN; such observations
  /// carry no likelihood information.
  bool missing(std::size_t i) const;
  /// Throws ConfigError on empty, unsorted or mis-sized records.
  void validate() const;
};

/// Lattice indices of the observations at one discretisation level.
struct ObservationGrid {
  int level = 0;
  std::vector<std::size_t> index;

  std::size_t steps() const { return index.empty() ? 0 : index.back(); }
  std::size_t size() const { return index.size(); }
};

/// Rounds each time to the nearest point t1 + k 2^{-l} and returns the k's.
/// Throws CollisionError when two times share a lattice point.
std::vector<std::size_t> align_observation_times(std::span<const double> times, int level,
                                                 double t1);

/// Aligns a record at `level`; also requires the last index to be positive.
ObservationGrid align_observations(const ObservationRecord& obs, int level);

/// Lattice step 2^{-level}.
inline double lattice_step(int level) { return 1.0 / static_cast<double>(1ULL << level); }

}  // namespace umsa
