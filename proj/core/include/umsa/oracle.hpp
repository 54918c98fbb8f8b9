#pragma once

#include <vector>

#include "umsa/lattice.hpp"
#include "umsa/model.hpp"
#include "umsa/models.hpp"
#include "umsa/rng.hpp"

namespace umsa {

/// The level-l Euler discretisation of the OU model as a scalar
/// linear-Gaussian state space model. Between lattice points
///   X_{k+1} = (1 - theta dt) X_k + N(0, sigma^2 dt),  dt = 2^{-level},
/// observations Y = X + N(0, varsigma^2) and X_0 = x0. NaN observations
/// are treated as missing.
struct LinearGaussianSpec {
  double sigma = 0.4;
  double obs_sd = 1.0;
  double x0 = 100.0;
  int level = 0;

  static LinearGaussianSpec from_model(const OuModel& model, int level) {
    return {model.sigma(), model.obs_sd(), model.x0(), level};
  }

  /// Coefficient and variance of n lattice steps at once.
  double transition(double theta, std::size_t n) const;
  double transition_variance(double theta, std::size_t n) const;
};

struct LogLikelihood {
  double value = 0.0;
  double gradient = 0.0;  // d/dtheta
};

/// Exact log p_theta^l(y_{1:P}) and its derivative via the Kalman filter and
/// its tangent recursion.
LogLikelihood kalman_loglik_grad(const LinearGaussianSpec& spec, const ObservationRecord& obs,
                                 double theta);

struct SmootherMoments {
  std::vector<double> filter_mean;
  std::vector<double> filter_variance;
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Filtering and smoothing moments of X at each observation time.
SmootherMoments kalman_smoother_moments(const LinearGaussianSpec& spec,
                                        const ObservationRecord& obs, double theta);

/// Root of the log-likelihood gradient, searched on [lower, upper] after a
/// coarse scan for the sign change from + to -.
double kalman_mle(const LinearGaussianSpec& spec, const ObservationRecord& obs,
                  double lower = -2.0, double upper = 10.0);

/// One exact draw from the level-l smoothing distribution of the whole
/// lattice path (forward filter, backward sampling).
LatticePath sample_posterior_path(const LinearGaussianSpec& spec, const ObservationRecord& obs,
                                  double theta, RngStream& rng);

}  // namespace umsa
