#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "umsa/lattice.hpp"
#include "umsa/model.hpp"
#include "umsa/models.hpp"
#include "umsa/rng.hpp"
#include "umsa/score.hpp"

namespace umsa::testing {

inline double uniform(RngStream& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform();
}

// Relative error with a unit floor so that exact zeros compare absolutely.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

// Central difference of f along coordinate j of theta.
inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::vector<double> theta, std::size_t j, double step = 1e-5) {
  const double t = theta[j];
  theta[j] = t + step;
  const double up = f(theta);
  theta[j] = t - step;
  const double down = f(theta);
  return (up - down) / (2.0 * step);
}

// ---------------------------------------------------------------- model gradients

struct GradientDraw {
  std::vector<double> theta;
  std::vector<double> x;
  std::vector<double> y;
};

/// Worst relative error of the model's analytic gradients (drift, log mu,
/// log g) against central differences over `trials` random draws. A point
/// mass initial law must report a zero gradient; anything else counts as an
/// infinite error.
inline double gradient_contract_error(const SdeModel& model,
                                      const std::function<GradientDraw(RngStream&)>& draw,
                                      int trials = 100, std::uint64_t seed = 7) {
  const std::size_t p = model.param_dim();
  const std::size_t d = model.state_dim();
  RngStream rng(seed, 0);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const GradientDraw z = draw(rng);
    std::vector<double> grad_a(d * p);
    std::vector<double> grad_mu(p);
    std::vector<double> grad_g(p);
    model.drift_gradient(z.theta, z.x, grad_a);
    model.grad_log_initial_density(z.theta, z.x, grad_mu);
    model.grad_log_obs_density(z.theta, z.x, z.y, grad_g);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < d; ++i) {
        const double fd = central_difference(
            [&](std::span<const double> t) {
              std::vector<double> a(d);
              model.drift(t, z.x, a);
              return a[i];
            },
            z.theta, j);
        worst = std::max(worst, relative_error(grad_a[i * p + j], fd));
      }
      if (!model.initial_is_point_mass()) {
        const double fd = central_difference(
            [&](std::span<const double> t) { return model.log_initial_density(t, z.x); }, z.theta,
            j);
        worst = std::max(worst, relative_error(grad_mu[j], fd));
      } else if (grad_mu[j] != 0.0) {
        worst = std::numeric_limits<double>::infinity();
      }
      const double fd = central_difference(
          [&](std::span<const double> t) { return model.log_obs_density(t, z.x, z.y); }, z.theta,
          j);
      worst = std::max(worst, relative_error(grad_g[j], fd));
    }
  }
  return worst;
}

inline GradientDraw ou_gradient_draw(RngStream& rng) {
  GradientDraw z;
  z.theta = {uniform(rng, -1.0, 2.0)};
  z.x = {uniform(rng, 80.0, 120.0)};
  z.y = {z.x[0] + rng.normal()};
  return z;
}

inline GradientDraw kangaroo_gradient_draw(const KangarooModel& model, RngStream& rng) {
  GradientDraw z;
  z.theta = {uniform(rng, 0.5, 4.0), uniform(rng, 1e-3, 1e-2), uniform(rng, 0.5, 1.5),
             uniform(rng, 5.0, 30.0)};
  z.x = {std::log(uniform(rng, 10.0, 1000.0)) / z.theta[2]};
  z.y.resize(2);
  model.sample_observation(z.theta, z.x, rng, z.y);
  return z;
}

// ---------------------------------------------------------------- path density

// log N(z; m, S) for d <= 2 written out by hand.
inline double gaussian_log_density(std::span<const double> z, std::span<const double> m,
                                   std::span<const double> cov, std::size_t d) {
  if (d == 1) {
    const double r = z[0] - m[0];
    return -0.5 * r * r / cov[0] - 0.5 * std::log(2.0 * M_PI * cov[0]);
  }
  const double det = cov[0] * cov[3] - cov[1] * cov[2];
  const double r0 = z[0] - m[0];
  const double r1 = z[1] - m[1];
  const double q = (cov[3] * r0 * r0 - (cov[1] + cov[2]) * r0 * r1 + cov[0] * r1 * r1) / det;
  return -0.5 * q - 0.5 * std::log(4.0 * M_PI * M_PI * det);
}

// Log of mu(u_0) times the observation densities times the Euler transition
// densities along the path: the discretised joint log-density whose theta
// gradient the score must be.
inline double path_log_density(const SdeModel& model, std::span<const double> theta,
                               const LatticePath& path, const ObservationGrid& grid,
                               const ObservationRecord& obs) {
  const std::size_t d = model.state_dim();
  const double dt = path.time_step();
  double total = model.log_initial_density(theta, path.state(0));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    total += model.log_obs_density(theta, path.state(grid.index[i]), obs.value(i));
  }
  std::vector<double> a(d), sigma(d * d), cov(d * d), mean(d);
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const auto x = path.state(k);
    model.drift(theta, x, a);
    model.diffusion(x, sigma);
    for (std::size_t i = 0; i < d; ++i) {
      mean[i] = x[i] + a[i] * dt;
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t m = 0; m < d; ++m) s += sigma[i * d + m] * sigma[j * d + m];
        cov[i * d + j] = s * dt;
      }
    }
    total += gaussian_log_density(path.state(k + 1), mean, cov, d);
  }
  return total;
}

struct ScoreInstance {
  ObservationRecord obs;
  std::vector<double> theta;
  LatticePath path;
};

/// Worst relative error of score_h_l against central differences of
/// path_log_density over `trials` random instances.
inline double score_error(const SdeModel& model,
                          const std::function<ScoreInstance(RngStream&)>& draw, int trials = 100,
                          std::uint64_t seed = 21) {
  RngStream rng(seed, 0);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    ScoreInstance z = draw(rng);
    const ObservationGrid grid = align_observations(z.obs, z.path.level());
    const auto h = score_h_l(model, z.theta, z.path, grid, z.obs);
    for (std::size_t j = 0; j < h.size(); ++j) {
      const double fd = central_difference(
          [&](std::span<const double> t) { return path_log_density(model, t, z.path, grid, z.obs); },
          z.theta, j);
      worst = std::max(worst, relative_error(h[j], fd));
    }
  }
  return worst;
}

/// A path at a random level min_level..min_level+3 with observations drawn
/// along it. `start` replaces the draw from mu.
inline ScoreInstance simulated_instance(const SdeModel& model, std::vector<double> theta,
                                        ObservationRecord obs, RngStream& rng,
                                        std::optional<double> start = {}, int min_level = 0) {
  const int level = min_level + static_cast<int>(rng.uniform() * 4.0);
  const auto params = model.make_parameters(theta);
  const ObservationGrid grid = align_observations(obs, level);
  ScoreInstance z{obs, std::move(theta),
                  start ? LatticePath(level, model.state_dim(), grid.steps())
                        : initial_path(model, params, level, grid.steps(), rng)};
  if (start) {
    z.path.state(0)[0] = *start;
    std::vector<double> scratch;
    propagate(model, z.theta, level, z.path.state(0), grid.steps(), rng,
              z.path.data().subspan(1), scratch);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    model.sample_observation(z.theta, z.path.state(grid.index[i]), rng,
                             {z.obs.values.data() + i * obs.obs_dim, obs.obs_dim});
  }
  return z;
}

/// A kangaroo instance on the first `count` desk observation times, started
/// at a population of 100..600 (the prior is too diffuse for a useful
/// difference quotient).
inline ScoreInstance kangaroo_score_instance(const KangarooModel& model,
                                             const ObservationRecord& layout, RngStream& rng) {
  std::vector<double> theta{1.5 + rng.uniform(), 2e-3 + 5e-3 * rng.uniform(),
                            0.6 + 0.4 * rng.uniform(), 10.0 + 10.0 * rng.uniform()};
  const double start = std::log(100.0 + 500.0 * rng.uniform()) / theta[2];
  return simulated_instance(model, theta, layout, rng, start, 3);
}

}  // namespace umsa::testing
