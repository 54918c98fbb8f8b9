#include "umsa/oracle.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "umsa/error.hpp"

namespace umsa {

namespace {

// phi_n, Q_n and their theta-derivatives for n lattice steps.
struct Transition {
  double phi;
  double d_phi;
  double q;
  double d_q;
};

Transition transition_with_tangent(const LinearGaussianSpec& spec, double theta, std::size_t n) {
  const double dt = lattice_step(spec.level);
  const double c = 1.0 - theta * dt;
  const double s2dt = spec.sigma * spec.sigma * dt;
  Transition t{1.0, 0.0, 0.0, 0.0};
  // Iterate one lattice step at a time: (phi, q) <- (c phi, c^2 q + s2dt).
  for (std::size_t k = 0; k < n; ++k) {
    t.d_q = 2.0 * c * (-dt) * t.q + c * c * t.d_q;
    t.q = c * c * t.q + s2dt;
    t.d_phi = -dt * t.phi + c * t.d_phi;
    t.phi = c * t.phi;
  }
  return t;
}

struct FilterPass {
  std::vector<double> predicted_mean;
  std::vector<double> predicted_variance;
  std::vector<double> phi;
  std::vector<double> mean;
  std::vector<double> variance;
  LogLikelihood loglik;
};

FilterPass run_filter(const LinearGaussianSpec& spec, const ObservationRecord& obs, double theta) {
  obs.validate();
  if (obs.obs_dim != 1) throw ConfigError("the Kalman oracle needs scalar observations");
  const ObservationGrid grid = align_observations(obs, spec.level);
  const double r = spec.obs_sd * spec.obs_sd;
  const std::size_t n_obs = grid.size();

  FilterPass pass;
  pass.predicted_mean.resize(n_obs);
  pass.predicted_variance.resize(n_obs);
  pass.phi.resize(n_obs);
  pass.mean.resize(n_obs);
  pass.variance.resize(n_obs);

  double m = spec.x0;
  double p = 0.0;
  double dm = 0.0;
  double dp = 0.0;
  std::size_t previous = 0;
  for (std::size_t s = 0; s < n_obs; ++s) {
    const Transition t = transition_with_tangent(spec, theta, grid.index[s] - previous);
    previous = grid.index[s];

    const double m_pred = t.phi * m;
    const double p_pred = t.phi * t.phi * p + t.q;
    const double dm_pred = t.d_phi * m + t.phi * dm;
    const double dp_pred = 2.0 * t.phi * t.d_phi * p + t.phi * t.phi * dp + t.d_q;
    pass.predicted_mean[s] = m_pred;
    pass.predicted_variance[s] = p_pred;
    pass.phi[s] = t.phi;

    const double y = obs.value(s)[0];
    if (std::isnan(y)) {
      m = m_pred;
      p = p_pred;
      dm = dm_pred;
      dp = dp_pred;
    } else {
      const double v = y - m_pred;
      const double dv = -dm_pred;
      const double S = p_pred + r;
      const double dS = dp_pred;
      pass.loglik.value += -0.5 * (std::log(2.0 * std::numbers::pi * S) + v * v / S);
      pass.loglik.gradient += -0.5 * (dS / S + 2.0 * v * dv / S - v * v * dS / (S * S));
      const double K = p_pred / S;
      const double dK = (dp_pred * S - p_pred * dS) / (S * S);
      m = m_pred + K * v;
      dm = dm_pred + dK * v + K * dv;
      p = p_pred * r / S;
      dp = r * dK;
    }
    pass.mean[s] = m;
    pass.variance[s] = p;
  }
  return pass;
}

}  // namespace

double LinearGaussianSpec::transition(double theta, std::size_t n) const {
  return std::pow(1.0 - theta * lattice_step(level), static_cast<double>(n));
}

double LinearGaussianSpec::transition_variance(double theta, std::size_t n) const {
  return transition_with_tangent(*this, theta, n).q;
}

LogLikelihood kalman_loglik_grad(const LinearGaussianSpec& spec, const ObservationRecord& obs,
                                 double theta) {
  return run_filter(spec, obs, theta).loglik;
}

SmootherMoments kalman_smoother_moments(const LinearGaussianSpec& spec,
                                        const ObservationRecord& obs, double theta) {
  const FilterPass pass = run_filter(spec, obs, theta);
  const std::size_t n = pass.mean.size();
  SmootherMoments out{pass.mean, pass.variance, pass.mean, pass.variance};
  for (std::size_t s = n - 1; s-- > 0;) {
    const double gain = pass.variance[s] * pass.phi[s + 1] / pass.predicted_variance[s + 1];
    out.mean[s] = pass.mean[s] + gain * (out.mean[s + 1] - pass.predicted_mean[s + 1]);
    out.variance[s] =
        pass.variance[s] + gain * gain * (out.variance[s + 1] - pass.predicted_variance[s + 1]);
  }
  return out;
}

double kalman_mle(const LinearGaussianSpec& spec, const ObservationRecord& obs, double lower,
                  double upper) {
  auto gradient = [&](double theta) { return kalman_loglik_grad(spec, obs, theta).gradient; };
  constexpr int kScan = 400;
  const double width = (upper - lower) / kScan;
  double a = lower;
  double ga = gradient(a);
  for (int i = 1; i <= kScan; ++i) {
    const double b = lower + i * width;
    const double gb = gradient(b);
    if (ga > 0.0 && gb <= 0.0) {
      if (gb == 0.0) return b;
      std::uintmax_t max_iter = 200;
      const auto [lo, hi] = boost::math::tools::toms748_solve(
          gradient, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(52), max_iter);
      const double glo = std::abs(gradient(lo));
      const double ghi = std::abs(gradient(hi));
      return glo <= ghi ? lo : hi;
    }
    a = b;
    ga = gb;
  }
  throw NumericError("no maximiser of the Kalman likelihood in the search interval");
}

LatticePath sample_posterior_path(const LinearGaussianSpec& spec, const ObservationRecord& obs,
                                  double theta, RngStream& rng) {
  obs.validate();
  const ObservationGrid grid = align_observations(obs, spec.level);
  const std::size_t steps = grid.steps();
  const double dt = lattice_step(spec.level);
  const double c = 1.0 - theta * dt;
  const double q = spec.sigma * spec.sigma * dt;
  const double r = spec.obs_sd * spec.obs_sd;

  std::vector<double> mean(steps + 1);
  std::vector<double> variance(steps + 1);
  mean[0] = spec.x0;
  variance[0] = 0.0;
  std::size_t next_obs = 0;
  for (std::size_t k = 1; k <= steps; ++k) {
    double m = c * mean[k - 1];
    double p = c * c * variance[k - 1] + q;
    if (next_obs < grid.size() && grid.index[next_obs] == k) {
      const double y = obs.value(next_obs)[0];
      if (!std::isnan(y)) {
        const double S = p + r;
        m += p / S * (y - m);
        p = p * r / S;
      }
      ++next_obs;
    }
    mean[k] = m;
    variance[k] = p;
  }

  LatticePath path(spec.level, 1, steps);
  path.state(steps)[0] = mean[steps] + std::sqrt(variance[steps]) * rng.normal();
  for (std::size_t k = steps; k-- > 0;) {
    // X_k | X_{k+1}, y_{1:k}: condition N(mean_k, var_k) on x_{k+1} = c X_k + N(0, q).
    const double p_pred = c * c * variance[k] + q;
    const double gain = variance[k] * c / p_pred;
    const double m = mean[k] + gain * (path.state(k + 1)[0] - c * mean[k]);
    const double v = std::max(0.0, variance[k] - gain * c * variance[k]);
    path.state(k)[0] = m + std::sqrt(v) * rng.normal();
  }
  return path;
}

}  // namespace umsa
