#include "umsa/score.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "umsa/error.hpp"

namespace umsa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_finite(const std::vector<double>& term, const char* what) {
  if (!std::all_of(term.begin(), term.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError(std::string("score term '") + what + "' is not finite");
  }
}

// Dynamic terms for d == 1, where Sigma^{-1} sigma^T = 1/sigma.
void accumulate_scalar(const SdeModel& model, std::span<const double> theta,
                       const LatticePath& path, ScoreBreakdown& out) {
  const std::size_t p = theta.size();
  const double dt = path.time_step();
  const bool constant_sigma = model.constant_diffusion();
  double a = 0.0;
  double s = 0.0;
  std::vector<double> grad_a(p);
  if (constant_sigma) model.diffusion({}, {&s, 1});
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const auto x = path.state(k);
    model.drift(theta, x, {&a, 1});
    model.drift_gradient(theta, x, grad_a);
    if (!constant_sigma) model.diffusion(x, {&s, 1});
    const double inv_s = 1.0 / s;
    const double b = a * inv_s;
    const double dx = path.state(k + 1)[0] - x[0];
    for (std::size_t j = 0; j < p; ++j) {
      const double grad_b = grad_a[j] * inv_s;
      out.drift_quadratic[j] -= dt * b * grad_b;
      out.stochastic_integral[j] += grad_b * inv_s * dx;
    }
  }
}

// General d: with b = sigma^{-1} a, ||b||^2 = a^T Sigma^{-1} a and
// b^T sigma^{-1} dx = a^T Sigma^{-1} dx, so both terms only need Sigma^{-1}.
void accumulate_general(const SdeModel& model, std::span<const double> theta,
                        const LatticePath& path, ScoreBreakdown& out) {
  const auto d = static_cast<Eigen::Index>(model.state_dim());
  const auto p = static_cast<Eigen::Index>(theta.size());
  const double dt = path.time_step();
  Eigen::VectorXd a(d);
  RowMatrix grad_a(d, p);
  RowMatrix sigma(d, d);
  Eigen::LLT<Eigen::MatrixXd> sigma_sq;
  Eigen::VectorXd drift_quadratic = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd stochastic = Eigen::VectorXd::Zero(p);

  auto refresh_sigma = [&](std::span<const double> x) {
    model.diffusion(x, {sigma.data(), static_cast<std::size_t>(d * d)});
    sigma_sq.compute(sigma * sigma.transpose());
    if (sigma_sq.info() != Eigen::Success) {
      throw NumericError("diffusion covariance is not positive definite");
    }
  };
  if (model.constant_diffusion()) refresh_sigma(path.state(0));

  Eigen::VectorXd dx(d);
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const auto x = path.state(k);
    model.drift(theta, x, {a.data(), static_cast<std::size_t>(d)});
    model.drift_gradient(theta, x, {grad_a.data(), static_cast<std::size_t>(d * p)});
    if (!model.constant_diffusion()) refresh_sigma(x);
    for (Eigen::Index i = 0; i < d; ++i) dx[i] = path.state(k + 1)[i] - x[i];
    const Eigen::VectorXd weighted_a = sigma_sq.solve(a);
    const Eigen::VectorXd weighted_dx = sigma_sq.solve(dx);
    drift_quadratic.noalias() -= dt * grad_a.transpose() * weighted_a;
    stochastic.noalias() += grad_a.transpose() * weighted_dx;
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    out.drift_quadratic[j] += drift_quadratic[j];
    out.stochastic_integral[j] += stochastic[j];
  }
}

}  // namespace

std::vector<double> ScoreBreakdown::total() const {
  std::vector<double> sum(drift_quadratic.size());
  for (std::size_t j = 0; j < sum.size(); ++j) {
    sum[j] = drift_quadratic[j] + stochastic_integral[j] + observation[j] + initial[j];
  }
  return sum;
}

ScoreBreakdown score_breakdown(const SdeModel& model, std::span<const double> theta,
                               const LatticePath& path, const ObservationGrid& grid,
                               const ObservationRecord& obs) {
  if (grid.level != path.level() || grid.steps() != path.steps()) {
    throw ConfigError("path level/length does not match the observation grid");
  }
  const std::size_t p = theta.size();
  ScoreBreakdown out{std::vector<double>(p, 0.0), std::vector<double>(p, 0.0),
                     std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};

  if (model.state_dim() == 1) {
    accumulate_scalar(model, theta, path, out);
  } else {
    accumulate_general(model, theta, path, out);
  }

  std::vector<double> buffer(p);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (obs.missing(i)) continue;
    model.grad_log_obs_density(theta, path.state(grid.index[i]), obs.value(i), buffer);
    for (std::size_t j = 0; j < p; ++j) out.observation[j] += buffer[j];
  }
  model.grad_log_initial_density(theta, path.state(0), out.initial);

  require_finite(out.drift_quadratic, "drift quadratic");
  require_finite(out.stochastic_integral, "stochastic integral");
  require_finite(out.observation, "observation");
  require_finite(out.initial, "initial density");
  return out;
}

std::vector<double> score_h_l(const SdeModel& model, std::span<const double> theta,
                              const LatticePath& path, const ObservationGrid& grid,
                              const ObservationRecord& obs) {
  auto total = score_breakdown(model, theta, path, grid, obs).total();
  require_finite(total, "total");
  return total;
}

}  // namespace umsa
