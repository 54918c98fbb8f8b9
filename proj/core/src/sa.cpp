#include "umsa/sa.hpp"

#include <cmath>
#include <string>

#include "umsa/error.hpp"
#include "umsa/score.hpp"

namespace umsa {

void StepSchedule::validate() const {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw ConfigError("step size gamma0 must be > 0");
  if (!(n0 >= 0.0)) throw ConfigError("step size offset n0 must be >= 0");
  if (!(kappa > 0.5 && kappa <= 1.0)) throw ConfigError("step size exponent kappa must lie in (0.5, 1]");
  for (double g : gains) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("step size gains must be positive");
  }
}

double StepSchedule::operator()(std::size_t n) const {
  return gamma0 * std::pow(static_cast<double>(n) + n0, -kappa);
}

void apply_update(ParameterVector& theta, double gamma, std::span<const double> score,
                  std::span<const double> gains) {
  if (score.size() != theta.size()) throw ConstraintError("score and parameter sizes differ");
  if (!gains.empty() && gains.size() != theta.size()) {
    throw ConfigError("step size gains and parameter sizes differ");
  }
  const auto& constraints = theta.constraints();
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double step = gains.empty() ? gamma : gamma * gains[j];
    if (constraints[j] == Constraint::kPositive) {
      theta[j] *= std::exp(step * theta[j] * score[j]);
    } else {
      theta[j] += step * score[j];
    }
  }
  theta.validate();
}

namespace {

void check_options(const SdeModel& model, const ParameterVector& theta0, const MsaOptions& options) {
  options.schedule.validate();
  if (options.iterations < 1) throw ConfigError("stochastic approximation needs at least one iteration");
  if (options.level < 0) throw ConfigError("level must be non-negative");
  model.check_parameters(theta0);
  if (!options.schedule.gains.empty() && options.schedule.gains.size() != theta0.size()) {
    throw ConfigError("step size gains and parameter sizes differ");
  }
}

CostCounters cost_since(const RngStream& rng, std::uint64_t draws_before, std::uint64_t evals) {
  return {rng.gaussian_draws() - draws_before, evals};
}

}  // namespace

MsaResult msa_run(const SdeModel& model, const ObservationRecord& obs,
                  const ParameterVector& theta0, const MsaOptions& options, RngStream& rng) {
  check_options(model, theta0, options);
  const std::uint64_t draws_before = rng.gaussian_draws();
  ConditionalParticleFilter filter(model, obs, options.level, options.particles);
  const ObservationGrid& grid = filter.grid();

  MsaResult result;
  result.theta = ThetaTrajectory(theta0.size());
  ParameterVector theta = theta0;
  result.theta.push(theta.values());
  result.path = initial_path(model, theta, options.level, grid.steps(), rng);

  for (std::size_t n = 1; n <= options.iterations; ++n) {
    result.path = filter.sweep(theta.values(), result.path, rng);
    const std::vector<double> h = score_h_l(model, theta.values(), result.path, grid, obs);
    const double gamma = options.schedule(n);
    apply_update(theta, gamma, h, options.schedule.gains);
    result.theta.push(theta.values());
    if (options.observer) options.observer(n, theta, gamma);
  }
  result.cost = cost_since(rng, draws_before, filter.density_evaluations());
  return result;
}

CoupledMsaResult msa_run_coupled(const SdeModel& model, const ObservationRecord& obs,
                                 const ParameterVector& theta0, const MsaOptions& options,
                                 RngStream& rng) {
  check_options(model, theta0, options);
  if (options.level < 1) throw ConfigError("coupled stochastic approximation needs level >= 1");
  const std::uint64_t draws_before = rng.gaussian_draws();
  CoupledConditionalParticleFilter filter(model, obs, options.level, options.particles);
  const ObservationGrid& fine_grid = filter.fine_grid();
  const ObservationGrid& coarse_grid = filter.coarse_grid();

  CoupledMsaResult result;
  result.fine = ThetaTrajectory(theta0.size());
  result.coarse = ThetaTrajectory(theta0.size());
  ParameterVector fine = theta0;
  ParameterVector coarse = theta0;
  result.fine.push(fine.values());
  result.coarse.push(coarse.values());
  result.path = initial_path_coupled(model, theta0, options.level, fine_grid.steps(),
                                     coarse_grid.steps(), rng);

  for (std::size_t n = 1; n <= options.iterations; ++n) {
    result.path = filter.sweep(fine.values(), coarse.values(), result.path, rng);
    const std::vector<double> h_fine =
        score_h_l(model, fine.values(), result.path.fine, fine_grid, obs);
    const std::vector<double> h_coarse =
        score_h_l(model, coarse.values(), result.path.coarse, coarse_grid, obs);
    const double gamma = options.schedule(n);
    apply_update(fine, gamma, h_fine, options.schedule.gains);
    apply_update(coarse, gamma, h_coarse, options.schedule.gains);
    result.fine.push(fine.values());
    result.coarse.push(coarse.values());
    if (options.observer) options.observer(n, fine, gamma);
  }
  result.cost = cost_since(rng, draws_before, filter.density_evaluations());
  return result;
}

bool Box::contains(std::span<const double> theta) const {
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (!(theta[j] >= lower[j] && theta[j] <= upper[j])) return false;
  }
  return true;
}

double ReprojectionSettings::epsilon(const StepSchedule& schedule, std::size_t n) const {
  return eps_scale * std::pow(schedule(n), eps_exponent);
}

Box ReprojectionSettings::compact(std::size_t n) const {
  Box box = base;
  const double widen = growth * std::log1p(static_cast<double>(n));
  for (std::size_t j = 0; j < box.lower.size(); ++j) {
    const double width = base.upper[j] - base.lower[j];
    if (!std::isfinite(width) || widen == 0.0) continue;
    box.lower[j] -= widen * width;
    box.upper[j] += widen * width;
  }
  return box;
}

MsaResult msa_run_reprojected(const SdeModel& model, const ObservationRecord& obs,
                              const ParameterVector& theta0, const MsaOptions& options,
                              const ReprojectionSettings& reprojection, RngStream& rng) {
  check_options(model, theta0, options);
  if (reprojection.base.lower.size() != theta0.size() ||
      reprojection.base.upper.size() != theta0.size()) {
    throw ConfigError("reprojection box has the wrong dimension");
  }
  if (!reprojection.base.contains(theta0.values())) {
    throw ConfigError("theta0 must lie in the first reprojection set");
  }
  const std::uint64_t draws_before = rng.gaussian_draws();
  ConditionalParticleFilter filter(model, obs, options.level, options.particles);
  const ObservationGrid& grid = filter.grid();

  MsaResult result;
  result.theta = ThetaTrajectory(theta0.size());
  ParameterVector theta = theta0;
  result.theta.push(theta.values());
  result.path = initial_path(model, theta, options.level, grid.steps(), rng);

  for (std::size_t n = 1; n <= options.iterations; ++n) {
    result.path = filter.sweep(theta.values(), result.path, rng);
    const std::vector<double> h = score_h_l(model, theta.values(), result.path, grid, obs);
    const double gamma = options.schedule(n);

    ParameterVector proposal = theta;
    bool accept = true;
    try {
      apply_update(proposal, gamma, h, options.schedule.gains);
    } catch (const ConstraintError&) {
      accept = false;
    }
    if (accept) {
      double moved = 0.0;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        moved += (proposal[j] - theta[j]) * (proposal[j] - theta[j]);
      }
      accept = std::sqrt(moved) < reprojection.epsilon(options.schedule, n) &&
               reprojection.compact(n).contains(proposal.values());
    }
    if (accept) {
      theta = std::move(proposal);
    } else {
      theta = theta0;
      ++result.resets;
    }
    result.theta.push(theta.values());
    if (options.observer) options.observer(n, theta, gamma);
  }
  result.cost = cost_since(rng, draws_before, filter.density_evaluations());
  return result;
}

}  // namespace umsa
