#include "umsa/unbiased.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "umsa/error.hpp"

namespace umsa {

namespace {

double unnormalised_iteration_weight(int p) {
  if (p <= 5) return std::ldexp(1.0, 5 - p);
  const double log2p = std::log2(static_cast<double>(p));
  return std::ldexp(1.0, -p) * p * log2p * log2p;
}

}  // namespace

RandomizationLaw::RandomizationLaw(const RandomizationSettings& settings) : settings_(settings) {
  const auto& s = settings_;
  if (s.l_min < 0 || s.l_min > s.l_max) throw ConfigError("need 0 <= l_min <= l_max");
  if (s.l_max > 30) throw ConfigError("l_max above 30 is not supported");
  if (s.p_min < 0 || s.p_min > s.p_max) throw ConfigError("need 0 <= p_min <= p_max");
  if (s.p_max > 40) throw ConfigError("p_max above 40 is not supported");
  if (s.n0 < 1) throw ConfigError("N_0 must be positive");

  std::vector<double> level_weights;
  for (int l = s.l_min; l <= s.l_max; ++l) level_weights.push_back(std::exp2(-1.5 * l));
  level_pmf_ = Pmf(std::move(level_weights));

  for (int l = s.l_min; l <= s.l_max; ++l) {
    std::vector<int> support;
    std::vector<double> weights;
    for (int p = s.p_min; p <= std::min(5, s.l_max - l); ++p) support.push_back(p);
    for (int p = std::max(6, s.p_min); p <= s.p_max; ++p) support.push_back(p);
    if (support.empty()) {
      throw ConfigError("empty iteration support at level " + std::to_string(l) +
                        "; raise p_max above 5 or lower l");
    }
    for (int p : support) weights.push_back(unnormalised_iteration_weight(p));
    supports_.push_back(std::move(support));
    iteration_pmfs_.emplace_back(std::move(weights));
  }
}

double RandomizationLaw::level_mass(int l) const {
  if (l < settings_.l_min || l > settings_.l_max) return 0.0;
  return level_pmf_[static_cast<std::size_t>(l - settings_.l_min)];
}

const std::vector<int>& RandomizationLaw::iteration_support(int l) const {
  if (l < settings_.l_min || l > settings_.l_max) throw ConfigError("level outside the law");
  return supports_[static_cast<std::size_t>(l - settings_.l_min)];
}

double RandomizationLaw::iteration_mass(int p, int l) const {
  const auto& support = iteration_support(l);
  const auto it = std::find(support.begin(), support.end(), p);
  if (it == support.end()) return 0.0;
  return iteration_pmfs_[static_cast<std::size_t>(l - settings_.l_min)]
                        [static_cast<std::size_t>(it - support.begin())];
}

std::optional<int> RandomizationLaw::previous_support(int p, int l) const {
  const auto& support = iteration_support(l);
  const auto it = std::lower_bound(support.begin(), support.end(), p);
  if (it == support.begin()) return std::nullopt;
  return *(it - 1);
}

std::pair<int, int> RandomizationLaw::sample(RngStream& rng) const {
  const std::size_t li = level_pmf_.sample(rng);
  const std::size_t pi = iteration_pmfs_[li].sample(rng);
  return {settings_.l_min + static_cast<int>(li), supports_[li][pi]};
}

std::vector<double> contribution_from_trajectories(const ThetaTrajectory& fine,
                                                   const ThetaTrajectory* coarse, std::size_t n,
                                                   std::optional<std::size_t> previous,
                                                   double mass) {
  std::vector<double> out(fine.dim());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double diff = fine[n][j];
    if (coarse) diff -= (*coarse)[n][j];
    if (previous) {
      double earlier = fine[*previous][j];
      if (coarse) earlier -= (*coarse)[*previous][j];
      diff -= earlier;
    }
    out[j] = diff / mass;
  }
  return out;
}

EstimatorRecord umsa_single(const SdeModel& model, const ObservationRecord& obs,
                            const RandomizationLaw& law, const ParameterVector& theta0,
                            const UmsaOptions& options, RngStream& rng) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t draws_before = rng.gaussian_draws();
  EstimatorRecord record;
  record.replicate = rng.stream();
  record.seed = rng.seed();
  std::tie(record.level, record.p) = law.sample(rng);
  record.level_mass = law.level_mass(record.level);
  record.iteration_mass = law.iteration_mass(record.p, record.level);
  record.iterations = law.iterations(record.p);
  const std::optional<int> previous = law.previous_support(record.p, record.level);
  std::optional<std::size_t> previous_n;
  if (previous) {
    previous_n = law.iterations(*previous);
    record.previous_iterations = *previous_n;
  }
  const double mass = record.level_mass * record.iteration_mass;

  MsaOptions msa;
  msa.level = record.level;
  msa.iterations = record.iterations;
  msa.particles = options.particles;
  msa.schedule = options.schedule;
  msa.observer = options.observer;

  try {
    if (record.level == law.settings().l_min) {
      const MsaResult run = msa_run(model, obs, theta0, msa, rng);
      record.contribution =
          contribution_from_trajectories(run.theta, nullptr, record.iterations, previous_n, mass);
      record.cost = run.cost;
    } else {
      const CoupledMsaResult run = msa_run_coupled(model, obs, theta0, msa, rng);
      record.contribution = contribution_from_trajectories(run.fine, &run.coarse,
                                                           record.iterations, previous_n, mass);
      record.cost = run.cost;
    }
    for (double c : record.contribution) {
      if (!std::isfinite(c)) throw NumericError("non-finite contribution");
      if (std::abs(c) > options.heavy_tail_threshold) record.heavy_tail = true;
    }
  } catch (const NumericError& e) {
    record.aborted = true;
    record.abort_reason = e.what();
  } catch (const ConstraintError& e) {
    record.aborted = true;
    record.abort_reason = e.what();
  }
  if (record.aborted) {
    record.contribution.assign(theta0.size(), std::nan(""));
    record.cost.gaussian_draws = rng.gaussian_draws() - draws_before;
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

UmsaEstimate umsa_estimate(const SdeModel& model, const ObservationRecord& obs,
                           const RandomizationLaw& law, const ParameterVector& theta0,
                           const UmsaOptions& options, std::size_t replicates,
                           std::uint64_t seed, std::size_t threads) {
  if (replicates < 1) throw ConfigError("need at least one replicate");
  model.check_parameters(theta0);
  options.schedule.validate();

  UmsaEstimate estimate;
  estimate.records.resize(replicates);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(replicates);
  auto worker = [&] {
    for (std::size_t i = next++; i < replicates; i = next++) {
      try {
        RngStream rng(seed, i);
        estimate.records[i] = umsa_single(model, obs, law, theta0, options, rng);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, replicates);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  estimate.theta.assign(theta0.size(), 0.0);
  std::size_t completed = 0;
  for (const auto& record : estimate.records) {
    if (record.aborted) {
      ++estimate.aborted;
      continue;
    }
    ++completed;
    for (std::size_t j = 0; j < estimate.theta.size(); ++j) estimate.theta[j] += record.contribution[j];
  }
  estimate.partial = estimate.aborted > 0;
  for (double& v : estimate.theta) v = completed ? v / static_cast<double>(completed) : std::nan("");
  return estimate;
}

}  // namespace umsa
