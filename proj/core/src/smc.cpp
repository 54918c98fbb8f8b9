#include "umsa/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "umsa/error.hpp"

namespace umsa {

// ---------------------------------------------------------------- Pmf

Pmf::Pmf(std::vector<double> weights) : weights_(std::move(weights)) { normalise(); }

Pmf Pmf::from_log_weights(std::span<const double> log_weights) {
  Pmf out;
  from_log_weights(log_weights, out);
  return out;
}

void Pmf::from_log_weights(std::span<const double> log_weights, Pmf& out) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw DegenerateWeightsError("NaN log-weight");
    peak = std::max(peak, lw);
  }
  if (!std::isfinite(peak)) throw DegenerateWeightsError("all particle weights are zero");
  out.weights_.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    out.weights_[i] = std::exp(log_weights[i] - peak);
  }
  out.normalise();
}

void Pmf::normalise() {
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw DegenerateWeightsError("negative or NaN weight");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateWeightsError("weights do not have positive finite mass");
  }
  const double inv = 1.0 / total;
  cumulative_.resize(weights_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] *= inv;
    running += weights_[i];
    cumulative_[i] = running;
  }
}

std::size_t Pmf::lookup(double u) const {
  const double target = u * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  auto index = static_cast<std::size_t>(it - cumulative_.begin());
  if (index >= weights_.size()) index = weights_.size() - 1;
  // upper_bound can land on a zero-mass entry only through rounding; step back.
  while (weights_[index] == 0.0 && index > 0) --index;
  return index;
}

std::size_t Pmf::sample(RngStream& rng) const { return lookup(rng.uniform()); }

// ---------------------------------------------------------------- coupling

MaximalCoupling::MaximalCoupling(const Pmf& r1, const Pmf& r2, ResidualCoupling residual)
    : residual_mode_(residual) {
  if (r1.size() != r2.size()) throw ConfigError("maximal coupling needs PMFs of equal length");
  const std::size_t n = r1.size();
  std::vector<double> common(n);
  std::vector<double> rest1(n);
  std::vector<double> rest2(n);
  double rest1_mass = 0.0;
  double rest2_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    common[i] = std::min(r1[i], r2[i]);
    overlap_mass_ += common[i];
    rest1[i] = r1[i] - common[i];
    rest2[i] = r2[i] - common[i];
    rest1_mass += rest1[i];
    rest2_mass += rest2[i];
  }
  residual_available_ = rest1_mass > 0.0 && rest2_mass > 0.0;
  if (overlap_mass_ > 0.0) overlap_ = Pmf(std::move(common));
  if (residual_available_) {
    residual1_ = Pmf(std::move(rest1));
    residual2_ = Pmf(std::move(rest2));
  }
}

std::pair<std::size_t, std::size_t> MaximalCoupling::sample(RngStream& rng) const {
  const double u = rng.uniform();
  if (u < overlap_mass_ || !residual_available_) {
    const std::size_t i = overlap_.sample(rng);
    return {i, i};
  }
  if (residual_mode_ == ResidualCoupling::kCommonUniform) {
    const double v = rng.uniform();
    return {residual1_.lookup(v), residual2_.lookup(v)};
  }
  const std::size_t i = residual1_.sample(rng);
  const std::size_t j = residual2_.sample(rng);
  return {i, j};
}

std::pair<std::size_t, std::size_t> maximal_coupling_sample(const Pmf& r1, const Pmf& r2,
                                                            RngStream& rng,
                                                            ResidualCoupling residual) {
  return MaximalCoupling(r1, r2, residual).sample(rng);
}

// ---------------------------------------------------------------- storage

void ParticleStore::reset(const ObservationGrid& grid, std::size_t particles, std::size_t dim) {
  particles_ = particles;
  dim_ = dim;
  const std::size_t n = grid.size();
  first_.resize(n);
  length_.resize(n);
  states_.resize(n);
  ancestors_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    first_[s] = s == 0 ? 0 : grid.index[s - 1] + 1;
    length_[s] = grid.index[s] + 1 - first_[s];
    states_[s].assign(particles * length_[s] * dim, 0.0);
    ancestors_[s].assign(particles, 0);
  }
}

std::span<double> ParticleStore::states(std::size_t s, std::size_t i) {
  const std::size_t block = length_[s] * dim_;
  return std::span<double>(states_[s]).subspan(i * block, block);
}

std::span<const double> ParticleStore::states(std::size_t s, std::size_t i) const {
  const std::size_t block = length_[s] * dim_;
  return std::span<const double>(states_[s]).subspan(i * block, block);
}

std::span<const double> ParticleStore::last_state(std::size_t s, std::size_t i) const {
  return states(s, i).subspan((length_[s] - 1) * dim_, dim_);
}

void ParticleStore::pin(std::size_t s, const LatticePath& conditioning) {
  const auto source = conditioning.data().subspan(first_[s] * dim_, length_[s] * dim_);
  auto target = states(s, particles_ - 1);
  std::copy(source.begin(), source.end(), target.begin());
  ancestors_[s][particles_ - 1] = particles_ - 1;
}

void ParticleStore::trace(std::size_t final_index, LatticePath& out) const {
  std::size_t index = final_index;
  for (std::size_t s = segments(); s-- > 0;) {
    const auto source = states(s, index);
    std::copy(source.begin(), source.end(), out.data().begin() + first_[s] * dim_);
    if (s > 0) index = ancestors_[s - 1][index];
  }
}

namespace {

void check_conditioning(const LatticePath& path, const ObservationGrid& grid, std::size_t dim) {
  if (path.level() != grid.level || path.steps() != grid.steps() || path.dim() != dim) {
    throw ConfigError("conditioning path does not match the observation grid at level " +
                      std::to_string(grid.level));
  }
}

}  // namespace

// ---------------------------------------------------------------- CPF

ConditionalParticleFilter::ConditionalParticleFilter(const SdeModel& model,
                                                     const ObservationRecord& obs, int level,
                                                     std::size_t particles)
    : model_(model), obs_(obs), grid_(align_observations(obs, level)), particles_(particles) {
  if (particles < 2) throw ConfigError("conditional particle filter needs N >= 2");
  if (obs.obs_dim != model.obs_dim()) throw ConfigError("observation dimension mismatch");
  store_.reset(grid_, particles_, model_.state_dim());
  weights_.resize(grid_.size());
  log_weights_.resize(particles_);
}

LatticePath ConditionalParticleFilter::sweep(std::span<const double> theta,
                                             const LatticePath& conditioning, RngStream& rng) {
  const std::size_t d = model_.state_dim();
  const std::size_t n_free = particles_ - 1;
  const std::size_t segments = grid_.size();
  check_conditioning(conditioning, grid_, d);

  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t len = store_.length(s);
    for (std::size_t i = 0; i < n_free; ++i) {
      auto block = store_.states(s, i);
      if (s == 0) {
        model_.sample_initial(theta, rng, block.first(d));
        propagate(model_, theta, grid_.level, block.first(d), len - 1, rng, block.subspan(d),
                  scratch_);
      } else {
        const auto start = store_.last_state(s - 1, store_.ancestors(s - 1)[i]);
        propagate(model_, theta, grid_.level, start, len, rng, block, scratch_);
      }
    }
    store_.pin(s, conditioning);

    if (obs_.missing(s)) {
      std::fill(log_weights_.begin(), log_weights_.end(), 0.0);
    } else {
      for (std::size_t i = 0; i < particles_; ++i) {
        log_weights_[i] = model_.log_obs_density(theta, store_.last_state(s, i), obs_.value(s));
      }
      density_evals_ += particles_;
    }
    Pmf::from_log_weights(log_weights_, weights_[s]);

    if (s + 1 < segments) {
      auto& ancestors = store_.ancestors(s);
      for (std::size_t i = 0; i < n_free; ++i) ancestors[i] = weights_[s].sample(rng);
    }
  }

  selected_ = weights_[segments - 1].sample(rng);
  LatticePath out(grid_.level, d, grid_.steps());
  store_.trace(selected_, out);
  return out;
}

// ---------------------------------------------------------------- CCPF

CoupledConditionalParticleFilter::CoupledConditionalParticleFilter(const SdeModel& model,
                                                                   const ObservationRecord& obs,
                                                                   int level,
                                                                   std::size_t particles,
                                                                   ResidualCoupling residual)
    : model_(model),
      obs_(obs),
      fine_grid_(align_observations(obs, level)),
      coarse_grid_(align_observations(obs, level - 1)),
      particles_(particles),
      residual_(residual) {
  if (level < 1) throw ConfigError("coupled filter needs level >= 1");
  if (particles < 2) throw ConfigError("coupled conditional particle filter needs N >= 2");
  if (obs.obs_dim != model.obs_dim()) throw ConfigError("observation dimension mismatch");
  fine_store_.reset(fine_grid_, particles_, model_.state_dim());
  coarse_store_.reset(coarse_grid_, particles_, model_.state_dim());
  fine_weights_.resize(fine_grid_.size());
  coarse_weights_.resize(coarse_grid_.size());
  log_weights_.resize(particles_);
}

CoupledPathPair CoupledConditionalParticleFilter::sweep(std::span<const double> theta_fine,
                                                        std::span<const double> theta_coarse,
                                                        const CoupledPathPair& conditioning,
                                                        RngStream& rng) {
  const std::size_t d = model_.state_dim();
  const std::size_t n_free = particles_ - 1;
  const std::size_t segments = fine_grid_.size();
  const int level = fine_grid_.level;
  check_conditioning(conditioning.fine, fine_grid_, d);
  check_conditioning(conditioning.coarse, coarse_grid_, d);

  for (std::size_t s = 0; s < segments; ++s) {
    const StepRange fine_range{s == 0 ? 0 : fine_grid_.index[s - 1], fine_grid_.index[s]};
    const StepRange coarse_range{s == 0 ? 0 : 2 * coarse_grid_.index[s - 1],
                                 2 * coarse_grid_.index[s]};
    for (std::size_t i = 0; i < n_free; ++i) {
      auto fine_block = fine_store_.states(s, i);
      auto coarse_block = coarse_store_.states(s, i);
      if (s == 0) {
        // Common random numbers: both levels read the same draws for U_0.
        RngStream shadow = rng;
        model_.sample_initial(theta_fine, rng, fine_block.first(d));
        model_.sample_initial(theta_coarse, shadow, coarse_block.first(d));
        propagate_coupled(model_, theta_fine, theta_coarse, level, fine_range, coarse_range,
                          fine_block.first(d), coarse_block.first(d), rng,
                          fine_block.subspan(d), coarse_block.subspan(d), scratch_);
      } else {
        const auto fine_start = fine_store_.last_state(s - 1, fine_store_.ancestors(s - 1)[i]);
        const auto coarse_start =
            coarse_store_.last_state(s - 1, coarse_store_.ancestors(s - 1)[i]);
        propagate_coupled(model_, theta_fine, theta_coarse, level, fine_range, coarse_range,
                          fine_start, coarse_start, rng, fine_block, coarse_block, scratch_);
      }
    }
    fine_store_.pin(s, conditioning.fine);
    coarse_store_.pin(s, conditioning.coarse);

    const bool missing = obs_.missing(s);
    for (std::size_t i = 0; i < particles_; ++i) {
      log_weights_[i] = missing ? 0.0
                                : model_.log_obs_density(theta_fine, fine_store_.last_state(s, i),
                                                         obs_.value(s));
    }
    Pmf::from_log_weights(log_weights_, fine_weights_[s]);
    for (std::size_t i = 0; i < particles_; ++i) {
      log_weights_[i] = missing ? 0.0
                                : model_.log_obs_density(
                                      theta_coarse, coarse_store_.last_state(s, i), obs_.value(s));
    }
    Pmf::from_log_weights(log_weights_, coarse_weights_[s]);
    if (!missing) density_evals_ += 2 * particles_;

    if (s + 1 < segments) {
      const MaximalCoupling coupling(fine_weights_[s], coarse_weights_[s], residual_);
      auto& fine_ancestors = fine_store_.ancestors(s);
      auto& coarse_ancestors = coarse_store_.ancestors(s);
      for (std::size_t i = 0; i < n_free; ++i) {
        std::tie(fine_ancestors[i], coarse_ancestors[i]) = coupling.sample(rng);
      }
    }
  }

  const MaximalCoupling terminal(fine_weights_[segments - 1], coarse_weights_[segments - 1],
                                 residual_);
  selected_ = terminal.sample(rng);
  CoupledPathPair out{LatticePath(level, d, fine_grid_.steps()),
                      LatticePath(level - 1, d, coarse_grid_.steps())};
  fine_store_.trace(selected_.first, out.fine);
  coarse_store_.trace(selected_.second, out.coarse);
  return out;
}

// ---------------------------------------------------------------- one-shot

LatticePath cpf_step(const SdeModel& model, const ParameterVector& theta, int level,
                     const ObservationRecord& obs, const LatticePath& conditioning,
                     std::size_t particles, RngStream& rng) {
  ConditionalParticleFilter filter(model, obs, level, particles);
  return filter.sweep(theta.values(), conditioning, rng);
}

CoupledPathPair ccpf_step(const SdeModel& model, const ParameterVector& theta_fine,
                          const ParameterVector& theta_coarse, int level,
                          const ObservationRecord& obs, const CoupledPathPair& conditioning,
                          std::size_t particles, RngStream& rng) {
  CoupledConditionalParticleFilter filter(model, obs, level, particles);
  return filter.sweep(theta_fine.values(), theta_coarse.values(), conditioning, rng);
}

}  // namespace umsa
