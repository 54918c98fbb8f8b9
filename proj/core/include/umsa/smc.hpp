#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "umsa/lattice.hpp"
#include "umsa/model.hpp"
#include "umsa/rng.hpp"

namespace umsa {

/// A probability mass function on {0, ..., N-1}.
class Pmf {
 public:
  Pmf() = default;
  /// Normalises non-negative weights; throws DegenerateWeightsError when
  /// they are all zero or any is NaN/negative.
  explicit Pmf(std::vector<double> weights);

  /// Normalises exp(log_weights) after subtracting the maximum.
  static Pmf from_log_weights(std::span<const double> log_weights);
  /// As above, reusing `out`'s storage.
  static void from_log_weights(std::span<const double> log_weights, Pmf& out);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }

  /// Inverse-CDF draw using one uniform from rng.
  std::size_t sample(RngStream& rng) const;
  /// Inverse-CDF lookup for a given uniform u in [0, 1).
  std::size_t lookup(double u) const;

 private:
  void normalise();

  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// How the residual branch of the maximal coupling pairs its two draws.
enum class ResidualCoupling {
  kIndependent,    // independent draws from the two residual PMFs
  kCommonUniform,  // one uniform through both residual inverse CDFs
};

/// Maximal coupling of two PMFs: P(i == j) equals sum_k min(r1_k, r2_k).
class MaximalCoupling {
 public:
  MaximalCoupling(const Pmf& r1, const Pmf& r2,
                  ResidualCoupling residual = ResidualCoupling::kIndependent);

  std::pair<std::size_t, std::size_t> sample(RngStream& rng) const;
  double overlap() const { return overlap_mass_; }

 private:
  Pmf overlap_;
  Pmf residual1_;
  Pmf residual2_;
  double overlap_mass_ = 0.0;
  bool residual_available_ = false;
  ResidualCoupling residual_mode_;
};

std::pair<std::size_t, std::size_t> maximal_coupling_sample(
    const Pmf& r1, const Pmf& r2, RngStream& rng,
    ResidualCoupling residual = ResidualCoupling::kIndependent);

/// Particle trajectories of one conditional sweep, split into observation
/// segments. Segment 0 holds lattice states [0, k_1]; segment s > 0 holds
/// (k_s, k_{s+1}]. The last slot (N-1) always carries the conditioning path.
class ParticleStore {
 public:
  void reset(const ObservationGrid& grid, std::size_t particles, std::size_t dim);

  std::size_t segments() const { return first_.size(); }
  std::size_t particles() const { return particles_; }
  std::size_t first(std::size_t s) const { return first_[s]; }
  std::size_t length(std::size_t s) const { return length_[s]; }

  std::span<double> states(std::size_t s, std::size_t i);
  std::span<const double> states(std::size_t s, std::size_t i) const;
  std::span<const double> last_state(std::size_t s, std::size_t i) const;

  std::vector<std::size_t>& ancestors(std::size_t s) { return ancestors_[s]; }
  const std::vector<std::size_t>& ancestors(std::size_t s) const { return ancestors_[s]; }

  /// Copies the conditioning path's states for segment s into slot N-1.
  void pin(std::size_t s, const LatticePath& conditioning);
  /// Writes the lineage ending in particle `final_index` into `out`.
  void trace(std::size_t final_index, LatticePath& out) const;

 private:
  std::size_t particles_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> length_;
  std::vector<std::vector<double>> states_;
  std::vector<std::vector<std::size_t>> ancestors_;
};

/// The conditional particle filter kernel K_{theta,l}: leaves the level-l
/// smoothing distribution invariant. Owns its working storage; one instance
/// per chain.
class ConditionalParticleFilter {
 public:
  ConditionalParticleFilter(const SdeModel& model, const ObservationRecord& obs, int level,
                            std::size_t particles);

  /// One sweep with free particles 0..N-2 and the conditioning path in N-1.
  LatticePath sweep(std::span<const double> theta, const LatticePath& conditioning,
                    RngStream& rng);

  const ObservationGrid& grid() const { return grid_; }
  int level() const { return grid_.level; }
  std::size_t particles() const { return particles_; }
  std::uint64_t density_evaluations() const { return density_evals_; }

  /// Storage of the most recent sweep.
  const ParticleStore& store() const { return store_; }
  std::size_t selected() const { return selected_; }
  /// Weight PMFs of the most recent sweep, one per observation.
  const std::vector<Pmf>& weights() const { return weights_; }

 private:
  const SdeModel& model_;
  const ObservationRecord& obs_;
  ObservationGrid grid_;
  std::size_t particles_;
  ParticleStore store_;
  std::vector<Pmf> weights_;
  std::vector<double> log_weights_;
  std::vector<double> scratch_;
  std::size_t selected_ = 0;
  std::uint64_t density_evals_ = 0;
};

/// The coupled conditional particle filter kernel on levels (l, l-1):
/// paired particles move by the synchronous Euler coupling and ancestors are
/// drawn from the maximal coupling of the two levels' weight PMFs.
class CoupledConditionalParticleFilter {
 public:
  CoupledConditionalParticleFilter(const SdeModel& model, const ObservationRecord& obs, int level,
                                   std::size_t particles,
                                   ResidualCoupling residual = ResidualCoupling::kIndependent);

  CoupledPathPair sweep(std::span<const double> theta_fine, std::span<const double> theta_coarse,
                        const CoupledPathPair& conditioning, RngStream& rng);

  const ObservationGrid& fine_grid() const { return fine_grid_; }
  const ObservationGrid& coarse_grid() const { return coarse_grid_; }
  int level() const { return fine_grid_.level; }
  std::size_t particles() const { return particles_; }
  std::uint64_t density_evaluations() const { return density_evals_; }

  const ParticleStore& fine_store() const { return fine_store_; }
  const ParticleStore& coarse_store() const { return coarse_store_; }
  std::pair<std::size_t, std::size_t> selected() const { return selected_; }
  const std::vector<Pmf>& fine_weights() const { return fine_weights_; }
  const std::vector<Pmf>& coarse_weights() const { return coarse_weights_; }

 private:
  const SdeModel& model_;
  const ObservationRecord& obs_;
  ObservationGrid fine_grid_;
  ObservationGrid coarse_grid_;
  std::size_t particles_;
  ResidualCoupling residual_;
  ParticleStore fine_store_;
  ParticleStore coarse_store_;
  std::vector<Pmf> fine_weights_;
  std::vector<Pmf> coarse_weights_;
  std::vector<double> log_weights_;
  std::vector<double> scratch_;
  std::pair<std::size_t, std::size_t> selected_{0, 0};
  std::uint64_t density_evals_ = 0;
};

/// One CPF sweep (constructs a throwaway filter).
LatticePath cpf_step(const SdeModel& model, const ParameterVector& theta, int level,
                     const ObservationRecord& obs, const LatticePath& conditioning,
                     std::size_t particles, RngStream& rng);

/// One CCPF sweep (constructs a throwaway filter).
CoupledPathPair ccpf_step(const SdeModel& model, const ParameterVector& theta_fine,
                          const ParameterVector& theta_coarse, int level,
                          const ObservationRecord& obs, const CoupledPathPair& conditioning,
                          std::size_t particles, RngStream& rng);

}  // namespace umsa
