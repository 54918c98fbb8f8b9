#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "umsa/model.hpp"
#include "umsa/rng.hpp"

namespace umsa {

/// A discretised trajectory on the dyadic lattice of step 2^{-level}:
/// steps()+1 states in R^dim stored contiguously.
class LatticePath {
 public:
  LatticePath() = default;
  LatticePath(int level, std::size_t dim, std::size_t steps)
      : level_(level), dim_(dim), states_((steps + 1) * dim, 0.0) {}

  int level() const { return level_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ ? states_.size() / dim_ : 0; }
  std::size_t steps() const { return size() - 1; }
  double time_step() const { return lattice_step(level_); }

  std::span<double> state(std::size_t k) {
    return std::span<double>(states_).subspan(k * dim_, dim_);
  }
  std::span<const double> state(std::size_t k) const {
    return std::span<const double>(states_).subspan(k * dim_, dim_);
  }
  std::span<double> data() { return states_; }
  std::span<const double> data() const { return states_; }

  bool all_finite() const;

  friend bool operator==(const LatticePath&, const LatticePath&) = default;

 private:
  int level_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> states_;
};

/// A level-l path and a level-(l-1) path driven by shared Brownian increments.
struct CoupledPathPair {
  LatticePath fine;
  LatticePath coarse;
};

/// Half-open range [begin, end) of fine-lattice step indices.
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// One Euler-Maruyama step: out = x + a_theta(x) dt + sigma(x) dw.
/// Throws NumericError if the result is not finite.
void euler_step(const SdeModel& model, std::span<const double> theta, std::span<const double> x,
                double dt, std::span<const double> dw, std::span<double> out);

/// Runs increments.size()/d Euler steps from x_start with the supplied
/// Brownian increments, writing every new state (x_start excluded) to `out`.
void propagate_with_increments(const SdeModel& model, std::span<const double> theta, double dt,
                               std::span<const double> x_start,
                               std::span<const double> increments, std::span<double> out);

/// Draws n_steps i.i.d. N(0, dt I) increments from rng and propagates.
/// `scratch` is resized as needed and may be reused between calls.
void propagate(const SdeModel& model, std::span<const double> theta, int level,
               std::span<const double> x_start, std::size_t n_steps, RngStream& rng,
               std::span<double> out, std::vector<double>& scratch);

/// The unit-time kernel: 2^level steps from x_start; returns the block of
/// 2^level states excluding x_start.
std::vector<double> propagate_unit(const SdeModel& model, const ParameterVector& theta, int level,
                                   std::span<const double> x_start, RngStream& rng);

/// Synchronous coupling over one segment. `increments` holds N(0, dt_l I)
/// draws for every fine step in union(fine, coarse); the fine chain uses
/// them one at a time over `fine`, the coarse chain (step 2 dt_l) uses the
/// sum of consecutive pairs over `coarse`. Both ranges are in fine-lattice
/// steps and `coarse` has even endpoints. If coarse_increments is non-empty
/// the summed increments actually used by the coarse chain are written there.
void propagate_coupled_with_increments(const SdeModel& model, std::span<const double> theta_fine,
                                       std::span<const double> theta_coarse, int level,
                                       StepRange fine, StepRange coarse,
                                       std::span<const double> x_fine,
                                       std::span<const double> x_coarse,
                                       std::span<const double> increments,
                                       std::span<double> out_fine, std::span<double> out_coarse,
                                       std::span<double> coarse_increments = {});

/// Draws the union increments (fine first) and runs
/// propagate_coupled_with_increments.
void propagate_coupled(const SdeModel& model, std::span<const double> theta_fine,
                       std::span<const double> theta_coarse, int level, StepRange fine,
                       StepRange coarse, std::span<const double> x_fine,
                       std::span<const double> x_coarse, RngStream& rng,
                       std::span<double> out_fine, std::span<double> out_coarse,
                       std::vector<double>& scratch);

struct CoupledBlock {
  std::vector<double> fine;               // 2^l states
  std::vector<double> coarse;             // 2^{l-1} states
  std::vector<double> fine_increments;    // 2^l increments
  std::vector<double> coarse_increments;  // 2^{l-1} summed increments
};

/// The coupled unit-time kernel at level l >= 1.
CoupledBlock propagate_unit_coupled(const SdeModel& model, const ParameterVector& theta_fine,
                                    const ParameterVector& theta_coarse, int level,
                                    std::span<const double> x_fine,
                                    std::span<const double> x_coarse, RngStream& rng);

/// Samples U_0 ~ mu_theta and runs the Euler recursion for `steps` steps.
LatticePath initial_path(const SdeModel& model, const ParameterVector& theta, int level,
                         std::size_t steps, RngStream& rng);

/// Samples U_0 ~ mu_theta, copies it to the coarse path and runs the
/// synchronous coupling up to fine_steps (level l) / coarse_steps (level l-1).
CoupledPathPair initial_path_coupled(const SdeModel& model, const ParameterVector& theta,
                                     int level, std::size_t fine_steps, std::size_t coarse_steps,
                                     RngStream& rng);

}  // namespace umsa
