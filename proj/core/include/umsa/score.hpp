#pragma once

#include <span>
#include <vector>

#include "umsa/lattice.hpp"
#include "umsa/model.hpp"

namespace umsa {

/// The four parts of the discretised score H_l(theta, U_{0:T}); each has
/// length d_theta.
struct ScoreBreakdown {
  std::vector<double> drift_quadratic;      // -dt/2 grad ||b||^2 with b = sigma^{-1} a
  std::vector<double> stochastic_integral;  // grad a^T Sigma^{-1} dx summed
  std::vector<double> observation;          // sum of grad log g at observation points
  std::vector<double> initial;              // grad log mu at U_0

  std::vector<double> total() const;
};

/// Evaluates every part of H_l along `path`. The observation term uses
/// `grid` (aligned at path.level()) to locate the observed states.
/// Throws NumericError naming the first non-finite part.
ScoreBreakdown score_breakdown(const SdeModel& model, std::span<const double> theta,
                               const LatticePath& path, const ObservationGrid& grid,
                               const ObservationRecord& obs);

/// H_l(theta, path): gradient in theta of the log of mu_theta(u_0) times the
/// observation densities times the discretised Girsanov weight.
std::vector<double> score_h_l(const SdeModel& model, std::span<const double> theta,
                              const LatticePath& path, const ObservationGrid& grid,
                              const ObservationRecord& obs);

}  // namespace umsa
