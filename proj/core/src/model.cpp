#include "umsa/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "umsa/error.hpp"

namespace umsa {

ParameterVector::ParameterVector(std::vector<double> values, std::vector<Constraint> constraints)
    : values_(std::move(values)), constraints_(std::move(constraints)) {
  if (constraints_.empty()) constraints_.assign(values_.size(), Constraint::kUnbounded);
  if (constraints_.size() != values_.size()) {
    throw ConstraintError("parameter vector has " + std::to_string(values_.size()) +
                          " values but " + std::to_string(constraints_.size()) + " constraints");
  }
}

bool ParameterVector::satisfies_constraints() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) return false;
    if (constraints_[i] == Constraint::kPositive && !(values_[i] > 0.0)) return false;
  }
  return true;
}

void ParameterVector::validate() const {
  if (!satisfies_constraints()) throw ConstraintError("inadmissible parameter " + to_string());
}

std::string ParameterVector::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? ", " : "") << values_[i];
  os << ')';
  return os.str();
}

void SdeModel::check_parameters(const ParameterVector& theta) const {
  if (theta.size() != param_dim()) {
    throw ConstraintError(name() + " expects " + std::to_string(param_dim()) +
                          " parameters, got " + std::to_string(theta.size()));
  }
  const auto declared = constraints();
  for (std::size_t i = 0; i < declared.size(); ++i) {
    if (declared[i] == Constraint::kPositive && !(theta[i] > 0.0)) {
      throw ConstraintError(name() + ": parameter " + std::to_string(i + 1) +
                            " must be strictly positive, got " + theta.to_string());
    }
  }
  theta.validate();
}

ParameterVector SdeModel::make_parameters(std::vector<double> values) const {
  ParameterVector theta(std::move(values), constraints());
  check_parameters(theta);
  return theta;
}

bool ObservationRecord::missing(std::size_t i) const {
  const auto y = value(i);
  return std::any_of(y.begin(), y.end(), [](double v) { return std::isnan(v); });
}

void ObservationRecord::validate() const {
  if (times.empty()) throw ConfigError("observation record is empty");
  if (obs_dim == 0 || values.size() != times.size() * obs_dim) {
    throw ConfigError("observation record has mismatched value count");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ConfigError("observation times must strictly increase");
  }
  if (times.front() < origin) throw ConfigError("observation precedes the path origin");
}

std::vector<std::size_t> align_observation_times(std::span<const double> times, int level,
                                                 double t1) {
  if (level < 0) throw ConfigError("level must be non-negative");
  const double inv_step = static_cast<double>(1ULL << level);
  std::vector<std::size_t> index;
  index.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double k = std::floor((times[i] - t1) * inv_step + 0.5);
    if (k < 0.0) throw ConfigError("observation time lies before the origin");
    const auto ki = static_cast<std::size_t>(k);
    if (!index.empty() && ki <= index.back()) {
      std::ostringstream os;
      os << "observation times " << times[i - 1] << " and " << times[i]
         << " collide at lattice level " << level;
      throw CollisionError(os.str());
    }
    index.push_back(ki);
  }
  return index;
}

ObservationGrid align_observations(const ObservationRecord& obs, int level) {
  obs.validate();
  ObservationGrid grid;
  grid.level = level;
  grid.index = align_observation_times(obs.times, level, obs.origin);
  if (grid.steps() == 0) throw ConfigError("observation window has zero length");
  return grid;
}

}  // namespace umsa
