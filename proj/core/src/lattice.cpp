#include "umsa/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "umsa/error.hpp"

namespace umsa {

namespace {

std::string describe(std::span<const double> v) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

// Euler stepper with cached buffers; sigma is cached once when constant.
class Stepper {
 public:
  Stepper(const SdeModel& model, std::span<const double> theta, double dt)
      : model_(model),
        theta_(theta),
        dt_(dt),
        dim_(model.state_dim()),
        drift_(dim_),
        sigma_(dim_ * dim_),
        constant_sigma_(model.constant_diffusion()) {
    if (constant_sigma_) model_.diffusion({}, sigma_);
  }

  void step(std::span<const double> x, std::span<const double> dw, std::span<double> out) {
    model_.drift(theta_, x, drift_);
    if (!constant_sigma_) model_.diffusion(x, sigma_);
    bool finite = true;
    if (dim_ == 1) {
      out[0] = x[0] + drift_[0] * dt_ + sigma_[0] * dw[0];
      finite = std::isfinite(out[0]);
    } else {
      for (std::size_t i = 0; i < dim_; ++i) {
        double noise = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) noise += sigma_[i * dim_ + j] * dw[j];
        out[i] = x[i] + drift_[i] * dt_ + noise;
        finite = finite && std::isfinite(out[i]);
      }
    }
    if (!finite) {
      throw NumericError("Euler step overflow for " + model_.name() + " at theta=" +
                         describe(theta_) + ", x=" + describe(x));
    }
  }

 private:
  const SdeModel& model_;
  std::span<const double> theta_;
  double dt_;
  std::size_t dim_;
  std::vector<double> drift_;
  std::vector<double> sigma_;
  bool constant_sigma_;
};

}  // namespace

bool LatticePath::all_finite() const {
  return std::all_of(states_.begin(), states_.end(), [](double v) { return std::isfinite(v); });
}

void euler_step(const SdeModel& model, std::span<const double> theta, std::span<const double> x,
                double dt, std::span<const double> dw, std::span<double> out) {
  if (!(dt > 0.0)) throw ConfigError("Euler step requires dt > 0");
  Stepper(model, theta, dt).step(x, dw, out);
}

void propagate_with_increments(const SdeModel& model, std::span<const double> theta, double dt,
                               std::span<const double> x_start,
                               std::span<const double> increments, std::span<double> out) {
  const std::size_t d = model.state_dim();
  const std::size_t n = increments.size() / d;
  Stepper stepper(model, theta, dt);
  std::span<const double> previous = x_start;
  for (std::size_t k = 0; k < n; ++k) {
    auto next = out.subspan(k * d, d);
    stepper.step(previous, increments.subspan(k * d, d), next);
    previous = next;
  }
}

void propagate(const SdeModel& model, std::span<const double> theta, int level,
               std::span<const double> x_start, std::size_t n_steps, RngStream& rng,
               std::span<double> out, std::vector<double>& scratch) {
  const std::size_t d = model.state_dim();
  const double dt = lattice_step(level);
  scratch.resize(n_steps * d);
  rng.fill_normal(scratch, dt);
  propagate_with_increments(model, theta, dt, x_start, scratch, out);
}

std::vector<double> propagate_unit(const SdeModel& model, const ParameterVector& theta, int level,
                                   std::span<const double> x_start, RngStream& rng) {
  if (level < 0) throw ConfigError("level must be non-negative");
  const std::size_t n = 1ULL << level;
  std::vector<double> block(n * model.state_dim());
  std::vector<double> scratch;
  propagate(model, theta.values(), level, x_start, n, rng, block, scratch);
  return block;
}

void propagate_coupled_with_increments(const SdeModel& model, std::span<const double> theta_fine,
                                       std::span<const double> theta_coarse, int level,
                                       StepRange fine, StepRange coarse,
                                       std::span<const double> x_fine,
                                       std::span<const double> x_coarse,
                                       std::span<const double> increments,
                                       std::span<double> out_fine, std::span<double> out_coarse,
                                       std::span<double> coarse_increments) {
  if (level < 1) throw ConfigError("coupled propagation requires level >= 1");
  if (coarse.begin % 2 != 0 || coarse.end % 2 != 0) {
    throw ConfigError("coarse range must lie on the coarse lattice");
  }
  const std::size_t d = model.state_dim();
  const std::size_t origin = std::min(fine.begin, coarse.begin);
  const double dt = lattice_step(level);

  propagate_with_increments(model, theta_fine, dt, x_fine,
                            increments.subspan((fine.begin - origin) * d, fine.size() * d),
                            out_fine);

  Stepper stepper(model, theta_coarse, 2.0 * dt);
  std::vector<double> summed(d);
  std::span<const double> previous = x_coarse;
  std::size_t j = 0;
  for (std::size_t k = coarse.begin; k < coarse.end; k += 2, ++j) {
    const double* first = increments.data() + (k - origin) * d;
    const double* second = first + d;
    for (std::size_t i = 0; i < d; ++i) summed[i] = first[i] + second[i];
    if (!coarse_increments.empty()) {
      std::copy(summed.begin(), summed.end(), coarse_increments.begin() + j * d);
    }
    auto next = out_coarse.subspan(j * d, d);
    stepper.step(previous, summed, next);
    previous = next;
  }
}

void propagate_coupled(const SdeModel& model, std::span<const double> theta_fine,
                       std::span<const double> theta_coarse, int level, StepRange fine,
                       StepRange coarse, std::span<const double> x_fine,
                       std::span<const double> x_coarse, RngStream& rng,
                       std::span<double> out_fine, std::span<double> out_coarse,
                       std::vector<double>& scratch) {
  const std::size_t origin = std::min(fine.begin, coarse.begin);
  const std::size_t end = std::max(fine.end, coarse.end);
  scratch.resize((end - origin) * model.state_dim());
  rng.fill_normal(scratch, lattice_step(level));
  propagate_coupled_with_increments(model, theta_fine, theta_coarse, level, fine, coarse, x_fine,
                                    x_coarse, scratch, out_fine, out_coarse);
}

CoupledBlock propagate_unit_coupled(const SdeModel& model, const ParameterVector& theta_fine,
                                    const ParameterVector& theta_coarse, int level,
                                    std::span<const double> x_fine,
                                    std::span<const double> x_coarse, RngStream& rng) {
  if (level < 1) throw ConfigError("coupled propagation requires level >= 1");
  const std::size_t d = model.state_dim();
  const std::size_t n = 1ULL << level;
  CoupledBlock block;
  block.fine.resize(n * d);
  block.coarse.resize(n / 2 * d);
  block.fine_increments.resize(n * d);
  block.coarse_increments.resize(n / 2 * d);
  rng.fill_normal(block.fine_increments, lattice_step(level));
  propagate_coupled_with_increments(model, theta_fine.values(), theta_coarse.values(), level,
                                    {0, n}, {0, n}, x_fine, x_coarse, block.fine_increments,
                                    block.fine, block.coarse, block.coarse_increments);
  return block;
}

LatticePath initial_path(const SdeModel& model, const ParameterVector& theta, int level,
                         std::size_t steps, RngStream& rng) {
  const std::size_t d = model.state_dim();
  LatticePath path(level, d, steps);
  model.sample_initial(theta.values(), rng, path.state(0));
  std::vector<double> scratch;
  propagate(model, theta.values(), level, path.state(0), steps, rng,
            path.data().subspan(d), scratch);
  return path;
}

CoupledPathPair initial_path_coupled(const SdeModel& model, const ParameterVector& theta,
                                     int level, std::size_t fine_steps, std::size_t coarse_steps,
                                     RngStream& rng) {
  const std::size_t d = model.state_dim();
  CoupledPathPair pair{LatticePath(level, d, fine_steps), LatticePath(level - 1, d, coarse_steps)};
  model.sample_initial(theta.values(), rng, pair.fine.state(0));
  std::copy(pair.fine.state(0).begin(), pair.fine.state(0).end(), pair.coarse.state(0).begin());
  std::vector<double> scratch;
  propagate_coupled(model, theta.values(), theta.values(), level, {0, fine_steps},
                    {0, 2 * coarse_steps}, pair.fine.state(0), pair.coarse.state(0), rng,
                    pair.fine.data().subspan(d), pair.coarse.data().subspan(d), scratch);
  return pair;
}

}  // namespace umsa
