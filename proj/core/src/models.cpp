#include "umsa/models.hpp"

#include <cmath>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "umsa/error.hpp"

namespace umsa {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// d/dr and d/dlog(mu) of negative_binomial_log_pmf.
void negative_binomial_log_pmf_gradient(double y, double r, double log_mu, double& d_r,
                                        double& d_log_mu) {
  const double log_r_plus_mu = log_add_exp(std::log(r), log_mu);
  const double inv_r_plus_mu = std::exp(-log_r_plus_mu);
  d_r = boost::math::digamma(y + r) - boost::math::digamma(r) + std::log(r) - log_r_plus_mu + 1.0 -
        (r + y) * inv_r_plus_mu;
  d_log_mu = y - (r + y) * std::exp(log_mu - log_r_plus_mu);
}

double sample_negative_binomial(double r, double mu, RngStream& rng) {
  boost::random::gamma_distribution<double> rate(r, mu / r);
  const double lambda = rate(rng.engine());
  if (lambda <= 0.0) return 0.0;
  boost::random::poisson_distribution<long long, double> count(lambda);
  return static_cast<double>(count(rng.engine()));
}

}  // namespace

// ---------------------------------------------------------------- OU

OuModel::OuModel(double sigma, double obs_sd, double x0) : sigma_(sigma), obs_sd_(obs_sd), x0_(x0) {
  if (!(sigma > 0.0) || !(obs_sd > 0.0)) throw ConfigError("OU sigma and varsigma must be positive");
}

void OuModel::drift(std::span<const double> theta, std::span<const double> x,
                    std::span<double> out) const {
  out[0] = -theta[0] * x[0];
}

void OuModel::drift_gradient(std::span<const double>, std::span<const double> x,
                             std::span<double> out) const {
  out[0] = -x[0];
}

void OuModel::diffusion(std::span<const double>, std::span<double> out) const { out[0] = sigma_; }

void OuModel::grad_log_initial_density(std::span<const double>, std::span<const double>,
                                       std::span<double> out) const {
  out[0] = 0.0;
}

void OuModel::sample_initial(std::span<const double>, RngStream&, std::span<double> out) const {
  out[0] = x0_;
}

double OuModel::log_obs_density(std::span<const double>, std::span<const double> x,
                                std::span<const double> y) const {
  const double z = (y[0] - x[0]) / obs_sd_;
  return -0.5 * z * z - std::log(obs_sd_) - kHalfLog2Pi;
}

void OuModel::grad_log_obs_density(std::span<const double>, std::span<const double>,
                                   std::span<const double>, std::span<double> out) const {
  out[0] = 0.0;
}

void OuModel::sample_observation(std::span<const double>, std::span<const double> x,
                                 RngStream& rng, std::span<double> out) const {
  out[0] = x[0] + obs_sd_ * rng.normal();
}

// ---------------------------------------------------------------- kangaroo

double negative_binomial_log_pmf(double y, double r, double log_mu) {
  const double log_r = std::log(r);
  const double log_r_plus_mu = log_add_exp(log_r, log_mu);
  return boost::math::lgamma(y + r) - boost::math::lgamma(r) - boost::math::lgamma(y + 1.0) +
         r * (log_r - log_r_plus_mu) + y * (log_mu - log_r_plus_mu);
}

void KangarooModel::drift(std::span<const double> theta, std::span<const double> x,
                          std::span<double> out) const {
  out[0] = (theta[0] - theta[1] * std::exp(theta[2] * x[0])) / theta[2];
}

void KangarooModel::drift_gradient(std::span<const double> theta, std::span<const double> x,
                                   std::span<double> out) const {
  const double growth = std::exp(theta[2] * x[0]);
  const double inv3 = 1.0 / theta[2];
  out[0] = inv3;
  out[1] = -growth * inv3;
  out[2] = -(theta[0] - theta[1] * growth) * inv3 * inv3 - theta[1] * inv3 * x[0] * growth;
  out[3] = 0.0;
}

void KangarooModel::diffusion(std::span<const double>, std::span<double> out) const {
  out[0] = 1.0;
}

double KangarooModel::log_initial_density(std::span<const double> theta,
                                          std::span<const double> x) const {
  // theta3 X ~ N(5, 10^2)
  const double z = (theta[2] * x[0] - 5.0) / 10.0;
  return -0.5 * z * z + std::log(theta[2]) - std::log(10.0) - kHalfLog2Pi;
}

void KangarooModel::grad_log_initial_density(std::span<const double> theta,
                                             std::span<const double> x,
                                             std::span<double> out) const {
  out[0] = 0.0;
  out[1] = 0.0;
  out[2] = 1.0 / theta[2] - (theta[2] * x[0] - 5.0) * x[0] / 100.0;
  out[3] = 0.0;
}

void KangarooModel::sample_initial(std::span<const double> theta, RngStream& rng,
                                   std::span<double> out) const {
  out[0] = (5.0 + 10.0 * rng.normal()) / theta[2];
}

double KangarooModel::log_obs_density(std::span<const double> theta, std::span<const double> x,
                                      std::span<const double> y) const {
  const double log_mu = theta[2] * x[0];
  return negative_binomial_log_pmf(y[0], theta[3], log_mu) +
         negative_binomial_log_pmf(y[1], theta[3], log_mu);
}

void KangarooModel::grad_log_obs_density(std::span<const double> theta, std::span<const double> x,
                                         std::span<const double> y, std::span<double> out) const {
  const double log_mu = theta[2] * x[0];
  double d_r = 0.0;
  double d_log_mu = 0.0;
  double total_r = 0.0;
  double total_log_mu = 0.0;
  for (int j = 0; j < 2; ++j) {
    negative_binomial_log_pmf_gradient(y[j], theta[3], log_mu, d_r, d_log_mu);
    total_r += d_r;
    total_log_mu += d_log_mu;
  }
  out[0] = 0.0;
  out[1] = 0.0;
  out[2] = total_log_mu * x[0];
  out[3] = total_r;
}

void KangarooModel::sample_observation(std::span<const double> theta, std::span<const double> x,
                                       RngStream& rng, std::span<double> out) const {
  const double mu = std::exp(theta[2] * x[0]);
  out[0] = sample_negative_binomial(theta[3], mu, rng);
  out[1] = sample_negative_binomial(theta[3], mu, rng);
}

}  // namespace umsa
