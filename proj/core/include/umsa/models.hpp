#pragma once

#include "umsa/model.hpp"

namespace umsa {

/// Ornstein-Uhlenbeck process dX = -theta X dt + sigma dW, X_0 = x0, observed
/// through Y ~ N(X, varsigma^2). theta is unconstrained.
class OuModel final : public SdeModel {
 public:
  OuModel(double sigma, double obs_sd, double x0);

  std::string name() const override { return "ou"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t obs_dim() const override { return 1; }
  std::size_t param_dim() const override { return 1; }
  std::vector<Constraint> constraints() const override { return {Constraint::kUnbounded}; }

  void drift(std::span<const double> theta, std::span<const double> x,
             std::span<double> out) const override;
  void drift_gradient(std::span<const double> theta, std::span<const double> x,
                      std::span<double> out) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  bool constant_diffusion() const override { return true; }

  bool initial_is_point_mass() const override { return true; }
  double log_initial_density(std::span<const double>, std::span<const double>) const override {
    return 0.0;
  }
  void grad_log_initial_density(std::span<const double> theta, std::span<const double> x,
                                std::span<double> out) const override;
  void sample_initial(std::span<const double> theta, RngStream& rng,
                      std::span<double> out) const override;

  double log_obs_density(std::span<const double> theta, std::span<const double> x,
                         std::span<const double> y) const override;
  void grad_log_obs_density(std::span<const double> theta, std::span<const double> x,
                            std::span<const double> y, std::span<double> out) const override;
  void sample_observation(std::span<const double> theta, std::span<const double> x,
                          RngStream& rng, std::span<double> out) const override;

  double sigma() const { return sigma_; }
  double obs_sd() const { return obs_sd_; }
  double x0() const { return x0_; }

 private:
  double sigma_;
  double obs_sd_;
  double x0_;
};

/// log NB(y; r, mu) with NB(y; r, mu) = Gamma(y+r) / (Gamma(r) y!) (r/(r+mu))^r (mu/(r+mu))^y,
/// parameterised by log(mu) so that large means stay finite.
double negative_binomial_log_pmf(double y, double r, double log_mu);

/// Logistic population diffusion after the Lamperti transform X = log(Z)/theta3:
///   dX = [theta1/theta3 - (theta2/theta3) exp(theta3 X)] dt + dW,
///   X_{t1} ~ N(5/theta3, 100/theta3^2),
///   Y = (y1, y2) with y_j ~ NB(theta4, exp(theta3 X)) independently.
/// theta2, theta3 and theta4 are strictly positive.
class KangarooModel final : public SdeModel {
 public:
  KangarooModel() = default;

  std::string name() const override { return "kangaroo"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t obs_dim() const override { return 2; }
  std::size_t param_dim() const override { return 4; }
  std::vector<Constraint> constraints() const override {
    return {Constraint::kUnbounded, Constraint::kPositive, Constraint::kPositive,
            Constraint::kPositive};
  }

  void drift(std::span<const double> theta, std::span<const double> x,
             std::span<double> out) const override;
  void drift_gradient(std::span<const double> theta, std::span<const double> x,
                      std::span<double> out) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  bool constant_diffusion() const override { return true; }

  double log_initial_density(std::span<const double> theta,
                             std::span<const double> x) const override;
  void grad_log_initial_density(std::span<const double> theta, std::span<const double> x,
                                std::span<double> out) const override;
  void sample_initial(std::span<const double> theta, RngStream& rng,
                      std::span<double> out) const override;

  double log_obs_density(std::span<const double> theta, std::span<const double> x,
                         std::span<const double> y) const override;
  void grad_log_obs_density(std::span<const double> theta, std::span<const double> x,
                            std::span<const double> y, std::span<double> out) const override;
  void sample_observation(std::span<const double> theta, std::span<const double> x,
                          RngStream& rng, std::span<double> out) const override;
};

}  // namespace umsa
