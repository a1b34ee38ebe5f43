#pragma once

// Closed-form convergence quantities for the global and personal models
// and their validation against simulated Monte-Carlo trajectories.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otapfl/channel.h"
#include "otapfl/common.h"
#include "otapfl/models.h"
#include "otapfl/training.h"

namespace otapfl {

/// Step size or contraction condition violated.
class BoundConditionError : public Error {
 public:
  using Error::Error;
};

struct TheoryConstants {
  double mu = 1.0;     // strong convexity shared by all client losses
  double L = 1.0;      // smoothness of the average loss
  double L_bar = 1.0;  // largest per-client smoothness constant
  double delta = 1.0;  // diameter of the parameter set
  double M = 0.0;      // max_k ||z_k* - w*||
  double r0_sq = 0.0;  // ||w^0 - w*||^2
  double mu_h = 1.0;
  double sigma_h2 = 0.0;
  double sigma2 = 0.0;
  double P = 1.0;
  Eigen::Index d = 1;
  std::size_t K = 1;

  /// Throws ArgumentError for non-positive mu, L, mu_h, delta, P, or mu > L.
  void validate() const;
};

/// Upper limit on eta_g:
///   min{ 2/(mu_h (mu+L)),  2 mu_h mu L K / (sigma_h2 L_bar^2 (1+2 delta)(mu+L)) }
/// with the second operand taken as +inf when sigma_h2 = 0.
double eta_g_max(const TheoryConstants& c);

/// c = 1 - 2 eta_g mu_h mu L/(mu+L) + eta_g^2 sigma_h2 L_bar^2 (1+2 delta)/K.
/// Throws BoundConditionError unless 0 < c < 1.
double contraction_c(const TheoryConstants& c, double eta_g);

/// Steady-state term eta_g^2/(1-c) (sigma_h2 delta L_bar^2 (2+delta)/K
///                                   + d sigma2/(P^2 K^2)).
double noise_floor(const TheoryConstants& c, double eta_g);

/// c^t r0^2 + noise_floor.
double global_error_bound(const TheoryConstants& c, double eta_g, std::int64_t t);

/// One step of the personal-model recursion:
///   (1 - mu eta_l) prev + eta_l^2 lambda^2 M^2 + eta_l^2 lambda^2 w_err
///   + 2 eta_l^2 lambda^2 M sqrt(w_err) + 2 eta_l lambda sqrt(prev w_err).
/// Logs a warning (once per process) when mu eta_l > 1, where contraction
/// is lost; still returns the value.
double personal_recursion_bound(double prev, double w_err,
                                const TheoryConstants& c, double lambda,
                                double eta_l);

struct MannKendall {
  double S = 0.0;
  double variance = 0.0;
  double z = 0.0;
};

/// Mann-Kendall trend statistic with the tie-corrected variance.
MannKendall mann_kendall(std::span<const double> x);

struct RateCheck {
  double C_fit = 0.0;
  bool holds = false;
  double trend_z = 0.0;  // Mann-Kendall z of the ratio sequence
};

/// C_fit = max_t traj[t]/g[t]; holds when C_fit is finite and the ratio
/// sequence shows no upward trend (one-sided Mann-Kendall at 0.05). When
/// `eta_l_used` is given it must equal 2 g(t)/(A mu) (relative 1e-12);
/// otherwise BoundConditionError is thrown.
RateCheck theorem2_rate_check(std::span<const double> trajectory_v_err,
                              std::span<const double> g_of_t, double A,
                              double mu,
                              std::optional<std::span<const double>> eta_l_used = std::nullopt);

/// Largest A with g(t+1)/g(t) >= 1 - g(t)/A for every t in the horizon.
double personal_rate_constant(std::span<const double> g_of_t);

/// eta_l(t) = 2 g(t) / (A mu).
std::vector<double> personal_rate_schedule(std::span<const double> g_of_t, double A,
                                      double mu);

struct ClientOptima {
  ParamVector w_star;
  std::vector<ParamVector> z_star;
  std::vector<ParamVector> v_star;
};

/// Global, per-client and personal minimizers. Closed forms for quadratics;
/// full-gradient descent to gradient norm < 1e-10 for LogisticL2 (shards
/// required). Throws ArgumentError for MLP and BoundConditionError when
/// descent does not converge within the iteration cap.
ClientOptima compute_optima(const std::vector<ModelSpec>& specs,
                            const std::vector<DataShard>& shards, double lambda);

/// Constants of a convex problem: mu = min_k mu_k, L = smoothness of the
/// average loss, L_bar = max_k L_k, M = max_k ||z_k* - w*||, channel moments
/// from the (normalized) model. delta is supplied by the caller.
TheoryConstants derive_constants(const Problem& problem, const ClientOptima& optima,
                                 const ChannelModel& channel,
                                 const ParamVector& w0, double delta);

struct BoundValidationConfig {
  QuadraticEnsembleConfig ensemble;
  std::uint64_t problem_seed = 1;
  ChannelModel channel = ChannelModel::rayleigh(1.0, 0.01);
  // Exactly one of eta_g / eta_g_fraction (of eta_g_max) is used; the
  // fraction wins when set.
  double eta_g = 0.0;
  std::optional<double> eta_g_fraction = 0.5;
  int T = 200;
  std::vector<std::uint64_t> seeds;
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  // eta_l = eta_l_scale / (L_bar + lambda) for the personal-model check.
  double eta_l_scale = 0.5;
  double radius_factor = 1.25;  // projection radius / max optimum norm
  double rate_lambda = 1.0;
  int workers = 1;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct BoundValidationReport {
  TheoryConstants constants;
  double eta_g = 0.0;
  double eta_g_max = 0.0;
  double c = 0.0;
  double projection_radius = 0.0;
  std::vector<double> bound;   // global_error_bound(t)
  std::vector<double> mse;     // Monte-Carlo mean ||w^t - w*||^2
  std::vector<double> mse_se;
  MetricsTable first_run;      // metrics of the first seed, for export
  std::vector<CheckResult> checks;

  bool all_pass() const;
};

/// Runs the quadratic ensemble and checks: the global error bound at every t
/// (3 standard errors of slack), 0 < c < 1 with geometric decay of the
/// transient, the personal-model recursion for each lambda, and the
/// personal rate under the eta_l = 2 g(t)/(A mu) schedule.
BoundValidationReport validate_bounds(const BoundValidationConfig& cfg);

}  // namespace otapfl
