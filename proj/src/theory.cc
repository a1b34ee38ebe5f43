#include "otapfl/theory.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

namespace otapfl {

void TheoryConstants::validate() const {
  if (!(mu > 0.0)) throw ArgumentError("mu must be positive");
  if (!(L > 0.0)) throw ArgumentError("L must be positive");
  if (mu > L * (1.0 + 1e-12)) throw ArgumentError("mu must not exceed L");
  if (!(L_bar > 0.0)) throw ArgumentError("L_bar must be positive");
  if (!(mu_h > 0.0)) throw ArgumentError("mu_h must be positive");
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  if (!(P > 0.0)) throw ArgumentError("P must be positive");
  if (!(sigma_h2 >= 0.0 && sigma2 >= 0.0 && M >= 0.0 && r0_sq >= 0.0)) {
    throw ArgumentError("variances, M and r0^2 must be non-negative");
  }
  if (K < 1 || d < 1) throw ArgumentError("K and d must be positive");
}

double eta_g_max(const TheoryConstants& c) {
  c.validate();
  const double first = 2.0 / (c.mu_h * (c.mu + c.L));
  if (c.sigma_h2 == 0.0) return first;
  const double second = 2.0 * c.mu_h * c.mu * c.L * static_cast<double>(c.K) /
                        (c.sigma_h2 * c.L_bar * c.L_bar * (1.0 + 2.0 * c.delta) *
                         (c.mu + c.L));
  return std::min(first, second);
}

double contraction_c(const TheoryConstants& c, double eta_g) {
  c.validate();
  if (!(eta_g > 0.0)) throw BoundConditionError("eta_g must be positive");
  const double value = 1.0 - 2.0 * eta_g * c.mu_h * c.mu * c.L / (c.mu + c.L) +
                       eta_g * eta_g * c.sigma_h2 * c.L_bar * c.L_bar *
                           (1.0 + 2.0 * c.delta) / static_cast<double>(c.K);
  if (!(value > 0.0 && value < 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "contraction constant c = " << value << " outside (0, 1) for eta_g = "
       << eta_g << " (eta_g_max = " << eta_g_max(c) << ")";
    throw BoundConditionError(os.str());
  }
  return value;
}

double noise_floor(const TheoryConstants& c, double eta_g) {
  const double cc = contraction_c(c, eta_g);
  const double K = static_cast<double>(c.K);
  const double fading = c.sigma_h2 * c.delta * c.L_bar * c.L_bar * (2.0 + c.delta) / K;
  const double noise = static_cast<double>(c.d) * c.sigma2 / (c.P * c.P * K * K);
  return eta_g * eta_g / (1.0 - cc) * (fading + noise);
}

double global_error_bound(const TheoryConstants& c, double eta_g, std::int64_t t) {
  if (t < 0) throw ArgumentError("round index must be >= 0");
  const double cc = contraction_c(c, eta_g);
  return std::pow(cc, static_cast<double>(t)) * c.r0_sq + noise_floor(c, eta_g);
}

double personal_recursion_bound(double prev, double w_err,
                                const TheoryConstants& c, double lambda,
                                double eta_l) {
  if (!(prev >= 0.0 && w_err >= 0.0)) {
    throw ArgumentError("recursion inputs must be non-negative");
  }
  static std::atomic<bool> warned{false};
  if (c.mu * eta_l > 1.0 && !warned.exchange(true)) {
    spdlog::warn("mu * eta_l = {} > 1: personal recursion no longer contracts",
                 c.mu * eta_l);
  }
  const double el2 = eta_l * eta_l;
  const double lam2 = lambda * lambda;
  return (1.0 - c.mu * eta_l) * prev + el2 * lam2 * c.M * c.M +
         el2 * lam2 * w_err + 2.0 * el2 * lam2 * c.M * std::sqrt(w_err) +
         2.0 * eta_l * lambda * std::sqrt(prev * w_err);
}

MannKendall mann_kendall(std::span<const double> x) {
  MannKendall mk;
  const std::size_t n = x.size();
  if (n < 3) return mk;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      mk.S += (x[j] > x[i]) - (x[j] < x[i]);
    }
  }
  std::map<double, int> ties;
  for (double v : x) ++ties[v];
  const double nd = static_cast<double>(n);
  double var = nd * (nd - 1) * (2 * nd + 5);
  for (const auto& [value, count] : ties) {
    const double t = count;
    var -= t * (t - 1) * (2 * t + 5);
  }
  mk.variance = var / 18.0;
  if (mk.variance > 0.0) {
    if (mk.S > 0) mk.z = (mk.S - 1) / std::sqrt(mk.variance);
    if (mk.S < 0) mk.z = (mk.S + 1) / std::sqrt(mk.variance);
  }
  return mk;
}

RateCheck theorem2_rate_check(std::span<const double> trajectory_v_err,
                              std::span<const double> g_of_t, double A,
                              double mu,
                              std::optional<std::span<const double>> eta_l_used) {
  if (trajectory_v_err.size() != g_of_t.size() || g_of_t.empty()) {
    throw DimensionError("trajectory and g(t) must have the same non-zero length");
  }
  if (!(A > 0.0 && mu > 0.0)) throw ArgumentError("A and mu must be positive");
  for (double g : g_of_t) {
    if (!(g > 0.0)) throw ArgumentError("g(t) must be positive");
  }
  if (eta_l_used) {
    const auto& used = *eta_l_used;
    const std::size_t n = std::min(used.size(), g_of_t.size());
    for (std::size_t t = 0; t < n; ++t) {
      const double want = 2.0 * g_of_t[t] / (A * mu);
      if (std::abs(used[t] - want) > 1e-12 * want) {
        std::ostringstream os;
        os.precision(17);
        os << "local rate in round " << t << " is " << used[t]
           << ", schedule 2 g(t)/(A mu) requires " << want;
        throw BoundConditionError(os.str());
      }
    }
  }
  std::vector<double> ratio(g_of_t.size());
  RateCheck out;
  for (std::size_t t = 0; t < g_of_t.size(); ++t) {
    ratio[t] = trajectory_v_err[t] / g_of_t[t];
    out.C_fit = std::max(out.C_fit, ratio[t]);
  }
  const MannKendall mk = mann_kendall(ratio);
  out.trend_z = mk.z;
  constexpr double kZ95 = 1.6448536269514722;  // one-sided 0.05
  out.holds = std::isfinite(out.C_fit) && mk.z <= kZ95;
  return out;
}

double personal_rate_constant(std::span<const double> g_of_t) {
  double A = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < g_of_t.size(); ++t) {
    const double drop = g_of_t[t] - g_of_t[t + 1];
    if (drop > 0.0) A = std::min(A, g_of_t[t] * g_of_t[t] / drop);
  }
  if (!std::isfinite(A)) {
    throw BoundConditionError("g(t) never decreases; no finite A exists");
  }
  return A;
}

std::vector<double> personal_rate_schedule(std::span<const double> g_of_t, double A,
                                      double mu) {
  std::vector<double> out(g_of_t.size());
  for (std::size_t t = 0; t < g_of_t.size(); ++t) out[t] = 2.0 * g_of_t[t] / (A * mu);
  return out;
}

namespace {

DataBatch batch_of(const std::vector<DataShard>& shards, std::size_t k) {
  return shards.empty() ? DataBatch{} : DataBatch::full(shards[k]);
}

// Full-gradient descent at rate 1/L on sum_k weight_k F_k + prox term.
ParamVector descend(const std::vector<ModelSpec>& specs,
                    const std::vector<DataShard>& shards,
                    const std::vector<std::size_t>& members, double lambda,
                    const ParamVector& anchor, double L, const std::string& what) {
  ParamVector x = ParamVector::Zero(specs.front().dimension());
  const double rate = 1.0 / (L + lambda);
  constexpr int kMaxIter = 2000000;
  for (int it = 0; it < kMaxIter; ++it) {
    ParamVector g = ParamVector::Zero(x.size());
    for (auto k : members) g += grad(specs[k], x, batch_of(shards, k));
    g /= static_cast<double>(members.size());
    g += lambda * (x - anchor);
    if (g.norm() < 1e-10) return x;
    x -= rate * g;
  }
  throw BoundConditionError("gradient descent for " + what +
                            " did not reach ||grad|| < 1e-10");
}

}  // namespace

ClientOptima compute_optima(const std::vector<ModelSpec>& specs,
                            const std::vector<DataShard>& shards, double lambda) {
  if (specs.empty()) throw ArgumentError("compute_optima: no clients");
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  for (const auto& s : specs) {
    if (!s.is_convex()) throw ArgumentError("optima need convex client losses");
  }
  const std::size_t K = specs.size();
  const Eigen::Index d = specs.front().dimension();
  ClientOptima out;

  if (specs.front().kind() == ModelKind::kQuadratic) {
    Matrix sum_a = Matrix::Zero(d, d);
    ParamVector sum_b = ParamVector::Zero(d);
    for (const auto& s : specs) {
      sum_a += s.A();
      sum_b += s.A() * s.center();
    }
    out.w_star = sum_a.ldlt().solve(sum_b);
    for (const auto& s : specs) {
      out.z_star.push_back(s.center());
      const Matrix reg = s.A() + lambda * Matrix::Identity(d, d);
      out.v_star.push_back(reg.ldlt().solve(s.A() * s.center() + lambda * out.w_star));
    }
    return out;
  }

  if (shards.size() != K) throw ArgumentError("logistic optima need one shard per client");
  double L = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    L = std::max(L, convexity_constants(specs[k], &shards[k]).L);
  }
  std::vector<std::size_t> all(K);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const ParamVector zero = ParamVector::Zero(d);
  out.w_star = descend(specs, shards, all, 0.0, zero, L, "w*");
  for (std::size_t k = 0; k < K; ++k) {
    out.z_star.push_back(descend(specs, shards, {k}, 0.0, zero, L,
                                 "z*_" + std::to_string(k)));
    out.v_star.push_back(descend(specs, shards, {k}, lambda, out.w_star, L,
                                 "v*_" + std::to_string(k)));
  }
  return out;
}

TheoryConstants derive_constants(const Problem& problem, const ClientOptima& optima,
                                 const ChannelModel& channel,
                                 const ParamVector& w0, double delta) {
  problem.validate();
  const ChannelModel ch = channel.normalized();
  TheoryConstants c;
  c.mu = std::numeric_limits<double>::infinity();
  c.L_bar = 0.0;
  double L_mean = 0.0;
  Matrix A_mean;
  const bool quad = problem.specs.front().kind() == ModelKind::kQuadratic;
  if (quad) A_mean = Matrix::Zero(problem.dimension(), problem.dimension());
  for (std::size_t k = 0; k < problem.K(); ++k) {
    const DataShard* shard = problem.train.empty() ? nullptr : &problem.train[k];
    const auto kc = convexity_constants(problem.specs[k], shard);
    c.mu = std::min(c.mu, kc.mu);
    c.L_bar = std::max(c.L_bar, kc.L);
    L_mean += kc.L / static_cast<double>(problem.K());
    if (quad) A_mean += problem.specs[k].A() / static_cast<double>(problem.K());
  }
  if (quad) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A_mean, Eigen::EigenvaluesOnly);
    c.L = es.eigenvalues().maxCoeff();
  } else {
    c.L = L_mean;
  }
  c.M = 0.0;
  for (const auto& z : optima.z_star) c.M = std::max(c.M, (z - optima.w_star).norm());
  c.r0_sq = (w0 - optima.w_star).squaredNorm();
  c.delta = delta;
  c.mu_h = ch.mu_h;
  c.sigma_h2 = ch.sigma_h2;
  c.sigma2 = ch.sigma2;
  c.P = ch.power;
  c.d = problem.dimension();
  c.K = problem.K();
  c.validate();
  return c;
}

bool BoundValidationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

BoundValidationReport validate_bounds(const BoundValidationConfig& cfg) {
  if (cfg.seeds.empty()) throw ArgumentError("bound validation needs seeds");
  if (cfg.T < 1) throw ArgumentError("bound validation needs T >= 1");
  BoundValidationReport rep;

  Problem problem;
  problem.specs = make_quadratic_ensemble(cfg.ensemble, cfg.problem_seed);
  const Eigen::Index d = problem.dimension();
  const ParamVector w0 = ParamVector::Zero(d);

  std::vector<double> lambdas = cfg.lambdas;
  lambdas.push_back(cfg.rate_lambda);
  std::vector<ClientOptima> optima;
  double max_norm = w0.norm();
  for (double lam : lambdas) {
    optima.push_back(compute_optima(problem.specs, {}, lam));
    const auto& o = optima.back();
    max_norm = std::max(max_norm, o.w_star.norm());
    for (const auto& z : o.z_star) max_norm = std::max(max_norm, z.norm());
    for (const auto& v : o.v_star) max_norm = std::max(max_norm, v.norm());
  }
  rep.projection_radius = cfg.radius_factor * max_norm;
  problem.w_star = optima.front().w_star;

  rep.constants = derive_constants(problem, optima.front(), cfg.channel, w0,
                                   2.0 * rep.projection_radius);
  const TheoryConstants& k = rep.constants;
  rep.eta_g_max = eta_g_max(k);
  rep.eta_g = cfg.eta_g_fraction ? *cfg.eta_g_fraction * rep.eta_g_max : cfg.eta_g;
  if (!(rep.eta_g > 0.0 && rep.eta_g < rep.eta_g_max)) {
    throw BoundConditionError("eta_g = " + fmt_num(rep.eta_g) +
                              " violates 0 < eta_g < eta_g_max = " +
                              fmt_num(rep.eta_g_max));
  }
  rep.c = contraction_c(k, rep.eta_g);
  for (int t = 0; t <= cfg.T; ++t) rep.bound.push_back(global_error_bound(k, rep.eta_g, t));
  const double floor = noise_floor(k, rep.eta_g);

  TrainerConfig tc;
  tc.algorithm = Algorithm::kPersonalizedAota;
  tc.eta_g = rep.eta_g;
  tc.T = cfg.T;
  tc.local_steps = 1;
  tc.batch_size = 0;
  tc.projection_radius = rep.projection_radius;
  tc.initial_w = w0;

  // Global bound and personal recursion, one ensemble per lambda. The
  // global trajectory does not depend on lambda, so the first run supplies
  // the global statistics.
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    const double lam = cfg.lambdas[li];
    problem.v_star = optima[li].v_star;
    tc.lambda = lam;
    tc.eta_l = cfg.eta_l_scale / (k.L_bar + lam);
    const EnsembleResult ens = run_ensemble(problem, tc, cfg.channel, cfg.seeds, cfg.workers);
    if (li == 0) {
      rep.mse = ens.w_mse;
      rep.mse_se = ens.w_mse_se;
      TrainerConfig one = tc;
      one.seed = cfg.seeds.front();
      one.channel_seed = cfg.seeds.front();
      rep.first_run = run_experiment(problem, one, cfg.channel);
    }
    double worst = -std::numeric_limits<double>::infinity();
    std::string where;
    for (std::size_t c = 0; c < problem.K(); ++c) {
      double rec = (w0 - optima[li].v_star[c]).squaredNorm();
      for (int t = 0; t <= cfg.T; ++t) {
        // Rounding slack: at t = 0 the simulated value equals rec exactly.
        const double excess = ens.v_mse[static_cast<std::size_t>(t)][c] -
                              (rec + 3.0 * ens.v_mse_se[static_cast<std::size_t>(t)][c]) -
                              1e-12 * std::max(1.0, rec);
        if (excess > worst) {
          worst = excess;
          where = "client " + std::to_string(c) + ", t=" + std::to_string(t);
        }
        // Once mu eta_l > 1 the recursion can turn negative; clamped at 0
        // it still fails against any positive simulated error.
        rec = std::max(0.0, personal_recursion_bound(rec, rep.bound[static_cast<std::size_t>(t)],
                                                     k, lam, tc.eta_l));
      }
    }
    rep.checks.push_back({"personal_recursion_lambda_" + fmt_num(lam), worst <= 0.0,
                          "max(mse - recursion - 3se) = " + fmt_num(worst) + " at " + where});
  }

  {
    double worst = -std::numeric_limits<double>::infinity();
    int at = 0;
    for (int t = 0; t <= cfg.T; ++t) {
      const auto i = static_cast<std::size_t>(t);
      const double excess = rep.mse[i] - (rep.bound[i] + 3.0 * rep.mse_se[i]);
      if (excess > worst) {
        worst = excess;
        at = t;
      }
    }
    rep.checks.insert(rep.checks.begin(),
                      {"global_bound", worst <= 0.0,
                       "max(mse - bound - 3se) = " + fmt_num(worst) + " at t=" +
                           std::to_string(at) + "; c=" + fmt_num(rep.c) +
                           ", floor=" + fmt_num(floor)});
  }

  {
    // Transient decay while the simulated error is well above its floor.
    const std::size_t n = rep.mse.size();
    double sim_floor = 0.0;
    std::size_t tail = 0;
    for (std::size_t t = n - std::max<std::size_t>(1, n / 4); t < n; ++t, ++tail) {
      sim_floor += rep.mse[t];
    }
    sim_floor /= static_cast<double>(tail);
    double log_sum = 0.0;
    int steps = 0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      const double a = rep.mse[t] - sim_floor;
      const double b = rep.mse[t + 1] - sim_floor;
      if (b <= sim_floor || a <= 0.0) break;
      log_sum += std::log(b / a);
      ++steps;
    }
    const double measured = steps > 0 ? std::exp(log_sum / steps) : 0.0;
    const bool ok = rep.c > 0.0 && rep.c < 1.0 && measured <= rep.c + 0.05;
    rep.checks.insert(rep.checks.begin() + 1,
                      {"contraction", ok,
                       "c=" + fmt_num(rep.c) + ", measured transient ratio=" +
                           fmt_num(measured) + " over " + std::to_string(steps) +
                           " rounds"});
  }

  {
    const std::vector<double> g(rep.bound.begin(), rep.bound.end());
    const double A = personal_rate_constant(g);
    const auto schedule = personal_rate_schedule(g, A, k.mu);
    const std::size_t li = lambdas.size() - 1;
    problem.v_star = optima[li].v_star;
    TrainerConfig t2 = tc;
    t2.lambda = cfg.rate_lambda;
    t2.eta_l_schedule = [schedule](std::int64_t t) {
      return schedule[static_cast<std::size_t>(std::min<std::int64_t>(
          t, static_cast<std::int64_t>(schedule.size()) - 1))];
    };
    const EnsembleResult ens = run_ensemble(problem, t2, cfg.channel, cfg.seeds, cfg.workers);
    std::vector<double> traj(g.size(), 0.0);
    for (std::size_t t = 0; t < g.size(); ++t) {
      for (double v : ens.v_mse[t]) traj[t] = std::max(traj[t], v);
    }
    std::vector<double> used;
    for (int t = 0; t < cfg.T; ++t) used.push_back(t2.eta_l_at(t));
    const RateCheck rc =
        theorem2_rate_check(traj, g, A, k.mu, std::span<const double>(used));
    rep.checks.push_back({"personal_rate", rc.holds,
                          "C_fit=" + fmt_num(rc.C_fit) + ", A=" + fmt_num(A) +
                              ", trend z=" + fmt_num(rc.trend_z)});
  }
  return rep;
}

}  // namespace otapfl
