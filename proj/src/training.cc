#include "otapfl/training.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "otapfl/parallel.h"

namespace otapfl {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kPersonalizedAota: return "personalized";
    case Algorithm::kOtaFedAvg: return "fedavg";
    case Algorithm::kOtaFedProx: return "fedprox";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "personalized") return Algorithm::kPersonalizedAota;
  if (s == "fedavg") return Algorithm::kOtaFedAvg;
  if (s == "fedprox") return Algorithm::kOtaFedProx;
  throw ArgumentError("unknown algorithm '" + s + "'");
}

void TrainerConfig::validate() const {
  if (!(eta_g > 0.0)) throw ArgumentError("eta_g must be positive");
  if (!eta_l_schedule && !(eta_l > 0.0)) throw ArgumentError("eta_l must be positive");
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  if (!(mu_prox >= 0.0)) throw ArgumentError("mu_prox must be >= 0");
  if (T < 0) throw ArgumentError("T must be >= 0");
  if (local_steps < 1) throw ArgumentError("local_steps must be >= 1");
  if (batch_size < 0) throw ArgumentError("batch_size must be >= 0");
  if (projection_radius && !(*projection_radius > 0.0)) {
    throw ArgumentError("projection_radius must be positive");
  }
}

void Problem::validate() const {
  if (specs.empty()) throw ArgumentError("problem has no clients");
  for (const auto& s : specs) {
    check_dims(s.dimension(), dimension(), "client model dimension");
  }
  const bool needs_data = specs.front().uses_data();
  if (needs_data && train.size() != specs.size()) {
    throw ArgumentError("problem needs one training shard per client");
  }
  if (!test.empty() && test.size() != specs.size()) {
    throw ArgumentError("problem needs zero or K test shards");
  }
  if (w_star) check_dims(w_star->size(), dimension(), "w*");
  if (v_star && v_star->size() != specs.size()) {
    throw ArgumentError("v* needs one entry per client");
  }
}

Rng client_stream(std::uint64_t seed, int client_id, std::int64_t t,
                  StreamPurpose purpose) {
  return make_stream(seed, StreamTag::kClient, static_cast<std::uint64_t>(client_id),
                     static_cast<std::uint64_t>(t) * 2 +
                         static_cast<std::uint64_t>(purpose));
}

DataBatch draw_batch(const DataShard* shard, int batch_size, Rng& rng) {
  if (shard == nullptr) return DataBatch{};
  const Eigen::Index n = shard->size();
  if (batch_size <= 0 || batch_size >= n) return DataBatch::full(*shard);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (int i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(batch_size));
  std::sort(idx.begin(), idx.end());
  return DataBatch{shard, std::move(idx)};
}

ParamVector personal_grad(const ModelSpec& spec, const ParamVector& v,
                          const ParamVector& w, double lambda,
                          const DataBatch& batch) {
  check_dims(v.size(), spec.dimension(), "personal model");
  check_dims(w.size(), spec.dimension(), "global model");
  return grad(spec, v, batch) + lambda * (v - w);
}

void project_to_ball(ParamVector& x, std::optional<double> radius) {
  if (!radius) return;
  const double n = x.norm();
  if (n > *radius) x *= *radius / n;
}

namespace {

void require_finite(const ParamVector& x, const std::string& where) {
  if (!x.allFinite()) throw NumericalError("non-finite values in " + where);
}

bool samples_batches(const DataShard* shard, int batch_size) {
  return shard != nullptr && batch_size > 0 && batch_size < shard->size();
}

// Full-batch rounds never touch the stream, so it is only built on demand.
std::optional<Rng> maybe_stream(const ClientState& client, const TrainerConfig& cfg,
                                std::int64_t t, StreamPurpose purpose) {
  if (!samples_batches(client.shard, cfg.batch_size)) return std::nullopt;
  return client_stream(cfg.seed, client.client_id, t, purpose);
}

DataBatch next_batch(const DataShard* shard, int batch_size, std::optional<Rng>& rng) {
  if (!rng) return shard ? DataBatch::full(*shard) : DataBatch{};
  return draw_batch(shard, batch_size, *rng);
}

}  // namespace

void personal_step(ClientState& client, const ParamVector& w,
                   const TrainerConfig& cfg, std::int64_t t) {
  auto rng = maybe_stream(client, cfg, t, StreamPurpose::kPersonal);
  const double rate = cfg.eta_l_at(t);
  for (int step = 0; step < cfg.local_steps; ++step) {
    const DataBatch batch = next_batch(client.shard, cfg.batch_size, rng);
    client.v -= rate * personal_grad(*client.spec, client.v, w, cfg.lambda, batch);
    project_to_ball(client.v, cfg.projection_radius);
    if (!client.v.allFinite()) {
      throw NumericalError("non-finite personal model: round " + std::to_string(t) +
                           ", client " + std::to_string(client.client_id) +
                           ", step " + std::to_string(step));
    }
  }
}

ParamVector client_update(const ClientState& client, const ParamVector& w,
                          const TrainerConfig& cfg, std::int64_t t) {
  auto rng = maybe_stream(client, cfg, t, StreamPurpose::kGlobalGradient);
  if (cfg.algorithm == Algorithm::kPersonalizedAota) {
    ParamVector g = grad(*client.spec, w, next_batch(client.shard, cfg.batch_size, rng));
    require_finite(g, "gradient of client " + std::to_string(client.client_id));
    return g;
  }
  // Baselines: local SGD from w; transmit the mean of the applied gradients
  // (the local displacement divided by eta_l * steps).
  const double rate = cfg.eta_l_at(t);
  const double mu = cfg.algorithm == Algorithm::kOtaFedProx ? cfg.mu_prox : 0.0;
  ParamVector local = w;
  ParamVector sum = ParamVector::Zero(w.size());
  for (int step = 0; step < cfg.local_steps; ++step) {
    const DataBatch batch = next_batch(client.shard, cfg.batch_size, rng);
    ParamVector g = grad(*client.spec, local, batch);
    if (cfg.algorithm == Algorithm::kOtaFedProx) g += mu * (local - w);
    sum += g;
    local -= rate * g;
  }
  ParamVector out = cfg.local_steps == 1 ? sum : ParamVector(sum / cfg.local_steps);
  require_finite(out, "update of client " + std::to_string(client.client_id));
  return out;
}

void global_round(GlobalState& state, std::vector<ClientState>& clients,
                  const ChannelModel& channel, const TrainerConfig& cfg,
                  const WaveformBasis* basis) {
  const std::size_t K = clients.size();
  if (K == 0) throw ArgumentError("global_round: no clients");
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return clients[a].client_id < clients[b].client_id;
  });
  for (std::size_t i = 0; i < K; ++i) {
    if (clients[order[i]].client_id != static_cast<int>(i)) {
      throw ArgumentError("client ids must be exactly 0..K-1");
    }
  }

  const std::int64_t t = state.round;
  std::vector<ParamVector> updates(K);
  parallel_for(K, cfg.workers, [&](std::size_t i) {
    ClientState& c = clients[order[i]];
    try {
      updates[i] = client_update(c, state.w, cfg, t);
      if (cfg.algorithm == Algorithm::kPersonalizedAota) personal_step(c, state.w, cfg, t);
    } catch (const NumericalError& e) {
      throw NumericalError("client " + std::to_string(c.client_id) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ClientError(c.client_id, e.what());
    }
  });

  const ChannelRealization r = sample_realization(
      channel, K, state.w.size(), t, cfg.effective_channel_seed());
  const ParamVector g = aggregate_ota(updates, r, cfg.aggregation, basis);
  state.w -= cfg.eta_g * g;
  project_to_ball(state.w, cfg.projection_radius);
  state.round = t + 1;
  if (cfg.algorithm != Algorithm::kPersonalizedAota) {
    // Baselines keep no personal model; clients use the global one.
    for (auto& c : clients) c.v = state.w;
  }
  const double norm = state.w.norm();
  if (!std::isfinite(norm) || norm > cfg.divergence_threshold) {
    std::ostringstream os;
    os << "global model diverged in round " << t << " (||w|| = " << norm
       << " > " << cfg.divergence_threshold << ")";
    throw DivergenceError(os.str());
  }
}

std::vector<ClientState> make_clients(const Problem& problem,
                                      const ParamVector& v0) {
  std::vector<ClientState> clients(problem.K());
  for (std::size_t k = 0; k < problem.K(); ++k) {
    auto& c = clients[k];
    c.client_id = static_cast<int>(k);
    c.spec = &problem.specs[k];
    c.shard = problem.train.empty() ? nullptr : &problem.train[k];
    c.test = problem.test.empty() ? c.shard : &problem.test[k];
    c.v = v0;
  }
  return clients;
}

MetricsRow evaluate(const Problem& problem, const GlobalState& state,
                    const std::vector<ClientState>& clients) {
  MetricsRow row;
  row.round = state.round;
  const double K = static_cast<double>(clients.size());
  double gl = 0, pl = 0, pa = 0, ga = 0;
  for (const auto& c : clients) {
    const DataBatch batch = c.shard ? DataBatch::full(*c.shard) : DataBatch{};
    gl += loss(*c.spec, state.w, batch);
    pl += loss(*c.spec, c.v, batch);
    if (c.test) {
      pa += accuracy(*c.spec, c.v, *c.test);
      ga += accuracy(*c.spec, state.w, *c.test);
    } else {
      pa = ga = std::nan("");
    }
  }
  row.global_loss = gl / K;
  row.mean_personal_loss = pl / K;
  row.mean_personal_acc = pa / K;
  row.generic_acc = ga / K;
  row.w_dist_sq = problem.w_star ? (state.w - *problem.w_star).squaredNorm()
                                 : std::nan("");
  return row;
}

namespace {

std::optional<WaveformBasis> basis_for(const TrainerConfig& cfg, Eigen::Index d) {
  if (cfg.aggregation != AggregationMode::kWaveformLevel) return std::nullopt;
  Eigen::Index S = cfg.samples_per_symbol;
  if (S <= 0) {
    S = d;
    if (cfg.basis == BasisKind::kHadamard) {
      S = static_cast<Eigen::Index>(std::bit_ceil(static_cast<std::uint64_t>(d)));
    }
  }
  return make_basis(d, S, cfg.basis);
}

void record_v(MetricsTable& m, const Problem& problem,
              const std::vector<ClientState>& clients) {
  if (!problem.v_star) return;
  std::vector<double> row(clients.size());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    row[k] = (clients[k].v - (*problem.v_star)[k]).squaredNorm();
  }
  m.v_dist_sq.push_back(std::move(row));
}

}  // namespace

MetricsTable run_experiment(const Problem& problem, const TrainerConfig& cfg,
                            const ChannelModel& channel) {
  problem.validate();
  cfg.validate();
  const ChannelModel ch = channel.normalized();
  const Eigen::Index d = problem.dimension();
  const auto basis = basis_for(cfg, d);

  GlobalState state;
  state.w = cfg.initial_w ? *cfg.initial_w : initial_params(problem.specs.front(), cfg.seed);
  check_dims(state.w.size(), d, "initial model");
  auto clients = make_clients(problem, state.w);

  MetricsTable m;
  m.rows.push_back(evaluate(problem, state, clients));
  record_v(m, problem, clients);
  for (int t = 0; t < cfg.T; ++t) {
    try {
      m.eta_l_used.push_back(cfg.eta_l_at(t));
      global_round(state, clients, ch, cfg, basis ? &*basis : nullptr);
    } catch (NumericalError& e) {
      m.final_w = state.w;
      for (const auto& c : clients) m.final_v.push_back(c.v);
      e.set_partial(std::move(m));
      throw;
    }
    m.rows.push_back(evaluate(problem, state, clients));
    record_v(m, problem, clients);
  }
  m.final_w = state.w;
  for (const auto& c : clients) m.final_v.push_back(c.v);
  return m;
}

EnsembleResult run_ensemble(const Problem& problem, const TrainerConfig& cfg,
                            const ChannelModel& channel,
                            std::span<const std::uint64_t> seeds, int workers) {
  if (!problem.w_star) throw ArgumentError("ensemble statistics need w*");
  if (seeds.empty()) throw ArgumentError("ensemble needs at least one seed");
  std::vector<MetricsTable> runs(seeds.size());
  parallel_for(seeds.size(), workers, [&](std::size_t i) {
    TrainerConfig c = cfg;
    c.seed = seeds[i];
    c.channel_seed = seeds[i];
    c.workers = 1;
    runs[i] = run_experiment(problem, c, channel);
  });

  const std::size_t rounds = runs.front().rows.size();
  const std::size_t K = problem.K();
  const double n = static_cast<double>(seeds.size());
  EnsembleResult out;
  out.repetitions = seeds.size();
  out.w_mse.resize(rounds);
  out.w_mse_se.resize(rounds);
  const bool with_v = problem.v_star.has_value();
  if (with_v) {
    out.v_mse.assign(rounds, std::vector<double>(K));
    out.v_mse_se.assign(rounds, std::vector<double>(K));
  }
  auto mean_se = [n](auto&& value_of) {
    // Two passes: a one-pass sum of squares cancels badly when the
    // repetitions nearly agree.
    const auto count = static_cast<std::size_t>(n);
    double s = 0;
    for (std::size_t i = 0; i < count; ++i) s += value_of(i);
    const double mean = s / n;
    double ss = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double dev = value_of(i) - mean;
      ss += dev * dev;
    }
    const double var = n > 1 ? ss / (n - 1) : 0.0;
    return std::pair{mean, std::sqrt(var / n)};
  };
  for (std::size_t t = 0; t < rounds; ++t) {
    std::tie(out.w_mse[t], out.w_mse_se[t]) =
        mean_se([&](std::size_t i) { return runs[i].rows[t].w_dist_sq; });
    if (with_v) {
      for (std::size_t k = 0; k < K; ++k) {
        std::tie(out.v_mse[t][k], out.v_mse_se[t][k]) =
            mean_se([&](std::size_t i) { return runs[i].v_dist_sq[t][k]; });
      }
    }
  }
  return out;
}

std::vector<ParamVector> centralized_gd(const Problem& problem,
                                        const ParamVector& w0, double rate,
                                        int T) {
  std::vector<ParamVector> traj{w0};
  ParamVector w = w0;
  const double K = static_cast<double>(problem.K());
  for (int t = 0; t < T; ++t) {
    ParamVector g = ParamVector::Zero(w.size());
    for (std::size_t k = 0; k < problem.K(); ++k) {
      const DataBatch b = problem.train.empty() ? DataBatch{} : DataBatch::full(problem.train[k]);
      g += grad(problem.specs[k], w, b);
    }
    w -= rate * (g / K);
    traj.push_back(w);
  }
  return traj;
}

std::vector<ParamVector> local_sgd_reference(const Problem& problem, int k,
                                             const ParamVector& v0,
                                             const TrainerConfig& cfg) {
  const auto kk = static_cast<std::size_t>(k);
  const ModelSpec& spec = problem.specs.at(kk);
  const DataShard* shard = problem.train.empty() ? nullptr : &problem.train[kk];
  std::vector<ParamVector> traj{v0};
  ParamVector v = v0;
  for (int t = 0; t < cfg.T; ++t) {
    Rng rng = client_stream(cfg.seed, k, t, StreamPurpose::kPersonal);
    for (int s = 0; s < cfg.local_steps; ++s) {
      v -= cfg.eta_l_at(t) * grad(spec, v, draw_batch(shard, cfg.batch_size, rng));
      project_to_ball(v, cfg.projection_radius);
    }
    traj.push_back(v);
  }
  return traj;
}

}  // namespace otapfl
