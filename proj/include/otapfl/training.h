#pragma once

// Personalized federated training over the analog over-the-air channel,
// plus the OTA-FedAvg and OTA-FedProx baselines.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otapfl/channel.h"
#include "otapfl/common.h"
#include "otapfl/data.h"
#include "otapfl/models.h"

namespace otapfl {

enum class Algorithm { kPersonalizedAota, kOtaFedAvg, kOtaFedProx };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct TrainerConfig {
  Algorithm algorithm = Algorithm::kPersonalizedAota;
  double lambda = 0.1;  // personalization strength
  double eta_g = 0.1;   // global rate
  double eta_l = 0.05;  // local rate (personal objective, baseline local SGD)
  // Overrides eta_l when set: rate used in round t.
  std::function<double(std::int64_t)> eta_l_schedule;
  int T = 100;
  int local_steps = 5;
  int batch_size = 0;  // 0: full local batch
  double mu_prox = 0.0;
  std::uint64_t seed = 0;
  // Channel draws use their own seed so fading/noise can be varied alone.
  std::optional<std::uint64_t> channel_seed;
  std::optional<double> projection_radius;
  AggregationMode aggregation = AggregationMode::kVectorLevel;
  BasisKind basis = BasisKind::kHadamard;
  int samples_per_symbol = 0;  // 0: smallest valid S for the basis kind
  int workers = 1;
  double divergence_threshold = 1e12;
  std::optional<ParamVector> initial_w;

  double eta_l_at(std::int64_t t) const {
    return eta_l_schedule ? eta_l_schedule(t) : eta_l;
  }
  std::uint64_t effective_channel_seed() const {
    return channel_seed.value_or(seed);
  }
  /// Throws ArgumentError on non-positive rates, T < 0 or local_steps < 1.
  void validate() const;
};

/// Everything the clients own: one loss per client, optional training and
/// test shards (data-driven kinds), and known optima when available.
struct Problem {
  std::vector<ModelSpec> specs;
  std::vector<DataShard> train;
  std::vector<DataShard> test;
  std::optional<ParamVector> w_star;
  std::optional<std::vector<ParamVector>> v_star;

  std::size_t K() const { return specs.size(); }
  Eigen::Index dimension() const { return specs.empty() ? 0 : specs.front().dimension(); }
  void validate() const;
};

struct ClientState {
  int client_id = 0;
  const ModelSpec* spec = nullptr;
  const DataShard* shard = nullptr;  // null for quadratic losses
  const DataShard* test = nullptr;
  ParamVector v;
};

struct GlobalState {
  std::int64_t round = 0;
  ParamVector w;
};

struct MetricsRow {
  std::int64_t round = 0;
  double global_loss = 0.0;
  double mean_personal_loss = 0.0;
  double mean_personal_acc = 0.0;
  double generic_acc = 0.0;
  double w_dist_sq = 0.0;  // NaN when w* is unknown
};

struct MetricsTable {
  std::vector<std::string> header;  // "key=value" config echo lines
  std::vector<MetricsRow> rows;     // row t describes w^t, v^t
  std::vector<double> eta_l_used;   // local rate applied in round t
  // v_dist_sq[t][k] = ||v_k^t - v_k*||^2 when v* is known.
  std::vector<std::vector<double>> v_dist_sq;
  ParamVector final_w;
  std::vector<ParamVector> final_v;
};

/// Raised for non-finite updates and the ||w|| divergence guard. Carries
/// the metrics recorded before the failure.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, MetricsTable partial = {})
      : Error(what), partial_(std::move(partial)) {}
  const MetricsTable& partial() const { return partial_; }
  void set_partial(MetricsTable m) { partial_ = std::move(m); }

 private:
  MetricsTable partial_;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A client computation failed; the message names the client.
class ClientError : public Error {
 public:
  ClientError(int client_id, const std::string& what)
      : Error("client " + std::to_string(client_id) + ": " + what),
        client_id_(client_id) {}
  int client_id() const { return client_id_; }

 private:
  int client_id_;
};

enum class StreamPurpose : std::uint64_t { kGlobalGradient = 0, kPersonal = 1 };

/// Per-client random stream keyed by (seed, client_id, round, purpose).
Rng client_stream(std::uint64_t seed, int client_id, std::int64_t t,
                  StreamPurpose purpose);

/// Batch for one local step: full shard when batch_size is 0 or covers the
/// shard, otherwise batch_size rows sampled without replacement.
DataBatch draw_batch(const DataShard* shard, int batch_size, Rng& rng);

/// grad F(v) + lambda (v - w).
ParamVector personal_grad(const ModelSpec& spec, const ParamVector& v,
                          const ParamVector& w, double lambda,
                          const DataBatch& batch);

void project_to_ball(ParamVector& x, std::optional<double> radius);

/// local_steps SGD steps on the personal objective anchored at w, using
/// the client's personal stream for round t.
void personal_step(ClientState& client, const ParamVector& w,
                   const TrainerConfig& cfg, std::int64_t t);

/// Vector client k transmits in round t: grad F_k(w^t) for the
/// personalized scheme, the mean local-SGD gradient for the baselines.
ParamVector client_update(const ClientState& client, const ParamVector& w,
                          const TrainerConfig& cfg, std::int64_t t);

/// One communication round: client updates, personal steps, OTA
/// aggregation and w <- w - eta_g g.
void global_round(GlobalState& state, std::vector<ClientState>& clients,
                  const ChannelModel& channel, const TrainerConfig& cfg,
                  const WaveformBasis* basis = nullptr);

std::vector<ClientState> make_clients(const Problem& problem,
                                      const ParamVector& v0);

MetricsRow evaluate(const Problem& problem, const GlobalState& state,
                    const std::vector<ClientState>& clients);

/// Runs cfg.T rounds from w^0 (cfg.initial_w or the spec's default init),
/// recording metrics for every w^t, t = 0..T.
MetricsTable run_experiment(const Problem& problem, const TrainerConfig& cfg,
                            const ChannelModel& channel);

struct EnsembleResult {
  std::vector<double> w_mse;     // mean over seeds of ||w^t - w*||^2
  std::vector<double> w_mse_se;  // standard error of that mean
  std::vector<std::vector<double>> v_mse;     // [t][k]
  std::vector<std::vector<double>> v_mse_se;  // [t][k]
  std::size_t repetitions = 0;
};

/// Monte-Carlo repetitions of run_experiment over the given seeds (each
/// sets cfg.seed and the channel seed). Needs w* (and v* for v_mse).
/// Repetitions run on `workers` threads; results do not depend on it.
EnsembleResult run_ensemble(const Problem& problem, const TrainerConfig& cfg,
                            const ChannelModel& channel,
                            std::span<const std::uint64_t> seeds, int workers);

/// Plain gradient descent w <- w - rate * mean_k grad F_k(w), full batch.
std::vector<ParamVector> centralized_gd(const Problem& problem,
                                        const ParamVector& w0, double rate,
                                        int T);

/// Local SGD on F_k alone, drawing batches from the client's personal
/// stream exactly as personal_step does.
std::vector<ParamVector> local_sgd_reference(const Problem& problem, int k,
                                             const ParamVector& v0,
                                             const TrainerConfig& cfg);

}  // namespace otapfl
