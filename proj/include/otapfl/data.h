#pragma once

// Client datasets: synthetic heterogeneous tasks, Dirichlet label
// partitioning, label-noise injection and CSV ingestion.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "otapfl/common.h"

namespace otapfl {

struct NoiseMeta {
  bool is_noisy = false;
  double noise_level = 0.0;
  std::vector<Eigen::Index> flipped_indices;
};

struct DataShard {
  Matrix features;          // n x p
  std::vector<int> labels;  // length n, each in [0, class_count)
  int class_count = 2;
  int client_id = 0;
  std::optional<NoiseMeta> noise_meta;

  // Column layout remembered by load_csv so write_csv reproduces it.
  std::vector<std::string> feature_names;
  std::string label_name = "label";
  int label_column = -1;  // -1: label written last

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_count() const { return features.cols(); }

  /// Rows `rows` of this shard (noise metadata dropped).
  DataShard subset(const std::vector<Eigen::Index>& rows) const;
};

/// Throws ArgumentError when labels and features disagree or a label is
/// outside [0, class_count).
void validate_shard(const DataShard& shard);

/// Concatenation of shards in order (client_id of the first).
DataShard concat_shards(const std::vector<DataShard>& shards);

enum class PartitionScheme { kIid, kDirichlet };

struct PartitionPlan {
  PartitionScheme scheme = PartitionScheme::kDirichlet;
  double alpha = 1.0;
  int K = 1;
  int class_count = 2;
  // Realized class composition of each client, K x class_count, rows sum
  // to one.
  Matrix proportions;
  // Dirichlet draw that split each class across clients, class_count x K.
  Matrix class_shares;
  // Sample indices owned by each client; disjoint, union = all samples.
  std::vector<std::vector<Eigen::Index>> assignment;
  int redraws = 0;
  int moved_samples = 0;
};

/// Splits every class across K clients with shares ~ Dirichlet(alpha 1_K).
/// Redraws up to 100 times while any client is empty, then moves single
/// samples from the largest shard into each empty one.
PartitionPlan dirichlet_partition(const std::vector<int>& labels, int K,
                                  double alpha, std::uint64_t seed);

/// Uniform random split into K near-equal shards.
PartitionPlan iid_partition(const std::vector<int>& labels, int class_count,
                            int K, std::uint64_t seed);

/// client_id -> index list, as a JSON document.
std::string partition_to_json(const PartitionPlan& plan);

/// Materializes a plan over a pooled dataset.
std::vector<DataShard> apply_partition(const DataShard& pool,
                                       const PartitionPlan& plan);

/// Binary task per client from a logistic model with parameter
/// theta_k = theta_bar + heterogeneity * delta_k (delta_k a uniformly random
/// unit direction). Features are standard normal; column 0 is a constant
/// intercept term.
std::vector<DataShard> synth_clustered(int K, int d, int n_per_client,
                                       double heterogeneity,
                                       std::uint64_t seed);

struct FederatedTaskConfig {
  int K = 20;
  int d = 10;  // feature count including the intercept column
  int class_count = 2;
  int train_per_client = 100;
  int test_per_client = 100;
  double heterogeneity = 3.0;
  // Dirichlet label skew; nullopt gives each client balanced classes drawn
  // from its own model.
  std::optional<double> alpha;
  double margin = 4.0;  // scale of the shared class centroids
};

struct FederatedTask {
  std::vector<DataShard> train;
  std::vector<DataShard> test;
  std::optional<PartitionPlan> plan;
};

/// Heterogeneous multi-client classification task. Each client k owns a
/// linear softmax teacher W_k = W_bar + heterogeneity * D_k. When alpha is
/// set, per-client class counts come from dirichlet_partition over a
/// balanced label pool, and samples are drawn from the client teacher
/// conditioned on the label. Test shards follow the client's own
/// distribution (same teacher, same class mix).
FederatedTask make_federated_task(const FederatedTaskConfig& cfg,
                                  std::uint64_t seed);

/// Selects ceil(ratio K) clients uniformly without replacement; each draws a
/// level u ~ Uniform(level_lower_bound, 1) and gets floor(u n) labels flipped
/// uniformly to a different class.
std::vector<DataShard> inject_label_noise(const std::vector<DataShard>& shards,
                                          double noisy_client_ratio,
                                          double level_lower_bound,
                                          std::uint64_t seed);

/// Reads a headered numeric CSV; `label_column` names the integer label.
DataShard load_csv(const std::filesystem::path& path,
                   const std::string& label_column, int class_count);
void write_csv(const std::filesystem::path& path, const DataShard& shard);
std::string format_double(double v);

}  // namespace otapfl
