#include "otapfl/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace otapfl {

DataShard DataShard::subset(const std::vector<Eigen::Index>& rows) const {
  DataShard out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  out.class_count = class_count;
  out.client_id = client_id;
  out.feature_names = feature_names;
  out.label_name = label_name;
  out.label_column = label_column;
  return out;
}

void validate_shard(const DataShard& shard) {
  if (shard.size() < 1) throw ArgumentError("data shard is empty");
  if (static_cast<std::size_t>(shard.size()) != shard.labels.size()) {
    throw DimensionError("shard has " + std::to_string(shard.size()) +
                         " feature rows but " +
                         std::to_string(shard.labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < shard.labels.size(); ++i) {
    const int y = shard.labels[i];
    if (y < 0 || y >= shard.class_count) {
      throw ArgumentError("label " + std::to_string(y) + " at row " +
                          std::to_string(i) + " outside [0, " +
                          std::to_string(shard.class_count) + ")");
    }
  }
}

DataShard concat_shards(const std::vector<DataShard>& shards) {
  if (shards.empty()) throw ArgumentError("concat_shards: no shards");
  Eigen::Index n = 0;
  for (const auto& s : shards) n += s.size();
  DataShard out;
  out.class_count = shards.front().class_count;
  out.client_id = shards.front().client_id;
  out.features.resize(n, shards.front().feature_count());
  Eigen::Index row = 0;
  for (const auto& s : shards) {
    check_dims(s.feature_count(), out.features.cols(), "concat_shards");
    out.features.middleRows(row, s.size()) = s.features;
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
    row += s.size();
  }
  return out;
}

namespace {

std::vector<double> draw_dirichlet(Rng& rng, int K, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(K));
  for (;;) {
    double sum = 0.0;
    for (auto& v : p) {
      v = gamma(rng);
      sum += v;
    }
    if (sum > 0.0 && std::isfinite(sum)) {
      for (auto& v : p) v /= sum;
      return p;
    }
  }
}

void fill_proportions(PartitionPlan& plan, const std::vector<int>& labels) {
  plan.proportions = Matrix::Zero(plan.K, plan.class_count);
  for (int k = 0; k < plan.K; ++k) {
    const auto& idx = plan.assignment[static_cast<std::size_t>(k)];
    for (auto i : idx) plan.proportions(k, labels[static_cast<std::size_t>(i)]) += 1.0;
    if (!idx.empty()) plan.proportions.row(k) /= static_cast<double>(idx.size());
  }
}

}  // namespace

PartitionPlan dirichlet_partition(const std::vector<int>& labels, int K,
                                  double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw ArgumentError("Dirichlet alpha must be positive");
  if (K < 1) throw ArgumentError("partition needs K >= 1");
  if (static_cast<std::size_t>(K) > labels.size()) {
    throw ArgumentError("cannot split " + std::to_string(labels.size()) +
                        " samples into " + std::to_string(K) +
                        " non-empty shards");
  }
  int class_count = 0;
  for (int y : labels) {
    if (y < 0) throw ArgumentError("negative label in partition input");
    class_count = std::max(class_count, y + 1);
  }
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  }
  for (int c = 0; c < class_count; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw ArgumentError("class " + std::to_string(c) + " has no samples");
    }
  }

  Rng rng = make_stream(seed, StreamTag::kPartition);
  PartitionPlan plan;
  plan.scheme = PartitionScheme::kDirichlet;
  plan.alpha = alpha;
  plan.K = K;
  plan.class_count = class_count;

  constexpr int kMaxRedraws = 100;
  for (int attempt = 0;; ++attempt) {
    plan.class_shares.resize(class_count, K);
    plan.assignment.assign(static_cast<std::size_t>(K), {});
    for (int c = 0; c < class_count; ++c) {
      auto idx = by_class[static_cast<std::size_t>(c)];
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto share = draw_dirichlet(rng, K, alpha);
      const double n_c = static_cast<double>(idx.size());
      double cum = 0.0;
      std::size_t begin = 0;
      for (int k = 0; k < K; ++k) {
        plan.class_shares(c, k) = share[static_cast<std::size_t>(k)];
        cum += share[static_cast<std::size_t>(k)];
        std::size_t end = (k == K - 1)
                              ? idx.size()
                              : std::min(idx.size(), static_cast<std::size_t>(
                                                         std::floor(cum * n_c)));
        end = std::max(end, begin);
        auto& dst = plan.assignment[static_cast<std::size_t>(k)];
        dst.insert(dst.end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                   idx.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
      }
    }
    const bool any_empty =
        std::any_of(plan.assignment.begin(), plan.assignment.end(),
                    [](const auto& a) { return a.empty(); });
    if (!any_empty) break;
    if (attempt + 1 >= kMaxRedraws) {
      for (auto& shard : plan.assignment) {
        if (!shard.empty()) continue;
        auto largest = std::max_element(
            plan.assignment.begin(), plan.assignment.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });
        shard.push_back(largest->back());
        largest->pop_back();
        ++plan.moved_samples;
      }
      break;
    }
    ++plan.redraws;
  }
  for (auto& a : plan.assignment) std::sort(a.begin(), a.end());
  fill_proportions(plan, labels);
  return plan;
}

PartitionPlan iid_partition(const std::vector<int>& labels, int class_count,
                            int K, std::uint64_t seed) {
  if (K < 1) throw ArgumentError("partition needs K >= 1");
  if (static_cast<std::size_t>(K) > labels.size()) {
    throw ArgumentError("cannot split " + std::to_string(labels.size()) +
                        " samples into " + std::to_string(K) +
                        " non-empty shards");
  }
  Rng rng = make_stream(seed, StreamTag::kPartition);
  std::vector<Eigen::Index> idx(labels.size());
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);

  PartitionPlan plan;
  plan.scheme = PartitionScheme::kIid;
  plan.alpha = 0.0;
  plan.K = K;
  plan.class_count = class_count;
  plan.assignment.assign(static_cast<std::size_t>(K), {});
  const std::size_t n = labels.size();
  for (int k = 0; k < K; ++k) {
    const std::size_t b = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(K);
    const std::size_t e = n * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(K);
    auto& a = plan.assignment[static_cast<std::size_t>(k)];
    a.assign(idx.begin() + static_cast<std::ptrdiff_t>(b),
             idx.begin() + static_cast<std::ptrdiff_t>(e));
    std::sort(a.begin(), a.end());
  }
  plan.class_shares = Matrix::Zero(class_count, K);
  for (int k = 0; k < K; ++k) {
    for (auto i : plan.assignment[static_cast<std::size_t>(k)]) {
      plan.class_shares(labels[static_cast<std::size_t>(i)], k) += 1.0;
    }
  }
  for (int c = 0; c < class_count; ++c) {
    const double s = plan.class_shares.row(c).sum();
    if (s > 0) plan.class_shares.row(c) /= s;
  }
  fill_proportions(plan, labels);
  return plan;
}

std::string partition_to_json(const PartitionPlan& plan) {
  nlohmann::ordered_json j;
  j["scheme"] = plan.scheme == PartitionScheme::kIid ? "iid" : "dirichlet";
  j["alpha"] = plan.alpha;
  j["K"] = plan.K;
  j["class_count"] = plan.class_count;
  nlohmann::ordered_json clients = nlohmann::ordered_json::object();
  for (int k = 0; k < plan.K; ++k) {
    clients[std::to_string(k)] = plan.assignment[static_cast<std::size_t>(k)];
  }
  j["clients"] = clients;
  return j.dump(2);
}

std::vector<DataShard> apply_partition(const DataShard& pool,
                                       const PartitionPlan& plan) {
  std::vector<DataShard> out;
  out.reserve(static_cast<std::size_t>(plan.K));
  for (int k = 0; k < plan.K; ++k) {
    DataShard s = pool.subset(plan.assignment[static_cast<std::size_t>(k)]);
    s.client_id = k;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

ParamVector random_unit(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector v(d);
  for (;;) {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
    const double n = v.norm();
    if (n > 0.0) return v / n;
  }
}

void draw_features(Rng& rng, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  std::normal_distribution<double> normal(0.0, 1.0);
  row[0] = 1.0;
  for (Eigen::Index j = 1; j < row.size(); ++j) row[j] = normal(rng);
}

int sample_softmax(Rng& rng, const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const Eigen::VectorXd e = (logits.array() - m).exp();
  std::uniform_real_distribution<double> unif(0.0, e.sum());
  double u = unif(rng);
  for (Eigen::Index c = 0; c < e.size(); ++c) {
    u -= e[c];
    if (u < 0.0) return static_cast<int>(c);
  }
  return static_cast<int>(e.size() - 1);
}

std::vector<std::string> default_feature_names(Eigen::Index p) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

}  // namespace

std::vector<DataShard> synth_clustered(int K, int d, int n_per_client,
                                       double heterogeneity,
                                       std::uint64_t seed) {
  if (K < 1 || d < 1 || n_per_client < 1) {
    throw ArgumentError("synth_clustered: K, d and n_per_client must be positive");
  }
  if (!(heterogeneity >= 0.0)) throw ArgumentError("heterogeneity must be >= 0");
  Rng shared = make_stream(seed, StreamTag::kSynth, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector theta_bar(d);
  for (int j = 0; j < d; ++j) theta_bar[j] = normal(shared);

  std::vector<DataShard> shards;
  shards.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Rng rng = make_stream(seed, StreamTag::kSynth, 1, static_cast<std::uint64_t>(k));
    const ParamVector theta = theta_bar + heterogeneity * random_unit(rng, d);
    DataShard s;
    s.client_id = k;
    s.class_count = 2;
    s.features.resize(n_per_client, d);
    s.labels.resize(static_cast<std::size_t>(n_per_client));
    s.feature_names = default_feature_names(d);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < n_per_client; ++i) {
      draw_features(rng, s.features.row(i));
      const double z = s.features.row(i).dot(theta);
      const double p1 = 1.0 / (1.0 + std::exp(-z));
      s.labels[static_cast<std::size_t>(i)] = unif(rng) < p1 ? 1 : 0;
    }
    shards.push_back(std::move(s));
  }
  return shards;
}

namespace {

// Largest-remainder apportionment of `total` following `weights`.
std::vector<int> apportion(const Eigen::RowVectorXd& weights, int total) {
  const Eigen::Index C = weights.size();
  std::vector<int> out(static_cast<std::size_t>(C), 0);
  std::vector<std::pair<double, Eigen::Index>> rema;
  int assigned = 0;
  for (Eigen::Index c = 0; c < C; ++c) {
    const double exact = weights[c] * total;
    out[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(exact));
    assigned += out[static_cast<std::size_t>(c)];
    rema.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
    ++out[static_cast<std::size_t>(rema[i % rema.size()].second)];
  }
  return out;
}

DataShard sample_conditioned(Rng& rng, const Matrix& teacher,
                             const std::vector<int>& counts, int client_id) {
  const Eigen::Index p = teacher.cols();
  const int C = static_cast<int>(teacher.rows());
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  DataShard s;
  s.client_id = client_id;
  s.class_count = C;
  s.features.resize(n, p);
  s.labels.reserve(static_cast<std::size_t>(n));
  s.feature_names = default_feature_names(p);
  std::vector<int> remaining = counts;
  Eigen::RowVectorXd x(p);
  const long max_draws = 100000L * std::max(n, 1);
  long draws = 0;
  Eigen::Index row = 0;
  while (row < n) {
    if (++draws > max_draws) {
      throw ArgumentError("class-conditioned sampling did not fill client " +
                          std::to_string(client_id) + " quotas");
    }
    draw_features(rng, x);
    const int y = sample_softmax(rng, teacher * x.transpose());
    if (remaining[static_cast<std::size_t>(y)] == 0) continue;
    --remaining[static_cast<std::size_t>(y)];
    s.features.row(row++) = x;
    s.labels.push_back(y);
  }
  return s;
}

}  // namespace

FederatedTask make_federated_task(const FederatedTaskConfig& cfg,
                                  std::uint64_t seed) {
  if (cfg.K < 1 || cfg.d < 2 || cfg.class_count < 2 ||
      cfg.train_per_client < 1 || cfg.test_per_client < 0) {
    throw ArgumentError("invalid federated task configuration");
  }
  const int C = cfg.class_count;
  const int p = cfg.d;
  Rng shared = make_stream(seed, StreamTag::kSynth, 100);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Shared teacher: random class directions of norm `margin`, zero bias.
  Matrix base(C, p);
  for (int c = 0; c < C; ++c) {
    base.row(c).setZero();
    base.row(c).tail(p - 1) =
        cfg.margin * random_unit(shared, p - 1).transpose();
  }

  FederatedTask task;
  std::vector<std::vector<int>> train_counts(static_cast<std::size_t>(cfg.K));
  if (cfg.alpha) {
    std::vector<int> pool_labels;
    const int total = cfg.K * cfg.train_per_client;
    for (int i = 0; i < total; ++i) pool_labels.push_back(i % C);
    PartitionPlan plan = dirichlet_partition(pool_labels, cfg.K, *cfg.alpha, seed);
    for (int k = 0; k < cfg.K; ++k) {
      auto& cnt = train_counts[static_cast<std::size_t>(k)];
      cnt.assign(static_cast<std::size_t>(C), 0);
      for (auto i : plan.assignment[static_cast<std::size_t>(k)]) {
        ++cnt[static_cast<std::size_t>(pool_labels[static_cast<std::size_t>(i)])];
      }
    }
    task.plan = std::move(plan);
  } else {
    for (int k = 0; k < cfg.K; ++k) {
      train_counts[static_cast<std::size_t>(k)] =
          apportion(Eigen::RowVectorXd::Constant(C, 1.0 / C), cfg.train_per_client);
    }
  }

  for (int k = 0; k < cfg.K; ++k) {
    Rng rng = make_stream(seed, StreamTag::kSynth, 101, static_cast<std::uint64_t>(k));
    Matrix teacher = base;
    for (int c = 0; c < C; ++c) {
      teacher.row(c).tail(p - 1) +=
          cfg.heterogeneity * random_unit(rng, p - 1).transpose();
    }
    const auto& cnt = train_counts[static_cast<std::size_t>(k)];
    task.train.push_back(sample_conditioned(rng, teacher, cnt, k));

    Eigen::RowVectorXd mix(C);
    const double n_k = std::accumulate(cnt.begin(), cnt.end(), 0.0);
    for (int c = 0; c < C; ++c) mix[c] = cnt[static_cast<std::size_t>(c)] / n_k;
    task.test.push_back(
        sample_conditioned(rng, teacher, apportion(mix, cfg.test_per_client), k));
  }
  return task;
}

std::vector<DataShard> inject_label_noise(const std::vector<DataShard>& shards,
                                          double noisy_client_ratio,
                                          double level_lower_bound,
                                          std::uint64_t seed) {
  if (!(noisy_client_ratio >= 0.0 && noisy_client_ratio <= 1.0)) {
    throw ArgumentError("noisy_client_ratio must lie in [0, 1]");
  }
  if (!(level_lower_bound >= 0.0 && level_lower_bound <= 1.0)) {
    throw ArgumentError("level_lower_bound must lie in [0, 1]");
  }
  for (const auto& s : shards) {
    if (s.class_count < 2) {
      throw ArgumentError("label flipping needs at least two classes");
    }
  }
  std::vector<DataShard> out = shards;
  const int K = static_cast<int>(shards.size());
  const int noisy = std::clamp(
      static_cast<int>(std::ceil(noisy_client_ratio * K - 1e-9)), 0, K);
  if (noisy == 0) return out;

  Rng rng = make_stream(seed, StreamTag::kLabelNoise);
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(noisy));
  std::sort(order.begin(), order.end());

  for (int k : order) {
    DataShard& s = out[static_cast<std::size_t>(k)];
    Rng crng = make_stream(seed, StreamTag::kLabelNoise, 1, static_cast<std::uint64_t>(k));
    double level = 1.0;
    if (level_lower_bound < 1.0) {
      std::uniform_real_distribution<double> unif(level_lower_bound, 1.0);
      level = unif(crng);
    }
    const auto n = static_cast<std::size_t>(s.size());
    const auto flips = std::min(n, static_cast<std::size_t>(std::floor(level * static_cast<double>(n))));
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), crng);
    idx.resize(flips);
    std::sort(idx.begin(), idx.end());
    std::uniform_int_distribution<int> other(0, s.class_count - 2);
    for (auto i : idx) {
      int& y = s.labels[static_cast<std::size_t>(i)];
      const int r = other(crng);
      y = r >= y ? r + 1 : r;
    }
    s.noise_meta = NoiseMeta{true, level, std::move(idx)};
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

DataShard load_csv(const std::filesystem::path& path,
                   const std::string& label_column, int class_count) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header row");
  const auto header = split_row(line);
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) {
    throw ArgumentError(path.string() + ": no label column '" + label_column + "'");
  }
  const auto label_pos = static_cast<std::size_t>(it - header.begin());

  DataShard s;
  s.class_count = class_count;
  s.label_name = label_column;
  s.label_column = static_cast<int>(label_pos);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_pos) s.feature_names.push_back(header[j]);
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ArgumentError(path.string() + ": row " + std::to_string(line_no) +
                          " has " + std::to_string(cells.size()) +
                          " columns, header has " + std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto& c = cells[j];
      const auto res = std::from_chars(c.data(), c.data() + c.size(), values[j]);
      if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw ArgumentError(path.string() + ": row " + std::to_string(line_no) +
                            ", column " + std::to_string(j + 1) + " ('" +
                            header[j] + "'): non-numeric value '" + c + "'");
      }
    }
    const double y = values[label_pos];
    if (y != std::floor(y) || y < 0 || y >= class_count) {
      throw ArgumentError(path.string() + ": row " + std::to_string(line_no) +
                          ": label " + cells[label_pos] + " outside [0, " +
                          std::to_string(class_count) + ")");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ArgumentError(path.string() + ": no data rows");

  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  s.features.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (j == label_pos) {
        s.labels.push_back(static_cast<int>(rows[i][j]));
      } else {
        s.features(static_cast<Eigen::Index>(i), col++) = rows[i][j];
      }
    }
  }
  return s;
}

void write_csv(const std::filesystem::path& path, const DataShard& shard) {
  validate_shard(shard);
  const Eigen::Index p = shard.feature_count();
  auto names = shard.feature_names;
  if (static_cast<Eigen::Index>(names.size()) != p) names = default_feature_names(p);
  const Eigen::Index label_pos =
      (shard.label_column < 0 || shard.label_column > p) ? p : shard.label_column;

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    for (Eigen::Index j = 0, f = 0; j <= p; ++j) {
      if (j > 0) out << ',';
      out << (j == label_pos ? shard.label_name : names[static_cast<std::size_t>(f++)]);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < shard.size(); ++i) {
      for (Eigen::Index j = 0, f = 0; j <= p; ++j) {
        if (j > 0) out << ',';
        if (j == label_pos) {
          out << shard.labels[static_cast<std::size_t>(i)];
        } else {
          out << format_double(shard.features(i, f++));
        }
      }
      out << '\n';
    }
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace otapfl
