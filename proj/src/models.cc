#include "otapfl/models.h"

#include <cmath>
#include <numeric>
#include <sstream>

namespace otapfl {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kQuadratic: return "quadratic";
    case ModelKind::kLogisticL2: return "logistic";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

ModelSpec ModelSpec::quadratic(Matrix A, ParamVector center) {
  if (A.rows() < 1 || A.rows() != A.cols()) {
    throw DimensionError("quadratic: A must be a non-empty square matrix");
  }
  check_dims(center.size(), A.rows(), "quadratic center");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ArgumentError("quadratic: A must be symmetric");
  }
  if (Eigen::LLT<Matrix>(A).info() != Eigen::Success) {
    throw ArgumentError("quadratic: A must be positive definite");
  }
  ModelSpec s;
  s.kind_ = ModelKind::kQuadratic;
  s.dimension_ = A.rows();
  s.A_ = std::move(A);
  s.center_ = std::move(center);
  return s;
}

ModelSpec ModelSpec::logistic(int feature_count, int class_count, double rho) {
  if (feature_count < 1) throw ArgumentError("logistic: feature_count must be positive");
  if (class_count < 2) throw ArgumentError("logistic: needs at least two classes");
  if (!(rho > 0.0)) throw ArgumentError("logistic: ridge coefficient must be positive");
  ModelSpec s;
  s.kind_ = ModelKind::kLogisticL2;
  s.feature_count_ = feature_count;
  s.class_count_ = class_count;
  s.rho_ = rho;
  s.dimension_ = class_count == 2 ? feature_count
                                  : static_cast<Eigen::Index>(feature_count) * class_count;
  return s;
}

ModelSpec ModelSpec::mlp(int feature_count, std::vector<int> hidden,
                         int class_count, double rho) {
  if (feature_count < 1) throw ArgumentError("mlp: feature_count must be positive");
  if (class_count < 2) throw ArgumentError("mlp: needs at least two classes");
  if (!(rho >= 0.0)) throw ArgumentError("mlp: ridge coefficient must be >= 0");
  for (int h : hidden) {
    if (h < 1) throw ArgumentError("mlp: hidden widths must be positive");
  }
  ModelSpec s;
  s.kind_ = ModelKind::kMlp;
  s.feature_count_ = feature_count;
  s.class_count_ = class_count;
  s.rho_ = rho;
  s.hidden_ = std::move(hidden);
  int in = feature_count;
  Eigen::Index dim = 0;
  for (int h : s.hidden_) {
    dim += static_cast<Eigen::Index>(h) * in + h;
    in = h;
  }
  dim += static_cast<Eigen::Index>(class_count) * in + class_count;
  s.dimension_ = dim;
  return s;
}

std::string ModelSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(d=" << dimension_;
  if (kind_ != ModelKind::kQuadratic) {
    os << ", features=" << feature_count_ << ", classes=" << class_count_
       << ", rho=" << rho_;
  }
  if (kind_ == ModelKind::kMlp) {
    os << ", hidden=[";
    for (std::size_t i = 0; i < hidden_.size(); ++i) os << (i ? "," : "") << hidden_[i];
    os << "]";
  }
  os << ")";
  return os.str();
}

Eigen::Index DataBatch::size() const {
  if (shard == nullptr) return 0;
  return rows ? static_cast<Eigen::Index>(rows->size()) : shard->size();
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Features and labels of a batch, copied only when a row subset is used.
class BatchView {
 public:
  BatchView(const ModelSpec& spec, const DataBatch& batch) {
    if (batch.shard == nullptr || batch.size() < 1) {
      throw ArgumentError(to_string(spec.kind()) + " loss needs a non-empty batch");
    }
    const DataShard& s = *batch.shard;
    check_dims(s.feature_count(), spec.feature_count(), "batch features");
    if (batch.rows) {
      const auto& rows = *batch.rows;
      owned_x_.resize(static_cast<Eigen::Index>(rows.size()), s.feature_count());
      owned_y_.reserve(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        owned_x_.row(static_cast<Eigen::Index>(i)) = s.features.row(rows[i]);
        owned_y_.push_back(s.labels.at(static_cast<std::size_t>(rows[i])));
      }
      x_ = &owned_x_;
      y_ = &owned_y_;
    } else {
      x_ = &s.features;
      y_ = &s.labels;
    }
    if (static_cast<std::size_t>(x_->rows()) != y_->size()) {
      throw DimensionError("batch feature rows and labels disagree");
    }
  }

  const Matrix& x() const { return *x_; }
  const std::vector<int>& y() const { return *y_; }
  double n() const { return static_cast<double>(x_->rows()); }

 private:
  Matrix owned_x_;
  std::vector<int> owned_y_;
  const Matrix* x_ = nullptr;
  const std::vector<int>* y_ = nullptr;
};

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Row-wise softmax in place; returns the per-row log-sum-exp.
Eigen::VectorXd softmax_rows(Matrix& logits) {
  Eigen::VectorXd lse(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    const double s = logits.row(i).sum();
    logits.row(i) /= s;
    lse[i] = m + std::log(s);
  }
  return lse;
}

struct MlpLayer {
  Eigen::Index offset;  // start of W (out x in, row-major), then b
  int in;
  int out;
};

std::vector<MlpLayer> mlp_layers(const ModelSpec& spec) {
  std::vector<MlpLayer> layers;
  Eigen::Index off = 0;
  int in = spec.feature_count();
  auto add = [&](int out) {
    layers.push_back({off, in, out});
    off += static_cast<Eigen::Index>(out) * in + out;
    in = out;
  };
  for (int h : spec.hidden()) add(h);
  add(spec.class_count());
  return layers;
}

auto layer_w(const ParamVector& p, const MlpLayer& l) {
  return Eigen::Map<const RowMajor>(p.data() + l.offset, l.out, l.in);
}
auto layer_b(const ParamVector& p, const MlpLayer& l) {
  return Eigen::Map<const Eigen::RowVectorXd>(
      p.data() + l.offset + static_cast<Eigen::Index>(l.out) * l.in, l.out);
}

// Forward pass; activations[0] = X, activations[i] = tanh output of hidden
// layer i, and the last entry holds the logits.
std::vector<Matrix> mlp_forward(const ModelSpec& spec, const ParamVector& p,
                                const Matrix& x) {
  const auto layers = mlp_layers(spec);
  std::vector<Matrix> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(x);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix z = acts.back() * layer_w(p, layers[i]).transpose();
    z.rowwise() += layer_b(p, layers[i]);
    if (i + 1 < layers.size()) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }
  return acts;
}

Matrix class_logits(const ModelSpec& spec, const ParamVector& p, const Matrix& x) {
  if (spec.kind() == ModelKind::kMlp) return mlp_forward(spec, p, x).back();
  const auto W = Eigen::Map<const RowMajor>(p.data(), spec.class_count(),
                                            spec.feature_count());
  return x * W.transpose();
}

}  // namespace

double loss(const ModelSpec& spec, const ParamVector& params,
            const DataBatch& batch) {
  check_dims(params.size(), spec.dimension(), "loss params");
  switch (spec.kind()) {
    case ModelKind::kQuadratic: {
      const ParamVector r = params - spec.center();
      return 0.5 * r.dot(spec.A() * r);
    }
    case ModelKind::kLogisticL2: {
      const BatchView b(spec, batch);
      double total = 0.0;
      if (spec.class_count() == 2) {
        const Eigen::VectorXd z = b.x() * params;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          const double s = b.y()[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
          total += softplus(-s * z[i]);
        }
      } else {
        Matrix logits = class_logits(spec, params, b.x());
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
          const double m = logits.row(i).maxCoeff();
          const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
          total += lse - logits(i, b.y()[static_cast<std::size_t>(i)]);
        }
      }
      return total / b.n() + 0.5 * spec.rho() * params.squaredNorm();
    }
    case ModelKind::kMlp: {
      const BatchView b(spec, batch);
      Matrix logits = class_logits(spec, params, b.x());
      double total = 0.0;
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        total += lse - logits(i, b.y()[static_cast<std::size_t>(i)]);
      }
      return total / b.n() + 0.5 * spec.rho() * params.squaredNorm();
    }
  }
  throw ArgumentError("unsupported model kind");
}

ParamVector grad(const ModelSpec& spec, const ParamVector& params,
                 const DataBatch& batch) {
  check_dims(params.size(), spec.dimension(), "grad params");
  switch (spec.kind()) {
    case ModelKind::kQuadratic:
      return spec.A() * (params - spec.center());
    case ModelKind::kLogisticL2: {
      const BatchView b(spec, batch);
      if (spec.class_count() == 2) {
        const Eigen::VectorXd z = b.x() * params;
        Eigen::VectorXd coef(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          const double s = b.y()[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
          coef[i] = -s * sigmoid(-s * z[i]);
        }
        return b.x().transpose() * coef / b.n() + spec.rho() * params;
      }
      Matrix probs = class_logits(spec, params, b.x());
      softmax_rows(probs);
      for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        probs(i, b.y()[static_cast<std::size_t>(i)]) -= 1.0;
      }
      RowMajor g = probs.transpose() * b.x() / b.n();
      return Eigen::Map<const ParamVector>(g.data(), g.size()) + spec.rho() * params;
    }
    case ModelKind::kMlp: {
      const BatchView b(spec, batch);
      const auto layers = mlp_layers(spec);
      auto acts = mlp_forward(spec, params, b.x());
      Matrix delta = acts.back();
      softmax_rows(delta);
      for (Eigen::Index i = 0; i < delta.rows(); ++i) {
        delta(i, b.y()[static_cast<std::size_t>(i)]) -= 1.0;
      }
      delta /= b.n();
      ParamVector g = spec.rho() * params;
      for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& l = layers[li];
        const Matrix& in = acts[li];
        RowMajor gw = delta.transpose() * in;
        g.segment(l.offset, gw.size()) += Eigen::Map<const ParamVector>(gw.data(), gw.size());
        g.segment(l.offset + gw.size(), l.out) += delta.colwise().sum().transpose();
        if (li > 0) {
          Matrix back = delta * layer_w(params, l);
          delta = (back.array() * (1.0 - in.array().square())).matrix();
        }
      }
      return g;
    }
  }
  throw ArgumentError("unsupported model kind");
}

double accuracy(const ModelSpec& spec, const ParamVector& params,
                const DataShard& shard) {
  if (spec.kind() == ModelKind::kQuadratic) return std::nan("");
  check_dims(params.size(), spec.dimension(), "accuracy params");
  if (shard.size() < 1) return std::nan("");
  check_dims(shard.feature_count(), spec.feature_count(), "accuracy features");
  std::size_t correct = 0;
  if (spec.kind() == ModelKind::kLogisticL2 && spec.class_count() == 2) {
    const Eigen::VectorXd z = shard.features * params;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      correct += ((z[i] > 0.0 ? 1 : 0) == shard.labels[static_cast<std::size_t>(i)]);
    }
  } else {
    const Matrix logits = class_logits(spec, params, shard.features);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      correct += (static_cast<int>(arg) == shard.labels[static_cast<std::size_t>(i)]);
    }
  }
  return static_cast<double>(correct) / static_cast<double>(shard.size());
}

double power_iteration_lambda_max(const Matrix& S, int max_iter, double tol) {
  if (S.rows() != S.cols() || S.rows() < 1) {
    throw DimensionError("power iteration needs a non-empty square matrix");
  }
  const Eigen::Index n = S.rows();
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = v.dot(S * v);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = S * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(S * v);
    if (std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

ConvexityConstants convexity_constants(const ModelSpec& spec,
                                       const DataShard* dataset) {
  switch (spec.kind()) {
    case ModelKind::kQuadratic: {
      Eigen::SelfAdjointEigenSolver<Matrix> es(spec.A(), Eigen::EigenvaluesOnly);
      return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
    }
    case ModelKind::kLogisticL2: {
      if (dataset == nullptr || dataset->size() < 1) {
        throw ArgumentError("logistic constants need a non-empty dataset");
      }
      const Matrix gram = dataset->features.transpose() * dataset->features /
                          static_cast<double>(dataset->size());
      const double curvature = spec.class_count() == 2 ? 0.25 : 0.5;
      return {spec.rho(), spec.rho() + curvature * power_iteration_lambda_max(gram)};
    }
    case ModelKind::kMlp:
      throw ArgumentError("MLP losses have no convexity constants");
  }
  throw ArgumentError("unsupported model kind");
}

ParamVector initial_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamVector p = ParamVector::Zero(spec.dimension());
  if (spec.kind() != ModelKind::kMlp) return p;
  Rng rng = make_stream(seed, StreamTag::kInit);
  for (const auto& l : mlp_layers(spec)) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(l.in)));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(l.out) * l.in; ++i) {
      p[l.offset + i] = normal(rng);
    }
  }
  return p;
}

std::vector<ModelSpec> make_quadratic_ensemble(const QuadraticEnsembleConfig& cfg,
                                               std::uint64_t seed) {
  if (cfg.K < 1 || cfg.d < 1) throw ArgumentError("ensemble needs K, d >= 1");
  if (!(cfg.eig_min > 0.0 && cfg.eig_max >= cfg.eig_min)) {
    throw ArgumentError("ensemble needs 0 < eig_min <= eig_max");
  }
  const int d = cfg.d;
  Rng shared = make_stream(seed, StreamTag::kProblem, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector c(d);
  for (int i = 0; i < d; ++i) c[i] = normal(shared);
  c *= cfg.center_norm / std::sqrt(static_cast<double>(d));

  std::vector<ModelSpec> out;
  out.reserve(static_cast<std::size_t>(cfg.K));
  for (int k = 0; k < cfg.K; ++k) {
    Rng rng = make_stream(seed, StreamTag::kProblem, 1, static_cast<std::uint64_t>(k));
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) {
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    std::uniform_real_distribution<double> unif(cfg.eig_min, cfg.eig_max);
    Eigen::VectorXd eig(d);
    for (int i = 0; i < d; ++i) eig[i] = unif(rng);
    eig[0] = cfg.eig_min;
    if (d > 1) eig[1] = cfg.eig_max;
    Matrix A = q * eig.asDiagonal() * q.transpose();
    A = 0.5 * (A + A.transpose()).eval();
    ParamVector e(d);
    for (int i = 0; i < d; ++i) e[i] = normal(rng);
    e *= cfg.spread / std::sqrt(static_cast<double>(d));
    out.push_back(ModelSpec::quadratic(std::move(A), c + e));
  }
  return out;
}

}  // namespace otapfl
