#pragma once

// Client loss functions F_k with analytic gradients and, for the convex
// kinds, certified strong-convexity and smoothness constants.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otapfl/common.h"
#include "otapfl/data.h"

namespace otapfl {

enum class ModelKind { kQuadratic, kLogisticL2, kMlp };

std::string to_string(ModelKind kind);

/// Immutable description of one client's loss. Quadratic losses carry their
/// own data (A, a); the other kinds are evaluated on a DataBatch.
class ModelSpec {
 public:
  /// F(v) = 1/2 (v - a)^T A (v - a). A must be symmetric positive definite.
  static ModelSpec quadratic(Matrix A, ParamVector center);
  /// Ridge-regularized logistic regression. Two classes use one weight
  /// vector and the sigmoid; more classes use softmax over class_count
  /// weight vectors.
  static ModelSpec logistic(int feature_count, int class_count, double rho);
  /// tanh hidden layers, softmax output, optional ridge term.
  static ModelSpec mlp(int feature_count, std::vector<int> hidden,
                       int class_count, double rho = 0.0);

  ModelKind kind() const { return kind_; }
  Eigen::Index dimension() const { return dimension_; }
  bool uses_data() const { return kind_ != ModelKind::kQuadratic; }
  bool is_convex() const { return kind_ != ModelKind::kMlp; }

  const Matrix& A() const { return A_; }
  const ParamVector& center() const { return center_; }
  double rho() const { return rho_; }
  int feature_count() const { return feature_count_; }
  int class_count() const { return class_count_; }
  const std::vector<int>& hidden() const { return hidden_; }

  std::string describe() const;

 private:
  ModelKind kind_ = ModelKind::kQuadratic;
  Eigen::Index dimension_ = 0;
  Matrix A_;
  ParamVector center_;
  double rho_ = 0.0;
  int feature_count_ = 0;
  int class_count_ = 0;
  std::vector<int> hidden_;
};

/// Rows of one shard; `rows` unset means the whole shard.
struct DataBatch {
  const DataShard* shard = nullptr;
  std::optional<std::vector<Eigen::Index>> rows;

  static DataBatch full(const DataShard& s) { return DataBatch{&s, std::nullopt}; }
  Eigen::Index size() const;
};

/// Mean loss over the batch (plus ridge term where configured).
double loss(const ModelSpec& spec, const ParamVector& params,
            const DataBatch& batch);

/// Analytic gradient of loss().
ParamVector grad(const ModelSpec& spec, const ParamVector& params,
                 const DataBatch& batch);

/// Fraction of correctly classified rows; NaN for quadratic losses.
double accuracy(const ModelSpec& spec, const ParamVector& params,
                const DataShard& shard);

struct ConvexityConstants {
  double mu = 0.0;
  double L = 0.0;
};

/// (mu_k, L_k). Quadratic: extreme eigenvalues of A. LogisticL2: rho and
/// rho + lambda_max(X^T X / n) / 4 (1/2 for softmax). Throws ArgumentError
/// for MLP.
ConvexityConstants convexity_constants(const ModelSpec& spec,
                                       const DataShard* dataset);

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
double power_iteration_lambda_max(const Matrix& S, int max_iter = 100000,
                                  double tol = 1e-14);

/// Deterministic small random initialization (tanh layers need symmetry
/// breaking); zero for the convex kinds.
ParamVector initial_params(const ModelSpec& spec, std::uint64_t seed);

struct QuadraticEnsembleConfig {
  int K = 20;
  int d = 10;
  double eig_min = 1.0;
  double eig_max = 4.0;
  double center_norm = 1.0;  // norm scale of the shared center
  double spread = 1.0;       // client deviation scale around the center
};

/// K quadratics A_k = Q_k diag(lambda) Q_k^T (Haar Q_k, lambda uniform in
/// [eig_min, eig_max], with both endpoints attained) and centers
/// a_k = c + spread * e_k, e_k ~ N(0, I/d).
std::vector<ModelSpec> make_quadratic_ensemble(const QuadraticEnsembleConfig& cfg,
                                               std::uint64_t seed);

}  // namespace otapfl
