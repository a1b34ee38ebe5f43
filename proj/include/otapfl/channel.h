#pragma once

// Analog over-the-air gradient aggregation: orthonormal waveform bases,
// fading/noise realizations and the matched-filter receiver.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otapfl/common.h"

namespace otapfl {

enum class BasisKind { kIdentity, kHadamard, kFourier };
enum class FadingKind { kRayleigh, kConstant, kGaussianAbs };
enum class AggregationMode { kVectorLevel, kWaveformLevel };

/// Where the additive noise enters the link.
///  kAggregate: the matched-filter output is (1/K) sum h_k g_k + xi with
///              xi ~ N(0, sigma2) per coordinate.
///  kReceiver:  xi(s) is added at the antenna and the server rescales the
///              matched-filter output by 1/(K P), so the aggregate carries
///              xi / (K P), i.e. variance sigma2 / (P^2 K^2).
enum class NoiseReference { kAggregate, kReceiver };

std::string to_string(BasisKind kind);
std::string to_string(FadingKind kind);
std::string to_string(AggregationMode mode);
std::string to_string(NoiseReference ref);
BasisKind parse_basis_kind(const std::string& s);
FadingKind parse_fading_kind(const std::string& s);
AggregationMode parse_aggregation_mode(const std::string& s);
NoiseReference parse_noise_reference(const std::string& s);

/// d orthonormal waveforms sampled at S points (unit-weight quadrature).
class WaveformBasis {
 public:
  WaveformBasis(BasisKind kind, Matrix rows);

  BasisKind kind() const { return kind_; }
  Eigen::Index dimension() const { return rows_.rows(); }
  Eigen::Index samples_per_symbol() const { return rows_.cols(); }
  const Matrix& rows() const { return rows_; }

 private:
  BasisKind kind_;
  Matrix rows_;
};

/// Builds an orthonormal basis of d waveforms over S samples.
/// Throws DimensionError if S < d, ArgumentError for a Hadamard basis whose
/// S is not a power of two.
WaveformBasis make_basis(Eigen::Index d, Eigen::Index S, BasisKind kind);

/// x = g^T B: the transmitted analog samples for one gradient.
Eigen::VectorXd modulate(const ParamVector& gradient,
                         const WaveformBasis& basis);

/// Bank of matched filters: B x.
ParamVector demodulate(const Eigen::VectorXd& signal,
                       const WaveformBasis& basis);

struct ChannelModel {
  FadingKind fading = FadingKind::kRayleigh;
  double mu_h = 1.0;
  double sigma_h2 = 0.0;
  double sigma2 = 0.0;
  double power = 1.0;
  NoiseReference noise_reference = NoiseReference::kReceiver;

  /// Rayleigh fading whose mean is mu_h; sigma_h2 is set to the implied
  /// variance (4/pi - 1) mu_h^2.
  static ChannelModel rayleigh(double mu_h, double sigma2, double power = 1.0);
  static ChannelModel constant(double mu_h, double sigma2, double power = 1.0);
  /// |N(m, s2)| fading. mu_h and sigma_h2 hold the exact folded-normal
  /// moments, not m and s2.
  static ChannelModel gaussian_abs(double m, double s2, double sigma2,
                                   double power = 1.0);

  /// Checks ranges and enforces the per-kind moment invariants. For Rayleigh
  /// a caller-supplied sigma_h2 is overwritten (and the discrepancy logged).
  ChannelModel normalized() const;

  /// Gain applied to the raw noise draw in the aggregate for K clients.
  double noise_gain(std::size_t K) const;
  /// Per-coordinate variance of the noise term of the aggregate.
  double effective_noise_variance(std::size_t K) const;

  // Only used by GaussianAbs: parameters of the underlying normal.
  double gauss_m = 0.0;
  double gauss_s2 = 0.0;
};

struct ChannelRealization {
  std::int64_t round = 0;
  Eigen::VectorXd fadings;  // h_{k,t}, length K
  Eigen::VectorXd noise;    // raw xi_t ~ N(0, sigma2), length d
  double noise_gain = 1.0;  // multiplies noise in the aggregate
};

/// Draws fadings and noise for round t. Deterministic in (seed, t).
ChannelRealization sample_realization(const ChannelModel& model, std::size_t K,
                                      Eigen::Index d, std::int64_t t,
                                      std::uint64_t seed);

/// g = (1/K) sum_k h_k g_k + noise_gain * xi. The waveform route modulates
/// each gradient, superposes the faded signals and the noise waveform and
/// matched-filters the result; it agrees with the vector route to rounding.
ParamVector aggregate_ota(std::span<const ParamVector> gradients,
                          const ChannelRealization& realization,
                          AggregationMode mode,
                          const WaveformBasis* basis = nullptr);

}  // namespace otapfl
