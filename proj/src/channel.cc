#include "otapfl/channel.h"

#include <bit>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

namespace otapfl {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::kIdentity: return "identity";
    case BasisKind::kHadamard: return "hadamard";
    case BasisKind::kFourier: return "fourier";
  }
  return "?";
}

std::string to_string(FadingKind kind) {
  switch (kind) {
    case FadingKind::kRayleigh: return "rayleigh";
    case FadingKind::kConstant: return "constant";
    case FadingKind::kGaussianAbs: return "gaussian_abs";
  }
  return "?";
}

std::string to_string(AggregationMode mode) {
  return mode == AggregationMode::kVectorLevel ? "vector" : "waveform";
}

std::string to_string(NoiseReference ref) {
  return ref == NoiseReference::kAggregate ? "aggregate" : "receiver";
}

BasisKind parse_basis_kind(const std::string& s) {
  if (s == "identity") return BasisKind::kIdentity;
  if (s == "hadamard") return BasisKind::kHadamard;
  if (s == "fourier") return BasisKind::kFourier;
  throw ArgumentError("unknown basis kind '" + s + "'");
}

FadingKind parse_fading_kind(const std::string& s) {
  if (s == "rayleigh") return FadingKind::kRayleigh;
  if (s == "constant") return FadingKind::kConstant;
  if (s == "gaussian_abs") return FadingKind::kGaussianAbs;
  throw ArgumentError("unknown fading kind '" + s + "'");
}

AggregationMode parse_aggregation_mode(const std::string& s) {
  if (s == "vector") return AggregationMode::kVectorLevel;
  if (s == "waveform") return AggregationMode::kWaveformLevel;
  throw ArgumentError("unknown aggregation mode '" + s + "'");
}

NoiseReference parse_noise_reference(const std::string& s) {
  if (s == "aggregate") return NoiseReference::kAggregate;
  if (s == "receiver") return NoiseReference::kReceiver;
  throw ArgumentError("unknown noise reference '" + s + "'");
}

WaveformBasis::WaveformBasis(BasisKind kind, Matrix rows)
    : kind_(kind), rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < rows_.rows()) {
    throw DimensionError("waveform basis needs 1 <= d <= S, got d=" +
                         std::to_string(rows_.rows()) +
                         " S=" + std::to_string(rows_.cols()));
  }
  const Matrix gram = rows_ * rows_.transpose();
  const double err =
      (gram - Matrix::Identity(rows_.rows(), rows_.rows())).cwiseAbs().maxCoeff();
  if (err > 1e-12) {
    throw ArgumentError("waveform rows are not orthonormal (max Gram error " +
                        std::to_string(err) + ")");
  }
}

namespace {

Matrix hadamard_rows(Eigen::Index d, Eigen::Index S) {
  if (!std::has_single_bit(static_cast<std::uint64_t>(S))) {
    throw ArgumentError("Hadamard basis requires S to be a power of two, got " +
                        std::to_string(S));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(S));
  Matrix rows(d, S);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < S; ++j) {
      const int parity = std::popcount(static_cast<std::uint64_t>(i & j)) & 1;
      rows(i, j) = parity ? -scale : scale;
    }
  }
  return rows;
}

// Real DFT basis: constant, then (cos, sin) pairs of increasing frequency,
// then the alternating Nyquist row when S is even.
Matrix fourier_rows(Eigen::Index d, Eigen::Index S) {
  const double n = static_cast<double>(S);
  const double c0 = 1.0 / std::sqrt(n);
  const double c1 = std::sqrt(2.0 / n);
  Matrix rows(d, S);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double v;
      if (i == 0) {
        v = c0;
      } else if (S % 2 == 0 && i == S - 1) {
        v = (s % 2 == 0) ? c0 : -c0;
      } else {
        const Eigen::Index m = (i + 1) / 2;
        // Reduce the phase index exactly before converting to an angle.
        const double phase = 2.0 * std::numbers::pi *
                             static_cast<double>((m * s) % S) / n;
        v = (i % 2 == 1) ? c1 * std::cos(phase) : c1 * std::sin(phase);
      }
      rows(i, s) = v;
    }
  }
  return rows;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

WaveformBasis make_basis(Eigen::Index d, Eigen::Index S, BasisKind kind) {
  if (d < 1) throw DimensionError("basis dimension must be positive");
  if (S < d) {
    throw DimensionError("samples per symbol S=" + std::to_string(S) +
                         " is smaller than dimension d=" + std::to_string(d));
  }
  switch (kind) {
    case BasisKind::kIdentity:
      return WaveformBasis(kind, Matrix::Identity(d, S));
    case BasisKind::kHadamard:
      return WaveformBasis(kind, hadamard_rows(d, S));
    case BasisKind::kFourier:
      return WaveformBasis(kind, fourier_rows(d, S));
  }
  throw ArgumentError("unsupported basis kind");
}

Eigen::VectorXd modulate(const ParamVector& gradient,
                         const WaveformBasis& basis) {
  check_dims(gradient.size(), basis.dimension(), "modulate");
  return basis.rows().transpose() * gradient;
}

ParamVector demodulate(const Eigen::VectorXd& signal,
                       const WaveformBasis& basis) {
  check_dims(signal.size(), basis.samples_per_symbol(), "demodulate");
  return basis.rows() * signal;
}

ChannelModel ChannelModel::rayleigh(double mu_h, double sigma2, double power) {
  ChannelModel m;
  m.fading = FadingKind::kRayleigh;
  m.mu_h = mu_h;
  m.sigma_h2 = (4.0 / std::numbers::pi - 1.0) * mu_h * mu_h;
  m.sigma2 = sigma2;
  m.power = power;
  return m.normalized();
}

ChannelModel ChannelModel::constant(double mu_h, double sigma2, double power) {
  ChannelModel m;
  m.fading = FadingKind::kConstant;
  m.mu_h = mu_h;
  m.sigma_h2 = 0.0;
  m.sigma2 = sigma2;
  m.power = power;
  return m.normalized();
}

ChannelModel ChannelModel::gaussian_abs(double mean, double s2, double sigma2,
                                        double power) {
  ChannelModel m;
  m.fading = FadingKind::kGaussianAbs;
  m.gauss_m = mean;
  m.gauss_s2 = s2;
  m.sigma2 = sigma2;
  m.power = power;
  return m.normalized();
}

ChannelModel ChannelModel::normalized() const {
  if (!(power > 0.0)) throw ArgumentError("transmit power P must be positive");
  if (!(sigma2 >= 0.0)) throw ArgumentError("noise variance must be >= 0");
  ChannelModel m = *this;
  switch (fading) {
    case FadingKind::kRayleigh: {
      if (!(mu_h > 0.0)) throw ArgumentError("Rayleigh mu_h must be positive");
      const double implied = (4.0 / std::numbers::pi - 1.0) * mu_h * mu_h;
      if (std::abs(sigma_h2 - implied) > 1e-12 * implied) {
        spdlog::warn(
            "Rayleigh fading: sigma_h2={} ignored, using implied variance {}",
            sigma_h2, implied);
      }
      m.sigma_h2 = implied;
      break;
    }
    case FadingKind::kConstant:
      if (!(sigma_h2 == 0.0)) {
        spdlog::warn("constant fading: sigma_h2={} ignored, using 0", sigma_h2);
      }
      m.sigma_h2 = 0.0;
      break;
    case FadingKind::kGaussianAbs: {
      if (!(gauss_s2 >= 0.0)) {
        throw ArgumentError("GaussianAbs variance must be >= 0");
      }
      const double s = std::sqrt(gauss_s2);
      const double mean =
          s > 0.0 ? s * std::sqrt(2.0 / std::numbers::pi) *
                            std::exp(-gauss_m * gauss_m / (2.0 * gauss_s2)) +
                        gauss_m * (1.0 - 2.0 * std_normal_cdf(-gauss_m / s))
                  : std::abs(gauss_m);
      m.mu_h = mean;
      m.sigma_h2 = std::max(0.0, gauss_m * gauss_m + gauss_s2 - mean * mean);
      break;
    }
  }
  return m;
}

double ChannelModel::noise_gain(std::size_t K) const {
  if (noise_reference == NoiseReference::kAggregate) return 1.0;
  return 1.0 / (power * static_cast<double>(K));
}

double ChannelModel::effective_noise_variance(std::size_t K) const {
  const double g = noise_gain(K);
  return g * g * sigma2;
}

ChannelRealization sample_realization(const ChannelModel& model, std::size_t K,
                                      Eigen::Index d, std::int64_t t,
                                      std::uint64_t seed) {
  if (K < 1 || d < 1) throw ArgumentError("realization needs K >= 1, d >= 1");
  Rng rng = make_stream(seed, StreamTag::kChannel, static_cast<std::uint64_t>(t));
  ChannelRealization r;
  r.round = t;
  r.fadings.resize(static_cast<Eigen::Index>(K));
  r.noise = Eigen::VectorXd::Zero(d);
  r.noise_gain = model.noise_gain(K);

  switch (model.fading) {
    case FadingKind::kConstant:
      r.fadings.setConstant(model.mu_h);
      break;
    case FadingKind::kRayleigh: {
      const double scale = model.mu_h / std::sqrt(std::numbers::pi / 2.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (Eigen::Index k = 0; k < r.fadings.size(); ++k) {
        r.fadings[k] = scale * std::sqrt(-2.0 * std::log1p(-unif(rng)));
      }
      break;
    }
    case FadingKind::kGaussianAbs: {
      std::normal_distribution<double> normal(model.gauss_m,
                                              std::sqrt(model.gauss_s2));
      for (Eigen::Index k = 0; k < r.fadings.size(); ++k) {
        r.fadings[k] = std::abs(normal(rng));
      }
      break;
    }
  }

  if (model.sigma2 > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(model.sigma2));
    for (Eigen::Index i = 0; i < d; ++i) r.noise[i] = normal(rng);
  }
  return r;
}

ParamVector aggregate_ota(std::span<const ParamVector> gradients,
                          const ChannelRealization& realization,
                          AggregationMode mode, const WaveformBasis* basis) {
  const std::size_t K = gradients.size();
  if (K == 0) throw ArgumentError("aggregate_ota: no gradients");
  check_dims(static_cast<Eigen::Index>(K), realization.fadings.size(),
             "aggregate_ota fadings");
  const Eigen::Index d = realization.noise.size();
  for (const auto& g : gradients) check_dims(g.size(), d, "aggregate_ota gradient");
  const double inv_k = 1.0 / static_cast<double>(K);

  if (mode == AggregationMode::kVectorLevel) {
    ParamVector sum = ParamVector::Zero(d);
    for (std::size_t k = 0; k < K; ++k) {
      sum += realization.fadings[static_cast<Eigen::Index>(k)] * gradients[k];
    }
    return inv_k * sum + realization.noise_gain * realization.noise;
  }

  if (basis == nullptr) {
    throw ArgumentError("waveform-level aggregation requires a basis");
  }
  check_dims(basis->dimension(), d, "aggregate_ota basis");
  // Received waveform y(s) = sum_k h_k P x_k(s) + xi(s), with the receiver
  // rescaling the matched-filter output by 1/(K P). The amplitude used here
  // is a unit reference power; only the relative scaling matters.
  const double ref_power = 1.0;
  const double rx_scale = static_cast<double>(K) * ref_power;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(basis->samples_per_symbol());
  for (std::size_t k = 0; k < K; ++k) {
    y += (realization.fadings[static_cast<Eigen::Index>(k)] * ref_power) *
         modulate(gradients[k], *basis);
  }
  y += (realization.noise_gain * rx_scale) * modulate(realization.noise, *basis);
  return demodulate(y, *basis) / rx_scale;
}

}  // namespace otapfl
