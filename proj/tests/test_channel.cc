#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "otapfl/channel.h"

using namespace otapfl;

namespace {

Matrix sylvester(Eigen::Index S) {
  Matrix h(1, 1);
  h(0, 0) = 1.0;
  while (h.rows() < S) {
    const auto n = h.rows();
    Matrix next(2 * n, 2 * n);
    next << h, h, h, -h;
    h = next;
  }
  return h / std::sqrt(static_cast<double>(S));
}

ParamVector random_vector(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ParamVector v(d);
  for (auto& x : v) x = n(rng);
  return v;
}

}  // namespace

TEST(Basis, RowsAreOrthonormalForEveryKind) {
  struct Case {
    BasisKind kind;
    Eigen::Index d, S;
  };
  for (const auto& c : std::vector<Case>{{BasisKind::kIdentity, 5, 9},
                                         {BasisKind::kHadamard, 5, 8},
                                         {BasisKind::kHadamard, 16, 16},
                                         {BasisKind::kFourier, 7, 7},
                                         {BasisKind::kFourier, 8, 8},
                                         {BasisKind::kFourier, 3, 10}}) {
    const auto b = make_basis(c.d, c.S, c.kind);
    const Matrix gram = b.rows() * b.rows().transpose();
    EXPECT_LT((gram - Matrix::Identity(c.d, c.d)).cwiseAbs().maxCoeff(), 1e-12)
        << to_string(c.kind) << " d=" << c.d << " S=" << c.S;
  }
}

TEST(Basis, HadamardMatchesSylvesterConstruction) {
  const auto b = make_basis(8, 8, BasisKind::kHadamard);
  EXPECT_LT((b.rows() - sylvester(8)).cwiseAbs().maxCoeff(), 1e-15);
  const auto partial = make_basis(3, 16, BasisKind::kHadamard);
  EXPECT_LT((partial.rows() - sylvester(16).topRows(3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Basis, FourierRowsAreSampledCosinesAndSines) {
  const Eigen::Index S = 12;
  const auto b = make_basis(4, S, BasisKind::kFourier);
  for (Eigen::Index s = 0; s < S; ++s) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(s) / S;
    EXPECT_NEAR(b.rows()(0, s), 1.0 / std::sqrt(double(S)), 1e-14);
    EXPECT_NEAR(b.rows()(1, s), std::sqrt(2.0 / S) * std::cos(phase), 1e-14);
    EXPECT_NEAR(b.rows()(2, s), std::sqrt(2.0 / S) * std::sin(phase), 1e-14);
    EXPECT_NEAR(b.rows()(3, s), std::sqrt(2.0 / S) * std::cos(2 * phase), 1e-14);
  }
}

TEST(Basis, RejectsInvalidShapes) {
  EXPECT_THROW(make_basis(4, 3, BasisKind::kIdentity), DimensionError);
  EXPECT_THROW(make_basis(0, 3, BasisKind::kIdentity), DimensionError);
  EXPECT_THROW(make_basis(3, 12, BasisKind::kHadamard), ArgumentError);
}

TEST(Basis, DemodulateInvertsModulate) {
  Rng rng(7);
  for (auto kind : {BasisKind::kIdentity, BasisKind::kHadamard, BasisKind::kFourier}) {
    const auto b = make_basis(10, 16, kind);
    const ParamVector g = random_vector(10, rng);
    const auto x = modulate(g, b);
    EXPECT_EQ(x.size(), 16);
    EXPECT_LT((demodulate(x, b) - g).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Basis, ModulateChecksDimension) {
  const auto b = make_basis(4, 4, BasisKind::kIdentity);
  EXPECT_THROW(modulate(ParamVector::Ones(5), b), DimensionError);
  EXPECT_THROW(demodulate(Eigen::VectorXd::Ones(3), b), DimensionError);
}

TEST(ChannelModel, RayleighVarianceFollowsMean) {
  // Variance of a Rayleigh law with mean 2, integrated numerically.
  const double mu = 2.0;
  const double s = mu / std::sqrt(std::numbers::pi / 2.0);
  auto pdf = [s](double x) { return x / (s * s) * std::exp(-x * x / (2 * s * s)); };
  using boost::math::quadrature::gauss_kronrod;
  const double m1 = gauss_kronrod<double, 61>::integrate(
      [&](double x) { return x * pdf(x); }, 0.0, 40.0 * s, 10, 1e-13);
  const double m2 = gauss_kronrod<double, 61>::integrate(
      [&](double x) { return x * x * pdf(x); }, 0.0, 40.0 * s, 10, 1e-13);
  const auto ch = ChannelModel::rayleigh(mu, 0.0);
  EXPECT_NEAR(ch.mu_h, m1, 1e-10);
  EXPECT_NEAR(ch.sigma_h2, m2 - m1 * m1, 1e-10);
}

TEST(ChannelModel, NormalizedOverridesInconsistentRayleighVariance) {
  auto ch = ChannelModel::rayleigh(1.0, 0.1);
  ch.sigma_h2 = 5.0;
  EXPECT_NEAR(ch.normalized().sigma_h2, 4.0 / std::numbers::pi - 1.0, 1e-15);
  auto c = ChannelModel::constant(1.5, 0.0);
  c.sigma_h2 = 2.0;
  EXPECT_EQ(c.normalized().sigma_h2, 0.0);
}

TEST(ChannelModel, FoldedNormalMomentsMatchQuadrature) {
  const double m = 0.7, s2 = 0.8;
  const double sd = std::sqrt(s2);
  auto phi = [&](double x) {
    return std::exp(-(x - m) * (x - m) / (2 * s2)) / (sd * std::sqrt(2 * std::numbers::pi));
  };
  using boost::math::quadrature::gauss_kronrod;
  const double lo = m - 30 * sd, hi = m + 30 * sd;
  const double e1 = gauss_kronrod<double, 61>::integrate(
      [&](double x) { return std::abs(x) * phi(x); }, lo, 0.0, 10, 1e-13) +
                    gauss_kronrod<double, 61>::integrate(
      [&](double x) { return std::abs(x) * phi(x); }, 0.0, hi, 10, 1e-13);
  const double e2 = m * m + s2;
  const auto ch = ChannelModel::gaussian_abs(m, s2, 0.0);
  EXPECT_NEAR(ch.mu_h, e1, 1e-10);
  EXPECT_NEAR(ch.sigma_h2, e2 - e1 * e1, 1e-10);
}

TEST(ChannelModel, RejectsInvalidParameters) {
  EXPECT_THROW(ChannelModel::rayleigh(0.0, 0.1).normalized(), ArgumentError);
  EXPECT_THROW(ChannelModel::rayleigh(1.0, -0.1).normalized(), ArgumentError);
  EXPECT_THROW(ChannelModel::rayleigh(1.0, 0.1, 0.0).normalized(), ArgumentError);
}

TEST(ChannelModel, NoiseGainDependsOnReference) {
  auto ch = ChannelModel::constant(1.0, 0.5, 2.0);
  ch.noise_reference = NoiseReference::kAggregate;
  EXPECT_EQ(ch.noise_gain(10), 1.0);
  EXPECT_EQ(ch.effective_noise_variance(10), 0.5);
  ch.noise_reference = NoiseReference::kReceiver;
  EXPECT_DOUBLE_EQ(ch.noise_gain(10), 1.0 / 20.0);
  EXPECT_DOUBLE_EQ(ch.effective_noise_variance(10), 0.5 / 400.0);
}

TEST(Realization, DeterministicInSeedAndRound) {
  const auto ch = ChannelModel::rayleigh(1.0, 0.3);
  const auto a = sample_realization(ch, 6, 4, 3, 11);
  const auto b = sample_realization(ch, 6, 4, 3, 11);
  const auto c = sample_realization(ch, 6, 4, 4, 11);
  const auto e = sample_realization(ch, 6, 4, 3, 12);
  EXPECT_EQ(a.fadings, b.fadings);
  EXPECT_EQ(a.noise, b.noise);
  EXPECT_NE(a.fadings, c.fadings);
  EXPECT_NE(a.noise, e.noise);
  EXPECT_EQ(a.round, 3);
}

TEST(Realization, ZeroNoiseAndConstantFading) {
  const auto r = sample_realization(ChannelModel::constant(1.3, 0.0), 5, 7, 0, 1);
  EXPECT_TRUE((r.noise.array() == 0.0).all());
  EXPECT_TRUE((r.fadings.array() == 1.3).all());
}

TEST(Realization, RayleighDrawsPassKolmogorovSmirnov) {
  const auto ch = ChannelModel::rayleigh(1.0, 0.0);
  const double s = 1.0 / std::sqrt(std::numbers::pi / 2.0);
  std::vector<double> x;
  for (int t = 0; t < 200; ++t) {
    const auto r = sample_realization(ch, 100, 1, t, 5);
    x.insert(x.end(), r.fadings.begin(), r.fadings.end());
  }
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = 1.0 - std::exp(-x[i] * x[i] / (2 * s * s));
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  EXPECT_LT(D, 1.628 / std::sqrt(n));  // 1% critical value
}

TEST(Aggregate, VectorRouteIsFadedMeanPlusScaledNoise) {
  Rng rng(3);
  std::vector<ParamVector> g;
  for (int k = 0; k < 4; ++k) g.push_back(random_vector(6, rng));
  ChannelRealization r;
  r.fadings = Eigen::Vector4d(0.5, 1.0, 1.5, 2.0);
  r.noise = random_vector(6, rng);
  r.noise_gain = 0.25;
  const ParamVector want =
      (0.5 * g[0] + 1.0 * g[1] + 1.5 * g[2] + 2.0 * g[3]) / 4.0 + 0.25 * r.noise;
  const ParamVector got = aggregate_ota(g, r, AggregationMode::kVectorLevel);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Aggregate, WaveformRouteMatchesVectorRoute) {
  Rng rng(9);
  for (auto kind : {BasisKind::kIdentity, BasisKind::kHadamard, BasisKind::kFourier}) {
    for (auto ref : {NoiseReference::kAggregate, NoiseReference::kReceiver}) {
      auto ch = ChannelModel::rayleigh(1.0, 0.2);
      ch.noise_reference = ref;
      std::vector<ParamVector> g;
      for (int k = 0; k < 5; ++k) g.push_back(random_vector(7, rng));
      const auto r = sample_realization(ch, 5, 7, 2, 4);
      const auto b = make_basis(7, 8, kind);
      const ParamVector v = aggregate_ota(g, r, AggregationMode::kVectorLevel);
      const ParamVector w = aggregate_ota(g, r, AggregationMode::kWaveformLevel, &b);
      EXPECT_LT((v - w).cwiseAbs().maxCoeff(), 1e-12) << to_string(kind);
    }
  }
}

TEST(Aggregate, ChecksInputs) {
  ChannelRealization r;
  r.fadings = Eigen::VectorXd::Ones(2);
  r.noise = Eigen::VectorXd::Zero(3);
  std::vector<ParamVector> g{ParamVector::Ones(3), ParamVector::Ones(3)};
  EXPECT_THROW(aggregate_ota({}, r, AggregationMode::kVectorLevel), ArgumentError);
  EXPECT_THROW(aggregate_ota(g, r, AggregationMode::kWaveformLevel), ArgumentError);
  g.push_back(ParamVector::Ones(3));
  EXPECT_THROW(aggregate_ota(g, r, AggregationMode::kVectorLevel), DimensionError);
  std::vector<ParamVector> bad{ParamVector::Ones(3), ParamVector::Ones(4)};
  EXPECT_THROW(aggregate_ota(bad, r, AggregationMode::kVectorLevel), DimensionError);
}

TEST(EnumNames, RoundTrip) {
  for (auto k : {BasisKind::kIdentity, BasisKind::kHadamard, BasisKind::kFourier}) {
    EXPECT_EQ(parse_basis_kind(to_string(k)), k);
  }
  for (auto k : {FadingKind::kRayleigh, FadingKind::kConstant, FadingKind::kGaussianAbs}) {
    EXPECT_EQ(parse_fading_kind(to_string(k)), k);
  }
  for (auto m : {AggregationMode::kVectorLevel, AggregationMode::kWaveformLevel}) {
    EXPECT_EQ(parse_aggregation_mode(to_string(m)), m);
  }
  for (auto r : {NoiseReference::kAggregate, NoiseReference::kReceiver}) {
    EXPECT_EQ(parse_noise_reference(to_string(r)), r);
  }
  EXPECT_THROW(parse_basis_kind("wavelet"), ArgumentError);
  EXPECT_THROW(parse_fading_kind("rician"), ArgumentError);
}
