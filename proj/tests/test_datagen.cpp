#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "zeroflow/datagen.hpp"
#include "zeroflow/errors.hpp"
#include "zeroflow/rng.hpp"

using namespace zf;

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t(i, j);
  return m;
}

Eigen::MatrixXd covariance(const Tensor& samples) {
  const Eigen::MatrixXd x = to_eigen(samples);
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

std::size_t edge_count(const PrecisionMatrix& p) {
  std::size_t e = 0;
  for (std::size_t i = 0; i < p.d(); ++i)
    for (std::size_t j = i + 1; j < p.d(); ++j) e += p.theta(i, j) != 0.0;
  return e;
}

void expect_valid_precision(const PrecisionMatrix& p) {
  const std::size_t d = p.d();
  for (std::size_t i = 0; i < d; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      EXPECT_EQ(p.theta(i, j), p.theta(j, i));
      if (j != i) off += std::abs(p.theta(i, j));
    }
    EXPECT_GT(p.theta(i, i), off);
  }
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(to_eigen(p.theta)).info(), Eigen::Success);
}

double column_mean(const Tensor& s, std::size_t j) {
  double m = 0.0;
  for (std::size_t r = 0; r < s.rows(); ++r) m += s(r, j);
  return m / static_cast<double>(s.rows());
}

}  // namespace

TEST(Precision, ChainOffDiagonalsAsListed) {
  const PrecisionMatrix p = build_chain_precision({50, {0.8, 0.4, 0.2}, 1.0});
  ASSERT_EQ(p.d(), 50u);
  const double w[] = {0.8, 0.4, 0.2};
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j) {
      const std::size_t lag = i > j ? i - j : j - i;
      if (lag == 0) continue;
      EXPECT_EQ(p.theta(i, j), lag <= 3 ? w[lag - 1] : 0.0) << i << "," << j;
    }
  EXPECT_EQ(edge_count(p), 49u + 48u + 47u);
  expect_valid_precision(p);
}

TEST(Precision, ChainDiagonalRule) {
  const PrecisionMatrix p = build_chain_precision({5, {0.8}, 1.0});
  EXPECT_DOUBLE_EQ(p.theta(0, 0), 1.8);
  EXPECT_DOUBLE_EQ(p.theta(4, 4), 1.8);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_DOUBLE_EQ(p.theta(i, i), 2.6);
}

TEST(Precision, ChainOrderZeroIsDiagonal) {
  const PrecisionMatrix p = build_chain_precision({6, {}, 1.0});
  EXPECT_EQ(edge_count(p), 0u);
  EXPECT_EQ(p.theta, identity(6));
}

TEST(Precision, ChainParameterErrors) {
  EXPECT_THROW(build_chain_precision({5, {0.8}, 0.0}), ParameterError);
  EXPECT_THROW(build_chain_precision({3, {0.8, 0.4, 0.2}, 1.0}), ParameterError);
  EXPECT_THROW(build_chain_precision({5, {NAN}, 1.0}), ParameterError);
}

TEST(Precision, LatticeDegreesAndEdgeCounts) {
  const PrecisionMatrix p8 = build_lattice_precision({8, 0.3, 1.0});
  ASSERT_EQ(p8.d(), 64u);
  EXPECT_EQ(lattice_neighbors(8, 0).size(), 2u);
  EXPECT_EQ(lattice_neighbors(8, 9).size(), 4u);
  EXPECT_EQ(lattice_neighbors(8, 3).size(), 3u);
  EXPECT_EQ(lattice_neighbors(8, 9), (std::vector<std::size_t>{1, 8, 10, 17}));
  EXPECT_EQ(edge_count(p8), 2u * 8u * 7u);
  expect_valid_precision(p8);

  const PrecisionMatrix p2 = build_lattice_precision({2, 0.3, 1.0});
  EXPECT_EQ(edge_count(p2), 4u);
  EXPECT_EQ(p2.theta(0, 3), 0.0);
  EXPECT_EQ(p2.theta(1, 2), 0.0);

  EXPECT_EQ(edge_count(build_lattice_precision({15, 0.3, 1.0})), 420u);
  EXPECT_THROW(build_lattice_precision({1, 0.3, 1.0}), ParameterError);
}

TEST(Precision, LatticeEdgesAreGridAdjacency) {
  const std::size_t side = 5;
  const PrecisionMatrix p = build_lattice_precision({side, 0.3, 1.0});
  for (std::size_t i = 0; i < side * side; ++i)
    for (std::size_t j = 0; j < side * side; ++j) {
      if (i == j) continue;
      const auto ri = i / side, ci = i % side, rj = j / side, cj = j % side;
      const std::size_t dist = (ri > rj ? ri - rj : rj - ri) + (ci > cj ? ci - cj : cj - ci);
      EXPECT_EQ(p.theta(i, j) != 0.0, dist == 1);
    }
  // Interior node: 4 * 0.3 + 1.
  EXPECT_DOUBLE_EQ(p.theta(6, 6), 2.2);
}

TEST(SampleGaussian, OneDimensionalVariance) {
  const std::size_t n = 100000;
  const Dataset data = sample_gaussian({Tensor::matrix({{4.0}})}, n, 3);
  double s = 0, ss = 0;
  for (double v : data.samples.data()) {
    s += v;
    ss += v * v;
  }
  const double mean = s / n, var = ss / n - mean * mean;
  // SE of the variance of a normal: sigma^2 sqrt(2/n).
  EXPECT_NEAR(var, 0.25, 3.0 * 0.25 * std::sqrt(2.0 / n));
  EXPECT_NEAR(mean, 0.0, 4.0 * 0.5 / std::sqrt(n));
}

TEST(SampleGaussian, IdentityCovarianceAndZeroMean) {
  const std::size_t n = 50000, d = 4;
  const Dataset data = sample_gaussian({identity(d)}, n, 8);
  const Eigen::MatrixXd c = covariance(data.samples);
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_NEAR(column_mean(data.samples, i), 0.0, 4.0 / std::sqrt(n));
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(c(i, j), i == j ? 1.0 : 0.0, 0.03);
  }
}

TEST(SampleGaussian, EmpiricalPrecisionMatchesTheta) {
  for (const GraphSpec& g : {GraphSpec{ChainSpec{10, {0.8, 0.4, 0.2}, 1.0}}, GraphSpec{LatticeSpec{3, 0.3, 1.0}}}) {
    const PrecisionMatrix p = build_precision(g);
    const Dataset data = sample_gaussian(p, 10000, 5);
    const Eigen::MatrixXd prec = covariance(data.samples).inverse();
    // Asymptotic standard error of an inverse-covariance entry:
    // sqrt((theta_ij^2 + theta_ii theta_jj) / n).
    const double n = 10000.0;
    for (std::size_t i = 0; i < p.d(); ++i)
      for (std::size_t j = 0; j < p.d(); ++j) {
        const double se = std::sqrt((p.theta(i, j) * p.theta(i, j) + p.theta(i, i) * p.theta(j, j)) / n);
        EXPECT_NEAR(prec(i, j), p.theta(i, j), std::max(0.15, 4.0 * se)) << i << "," << j;
      }
  }
}

TEST(SampleGaussian, NotPositiveDefinite) {
  EXPECT_THROW(sample_gaussian({Tensor::matrix({{1, 2}, {2, 1}})}, 10, 0), NumericError);
}

TEST(Nonparanormal, StandardizedAndRankPreserving) {
  const Dataset latent = sample_gaussian(build_chain_precision({6, {0.8}, 1.0}), 3000, 4);
  const Dataset out = nonparanormal_transform(latent, 3.0);
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_NEAR(column_mean(out.samples, j), 0.0, 1e-10);
    double v = 0.0;
    for (std::size_t r = 0; r < out.n(); ++r) v += out.samples(r, j) * out.samples(r, j);
    EXPECT_NEAR(v / static_cast<double>(out.n()), 1.0, 1e-10);

    std::vector<std::size_t> a(out.n()), b(out.n());
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    std::sort(a.begin(), a.end(), [&](auto x, auto y) { return latent.samples(x, j) < latent.samples(y, j); });
    std::sort(b.begin(), b.end(), [&](auto x, auto y) { return out.samples(x, j) < out.samples(y, j); });
    EXPECT_EQ(a, b);
  }
}

TEST(Nonparanormal, SignedPowerBeforeStandardization) {
  // Symmetric column: the mean stays 0, so only the scale changes.
  Dataset data{Tensor::matrix({{-2}, {0}, {2}})};
  const Dataset out = nonparanormal_transform(data, 3.0);
  EXPECT_EQ(out.samples(1, 0), 0.0);
  EXPECT_NEAR(out.samples(2, 0), std::sqrt(1.5), 1e-12);
  EXPECT_NEAR(out.samples(0, 0), -std::sqrt(1.5), 1e-12);
}

TEST(Nonparanormal, Errors) {
  EXPECT_THROW(nonparanormal_transform({Tensor::matrix({{1, 2}, {1, 3}})}, 3.0), DataError);
  EXPECT_THROW(nonparanormal_transform({Tensor::matrix({{1}, {2}})}, 0.0), ParameterError);
}

TEST(Truncated, AllAboveThreshold) {
  const Dataset d = sample_truncated(build_chain_precision({20, {0.8, 0.4, 0.2}, 1.0}), -0.75, 500, 50, 2, 1);
  EXPECT_EQ(d.samples.shape(), (Shape{500, 20}));
  for (double v : d.samples.data()) EXPECT_GT(v, -0.75);
}

TEST(Truncated, HalfNormalMean) {
  const std::size_t n = 20000;
  const Dataset d = sample_truncated({Tensor::matrix({{1.0}})}, 0.0, n, 10, 1, 2);
  const double mean = column_mean(d.samples, 0);
  const double expected = std::sqrt(2.0 / std::numbers::pi);
  const double se = std::sqrt((1.0 - 2.0 / std::numbers::pi) / n);
  EXPECT_NEAR(mean, expected, 3.0 * se);
}

TEST(Truncated, NoTruncationMatchesGaussian) {
  const PrecisionMatrix p = build_chain_precision({4, {0.8}, 1.0});
  const Dataset gibbs = sample_truncated(p, kNoTruncation, 20000, 100, 5, 3);
  const Dataset direct = sample_gaussian(p, 20000, 3);
  const Eigen::MatrixXd cg = covariance(gibbs.samples), cd = covariance(direct.samples);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(column_mean(gibbs.samples, i), column_mean(direct.samples, i), 0.05);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(cg(i, j), cd(i, j), 0.05);
  }
}

TEST(Truncated, ParameterErrors) {
  const PrecisionMatrix p{identity(2)};
  EXPECT_THROW(sample_truncated(p, 0.0, 10, 0, 0, 0), ParameterError);
  EXPECT_THROW(sample_truncated(p, NAN, 10, 0, 1, 0), ParameterError);
}

TEST(Truncated, NormalAboveSampler) {
  Rng rng(6);
  for (double lower : {-1.0, 0.0, 2.5, 8.0}) {
    for (int i = 0; i < 200; ++i) EXPECT_GT(sample_normal_above(lower, rng), lower);
  }
}

TEST(DemoData, RegressionSlopeAndVariance) {
  const std::size_t n = 50000;
  const Dataset d = conditional_demo_data(n, 12);
  ASSERT_EQ(d.d(), 2u);
  double sx = 0, sy = 0, sxy = 0, syy = 0, sxx = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double x = d.samples(r, 0), y = d.samples(r, 1);
    sx += x;
    sy += y;
    sxy += x * y;
    syy += y * y;
    sxx += x * x;
  }
  const double mx = sx / n, my = sy / n;
  const double vy = syy / n - my * my, vx = sxx / n - mx * mx;
  const double slope = (sxy / n - mx * my) / vy;
  // Residual variance 1, so SE(slope) = 1 / sqrt(n var(Y)).
  EXPECT_NEAR(slope, 0.5, 3.0 / std::sqrt(n * vy));
  EXPECT_NEAR(vx, 1.25, 3.0 * 1.25 * std::sqrt(2.0 / n));
}

TEST(DemoData, ZeroNoiseIsExact) {
  const Dataset d = conditional_demo_data(100, 1, 0.0);
  for (std::size_t r = 0; r < 100; ++r) EXPECT_EQ(d.samples(r, 0), 0.5 * d.samples(r, 1));
}

TEST(DemoData, MixtureComponents) {
  const std::size_t n = 40000;
  const Dataset d = mixture2d(n, 9);
  std::size_t counts[4] = {};
  double ss[4] = {};
  double mx = 0, my = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double x = d.samples(r, 0), y = d.samples(r, 1);
    mx += x;
    my += y;
    const int k = (x > 0 ? 1 : 0) + (y > 0 ? 2 : 0);
    ++counts[k];
    const double cx = x > 0 ? 1.5 : -1.5, cy = y > 0 ? 1.5 : -1.5;
    ss[k] += (x - cx) * (x - cx) + (y - cy) * (y - cy);
  }
  const double se = std::sqrt(0.25 * 0.75 / n);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(static_cast<double>(counts[k]) / n, 0.25, 3.0 * se);
    EXPECT_NEAR(std::sqrt(ss[k] / (2.0 * counts[k])), 0.3, 0.01);
  }
  EXPECT_NEAR(mx / n, 0.0, 0.03);
  EXPECT_NEAR(my / n, 0.0, 0.03);
}

TEST(Generate, BitReproducibleAndMeta) {
  const GraphSpec g = ChainSpec{8, {0.8, 0.4}, 1.0};
  for (const MarginalTransform& tr :
       {MarginalTransform{GaussianMarginals{}}, MarginalTransform{NonparanormalMarginals{3.0}},
        MarginalTransform{TruncatedMarginals{-0.75, 20, 2}}}) {
    const Dataset a = generate(g, tr, 200, 5), b = generate(g, tr, 200, 5), c = generate(g, tr, 200, 6);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_NE(a.samples, c.samples);
    EXPECT_EQ(a.meta, b.meta);
    EXPECT_EQ(a.meta.at("seed"), 5);
    EXPECT_EQ(a.meta.at("graph").at("kind"), "chain");
    EXPECT_TRUE(a.samples.all_finite());
  }
  EXPECT_EQ(mixture2d(50, 2).samples, mixture2d(50, 2).samples);
  EXPECT_THROW(generate(g, GaussianMarginals{}, 0, 1), ParameterError);
}
