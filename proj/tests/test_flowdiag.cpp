#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "zeroflow/errors.hpp"
#include "zeroflow/flowdiag.hpp"
#include "zeroflow/rng.hpp"

using namespace zf;

namespace {

const GaussianPair kStandard{0, 1, 0, 1};
const GaussianPair kShifted{0, 1, 1, 1};

VelocityField constant_field(double c) {
  return [c](const Tensor& z, double) { return Tensor(z.shape(), c); };
}

// Brute-force oracle: E[X1 - X0 | X_t = z] for independent Gaussians by
// Gaussian conditioning written out from the joint covariance of
// (X1 - X0, X_t).
double conditioning_oracle(const GaussianPair& p, double t, double z) {
  const double v0 = p.sigma0 * p.sigma0, v1 = p.sigma1 * p.sigma1;
  const double cov = t * v1 - (1.0 - t) * v0;
  const double var_t = t * t * v1 + (1.0 - t) * (1.0 - t) * v0;
  const double mean_t = t * p.mu1 + (1.0 - t) * p.mu0;
  return (p.mu1 - p.mu0) + cov / var_t * (z - mean_t);
}

}  // namespace

TEST(Analytic, Examples) {
  for (double z : {-2.0, -0.3, 0.0, 1.7}) {
    EXPECT_EQ(analytic_velocity(kStandard, 0.5, z), 0.0);
    EXPECT_NEAR(analytic_velocity(kStandard, 0.25, z), -0.8 * z, 1e-15);
    EXPECT_NEAR(analytic_velocity(kShifted, 0.5, z), 1.0, 1e-15);
  }
  // Endpoint limits: v_0(z) = -z and v_1(z) = z for the standard pair.
  EXPECT_EQ(analytic_velocity(kStandard, 0.0, 1.5), -1.5);
  EXPECT_EQ(analytic_velocity(kStandard, 1.0, 1.5), 1.5);
  EXPECT_THROW(analytic_velocity(kStandard, -0.1, 1.0), ParameterError);
  EXPECT_THROW(analytic_velocity(kStandard, 1.1, 1.0), ParameterError);
  EXPECT_THROW(analytic_velocity({0, 0, 0, 1}, 0.5, 1.0), ParameterError);
}

TEST(Analytic, MatchesConditioningOracle) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const GaussianPair p{rng.normal(), 0.2 + rng.uniform() * 2, rng.normal(), 0.2 + rng.uniform() * 2};
    const double t = 0.01 + 0.98 * rng.uniform(), z = 3.0 * rng.normal();
    EXPECT_NEAR(analytic_velocity(p, t, z), conditioning_oracle(p, t, z), 1e-12);
  }
}

TEST(Analytic, ExactAntisymmetryForEqualPair) {
  const VelocityField f = analytic_field(kStandard);
  const auto times = t_grid();
  EXPECT_LE(antisymmetry_residual(f, z_grid(), times), 1e-12);
  const Tensor grid = z_grid();
  for (double t : times)
    for (double z : grid.data())
      EXPECT_NEAR(analytic_velocity(kStandard, t, z), -analytic_velocity(kStandard, 1.0 - t, z), 1e-12);
}

TEST(Grids, Layout) {
  const Tensor z = z_grid();
  ASSERT_EQ(z.shape(), (Shape{81, 1}));
  EXPECT_DOUBLE_EQ(z[0], -2.0);
  EXPECT_DOUBLE_EQ(z[40], 0.0);
  EXPECT_DOUBLE_EQ(z[80], 2.0);
  const auto t = t_grid();
  ASSERT_EQ(t.size(), 9u);
  EXPECT_DOUBLE_EQ(t.front(), 0.1);
  EXPECT_DOUBLE_EQ(t.back(), 0.9);
}

TEST(Statistics, MidpointNormExamples) {
  EXPECT_EQ(midpoint_norm(constant_field(0.0), z_grid()), 0.0);
  EXPECT_NEAR(midpoint_norm(analytic_field(kShifted), z_grid()), 1.0, 1e-14);
  // Vector norm per row, not per coordinate.
  Tensor pts({3, 2});
  EXPECT_NEAR(midpoint_norm(constant_field(1.0), pts), std::sqrt(2.0), 1e-15);
}

TEST(Statistics, AntisymmetryResidualShiftedPair) {
  const std::vector<double> half{0.5};
  EXPECT_NEAR(antisymmetry_residual(analytic_field(kShifted), z_grid(), half), 2.0, 1e-14);
}

TEST(Statistics, FieldMae) {
  const auto times = t_grid();
  EXPECT_EQ(field_mae(analytic_field(kStandard), analytic_field(kStandard), z_grid(), times), 0.0);
  EXPECT_NEAR(field_mae(constant_field(0.25), constant_field(-0.5), z_grid(), times), 0.75, 1e-15);
}

TEST(Euler, ZeroAndConstantFields) {
  Rng rng(1);
  Tensor x0({50, 2});
  for (double& v : x0.storage()) v = std::round(4.0 * rng.normal()) / 4.0;  // dyadic, so sums are exact
  EXPECT_EQ(euler_integrate(constant_field(0.0), x0, 100), x0);
  const Tensor x1 = euler_integrate(constant_field(0.5), x0, 4);
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_EQ(x1[i], x0[i] + 0.5);
  EXPECT_THROW(euler_integrate(constant_field(0.0), x0, 0), ParameterError);
}

TEST(Euler, NonFiniteStateNamesStep) {
  const VelocityField blowup = [](const Tensor& z, double) {
    Tensor v = z;
    for (double& e : v.storage()) e = e * 1e200;
    return v;
  };
  try {
    (void)euler_integrate(blowup, Tensor({1, 1}, 1.0), 10);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Euler, OracleTransportsToTarget) {
  const Dataset src = gaussian_samples(4096, 1, 0.0, 1.0, 7);
  const Tensor x1 = euler_integrate(analytic_field(kShifted), src.samples, 100);
  const TransportError e = moment_error(x1, 1.0, 1.0);
  EXPECT_LT(e.mean_err, 0.1);
  EXPECT_LT(e.var_err, 0.15);
}

TEST(Statistics, MomentErrorUsesSampleVariance) {
  const Tensor s = Tensor::matrix({{1, 0}, {3, 0}});
  // Column 0: mean 2, sample variance 2. Column 1: mean 0, variance 0.
  const TransportError e = moment_error(s, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(e.mean_err, (1.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(e.var_err, (1.0 + 1.0) / 2.0);
}

TEST(Diagnose, ReportsAllComponents) {
  const Dataset src = gaussian_samples(512, 1, 0.0, 1.0, 1);
  const auto times = t_grid();
  const DiagnosticsReport r = diagnose(analytic_field(kStandard), z_grid(), times, src.samples, 0.0, 1.0);
  EXPECT_LT(r.midpoint_norm, 1e-15);
  EXPECT_LT(r.antisymmetry_residual, 1e-12);
  const nlohmann::json j = to_json(r);
  for (const char* key : {"midpoint_norm", "antisymmetry_residual", "transport_error"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Unconditional, ShortRunSeparatesEqualFromShifted) {
  TrainConfig cfg;
  cfg.iterations = 600;
  cfg.lr = 1e-3;
  cfg.batch_size = 128;
  cfg.velocity_hidden = 64;
  const Dataset p = gaussian_samples(1024, 1, 0.0, 1.0, 1);
  const Dataset q_same = gaussian_samples(1024, 1, 0.0, 1.0, 2);
  const Dataset q_shift = gaussian_samples(1024, 1, 1.0, 1.0, 2);
  const UncondVelocityNet same = train_unconditional(p, q_same, cfg);
  const UncondVelocityNet shift = train_unconditional(p, q_shift, cfg);
  const double m_same = midpoint_norm(as_field(same), z_grid());
  const double m_shift = midpoint_norm(as_field(shift), z_grid());
  EXPECT_GT(m_shift, 3.0 * m_same);
  EXPECT_NEAR(m_shift, 1.0, 0.3);

  const UncondVelocityNet again = train_unconditional(p, q_same, cfg);
  EXPECT_EQ(again.net, same.net);
  EXPECT_THROW(train_unconditional(p, gaussian_samples(10, 2, 0, 1, 0), cfg), ShapeError);
}

TEST(Sufficiency, ShortRunIsFiniteAndDeterministic) {
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.batch_size = 64;
  cfg.velocity_hidden = 32;
  const Dataset demo = conditional_demo_data(256, 3);
  const ScalarMap f = [](double y) { return std::sin(2.0 * y); };
  const double a = sufficiency_score(demo, f, cfg), b = sufficiency_score(demo, f, cfg);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_GE(a, 0.0);
  EXPECT_EQ(a, b);
}
