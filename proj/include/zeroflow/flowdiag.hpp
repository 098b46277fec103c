#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "zeroflow/config.hpp"
#include "zeroflow/datagen.hpp"
#include "zeroflow/models.hpp"

namespace zf {

/// Source N(mu0, sigma0^2) and target N(mu1, sigma1^2) on the real line.
struct GaussianPair {
  double mu0 = 0.0, sigma0 = 1.0;
  double mu1 = 0.0, sigma1 = 1.0;
};

/// Exact independent-coupling velocity E[X1 - X0 | X_t = z] for a
/// Gaussian pair. Requires t in [0, 1].
double analytic_velocity(const GaussianPair& pair, double t, double z);

/// z is [k x d]; returns the velocity at time t for every row.
using VelocityField = std::function<Tensor(const Tensor& z, double t)>;

/// The analytic velocity applied coordinatewise.
VelocityField analytic_field(const GaussianPair& pair);

/// Unconditional field over x_t | t: d + 1 inputs, d outputs.
struct UncondVelocityNet {
  std::size_t d = 0;
  MlpParams net;

  static UncondVelocityNet create(std::size_t d, std::size_t hidden, std::uint64_t seed);
  Tensor operator()(const Tensor& z, double t) const;
};

VelocityField as_field(const UncondVelocityNet& net);

/// Regresses q_row - p_row on (x_t, t) with rows drawn independently from
/// the two sample sets and t ~ Beta(alpha, alpha). No masks, no encoder.
UncondVelocityNet train_unconditional(const Dataset& p, const Dataset& q, const TrainConfig& cfg);

/// 81 evenly spaced points on [-2, 2], as [81 x 1].
Tensor z_grid();
/// {0.1, 0.2, ..., 0.9}.
std::vector<double> t_grid();

/// Mean over rows of ||v(z, 0.5)||.
double midpoint_norm(const VelocityField& field, const Tensor& points);
/// Mean over rows and times of ||v(z, t) + v(z, 1 - t)||.
double antisymmetry_residual(const VelocityField& field, const Tensor& points, std::span<const double> times);
/// Mean absolute difference between two fields over rows, coordinates and times.
double field_mae(const VelocityField& a, const VelocityField& b, const Tensor& points, std::span<const double> times);

/// Forward Euler from t = 0 to t = 1 in `steps` uniform steps.
Tensor euler_integrate(const VelocityField& field, const Tensor& x0, std::size_t steps);

struct TransportError {
  double mean_err = 0.0;
  double var_err = 0.0;
};

/// Per-coordinate |sample mean - mean| and |sample variance - var|,
/// averaged over coordinates.
TransportError moment_error(const Tensor& samples, double mean, double var);

struct DiagnosticsReport {
  double midpoint_norm = 0.0;
  double antisymmetry_residual = 0.0;
  TransportError transport_error;
  nlohmann::json notes = nlohmann::json::object();
};

DiagnosticsReport diagnose(const VelocityField& field, const Tensor& points, std::span<const double> times,
                           const Tensor& x0, double target_mean, double target_var, std::size_t steps = 100);
nlohmann::json to_json(const DiagnosticsReport& report);

// ---------------------------------------------------------------------------
// Fixed-statistic sufficiency

using ScalarMap = std::function<double(double)>;

/// Conditional field for 1-D X and Y with a fixed statistic f:
/// inputs x_t | f(y') | y | t.
struct SufficiencyNet {
  MlpParams net;
  ScalarMap f;

  /// Rows of x_t, fy, y are 1-element; `fy` is the value fed as f(y').
  Tensor operator()(const Tensor& x_t, const Tensor& fy, const Tensor& y, double t) const;
};

struct SufficiencyResult {
  double score = 0.0;
  SufficiencyNet net;
};

/// Trains on the first three quarters of the rows (column 0 = X, column
/// 1 = Y) and scores mean |v(x_mid, f(y), y, 0.5)| on the remaining rows,
/// with x_mid the midpoint between each held-out X and an independently
/// chosen held-out partner.
SufficiencyResult train_sufficiency(const Dataset& demo, const ScalarMap& f, const TrainConfig& cfg);
double sufficiency_score(const Dataset& demo, const ScalarMap& f, const TrainConfig& cfg);

}  // namespace zf
