#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "zeroflow/tensor.hpp"

namespace zf {

/// k-th order chain: Theta_ij = weights[|i-j|-1] for 0 < |i-j| <= k.
struct ChainSpec {
  std::size_t d = 50;
  std::vector<double> weights{0.8, 0.4, 0.2};
  double margin = 1.0;
};

/// side x side grid, four-neighbour coupling with a constant weight.
struct LatticeSpec {
  std::size_t side = 8;
  double weight = 0.3;
  double margin = 1.0;
};

using GraphSpec = std::variant<ChainSpec, LatticeSpec>;

/// Symmetric, strictly diagonally dominant precision matrix.
struct PrecisionMatrix {
  Tensor theta;
  std::size_t d() const { return theta.rows(); }
};

/// Off-diagonals as specified; Theta_ii = sum_{j != i} |Theta_ij| + margin.
PrecisionMatrix build_chain_precision(const ChainSpec& spec);
PrecisionMatrix build_lattice_precision(const LatticeSpec& spec);
PrecisionMatrix build_precision(const GraphSpec& spec);

/// Grid neighbours of `node` (row-major numbering) in ascending order.
std::vector<std::size_t> lattice_neighbors(std::size_t side, std::size_t node);

struct GaussianMarginals {};
struct NonparanormalMarginals {
  double gamma = 3.0;
};
struct TruncatedMarginals {
  double tau = -0.75;
  std::size_t burnin = 200;
  std::size_t thin = 5;
};
using MarginalTransform = std::variant<GaussianMarginals, NonparanormalMarginals, TruncatedMarginals>;

/// Use as `tau` to disable truncation.
inline constexpr double kNoTruncation = -std::numeric_limits<double>::infinity();

struct Dataset {
  Tensor samples;  // [n x d]
  nlohmann::json meta = nlohmann::json::object();

  std::size_t n() const { return samples.rows(); }
  std::size_t d() const { return samples.cols(); }
};

/// Z ~ N(0, Theta^-1) via Cholesky of Sigma. Throws NumericError if Theta
/// is not positive definite.
Dataset sample_gaussian(const PrecisionMatrix& theta, std::size_t n, std::uint64_t seed);

/// Z = sign(Z~)|Z~|^gamma, then each column standardized to mean 0 and
/// (population) variance 1.
Dataset nonparanormal_transform(const Dataset& data, double gamma);

/// Gibbs sampler for N(0, Theta^-1) restricted to {z_i > tau for all i}.
/// Each sweep updates coordinates in order from their 1-D truncated normal
/// full conditionals (inverse CDF); `burnin` sweeps are discarded and every
/// `thin`-th sweep is kept afterwards.
Dataset sample_truncated(const PrecisionMatrix& theta, double tau, std::size_t n, std::size_t burnin,
                         std::size_t thin, std::uint64_t seed);

/// Latent Gaussian draw followed by the marginal transform; meta records
/// the recipe.
Dataset generate(const GraphSpec& graph, const MarginalTransform& transform, std::size_t n,
                 std::uint64_t seed);

/// Columns (X, Y): Y ~ N(0,1), X = 0.5 Y + noise_scale * N(0,1).
Dataset conditional_demo_data(std::size_t n, std::uint64_t seed, double noise_scale = 1.0);

/// Equal-weight mixture of four isotropic Gaussians (std 0.3) at (+-1.5, +-1.5).
Dataset mixture2d(std::size_t n, std::uint64_t seed);

/// Independent N(mean, stddev^2) coordinates, shape [n x d].
Dataset gaussian_samples(std::size_t n, std::size_t d, double mean, double stddev, std::uint64_t seed);

/// One standard-normal draw restricted to (lower, inf), by inverse CDF.
class Rng;
double sample_normal_above(double lower, Rng& rng);

}  // namespace zf
