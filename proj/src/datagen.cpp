#include "zeroflow/datagen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <string>

#include "zeroflow/errors.hpp"
#include "zeroflow/rng.hpp"

namespace zf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMat to_eigen(const Tensor& t) {
  return Eigen::Map<const RowMat>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                                  static_cast<Eigen::Index>(t.cols()));
}

void fill_diagonal(Tensor& theta, double margin) {
  const std::size_t d = theta.rows();
  for (std::size_t i = 0; i < d; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (j != i) off += std::abs(theta(i, j));
    }
    theta(i, i) = off + margin;
  }
}

void require_margin(double margin) {
  if (!(margin > 0.0)) throw ParameterError("precision: margin must be positive");
}

Eigen::LLT<RowMat> factor(const PrecisionMatrix& theta, const char* who) {
  if (theta.theta.rank() != 2 || theta.theta.rows() != theta.theta.cols()) {
    throw ShapeError(std::string(who) + ": precision matrix must be square");
  }
  Eigen::LLT<RowMat> llt(to_eigen(theta.theta));
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(who) + ": precision matrix is not positive definite");
  }
  return llt;
}

/// Standard-normal upper tail P(Z > a).
double upper_tail(double a) { return 0.5 * std::erfc(a / std::sqrt(2.0)); }

}  // namespace

PrecisionMatrix build_chain_precision(const ChainSpec& spec) {
  require_margin(spec.margin);
  const std::size_t k = spec.weights.size();
  if (!(spec.d > k)) throw ParameterError("chain precision: need d > k");
  for (double w : spec.weights) {
    if (!std::isfinite(w)) throw ParameterError("chain precision: weights must be finite");
  }
  Tensor theta({spec.d, spec.d});
  for (std::size_t i = 0; i < spec.d; ++i) {
    for (std::size_t lag = 1; lag <= k && i + lag < spec.d; ++lag) {
      theta(i, i + lag) = spec.weights[lag - 1];
      theta(i + lag, i) = spec.weights[lag - 1];
    }
  }
  fill_diagonal(theta, spec.margin);
  return {std::move(theta)};
}

std::vector<std::size_t> lattice_neighbors(std::size_t side, std::size_t node) {
  const std::size_t r = node / side, c = node % side;
  std::vector<std::size_t> out;
  if (r > 0) out.push_back(node - side);
  if (c > 0) out.push_back(node - 1);
  if (c + 1 < side) out.push_back(node + 1);
  if (r + 1 < side) out.push_back(node + side);
  return out;
}

PrecisionMatrix build_lattice_precision(const LatticeSpec& spec) {
  require_margin(spec.margin);
  if (spec.side < 2) throw ParameterError("lattice precision: side must be at least 2");
  if (!std::isfinite(spec.weight)) throw ParameterError("lattice precision: weight must be finite");
  const std::size_t d = spec.side * spec.side;
  Tensor theta({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j : lattice_neighbors(spec.side, i)) theta(i, j) = spec.weight;
  }
  fill_diagonal(theta, spec.margin);
  return {std::move(theta)};
}

PrecisionMatrix build_precision(const GraphSpec& spec) {
  if (const auto* c = std::get_if<ChainSpec>(&spec)) return build_chain_precision(*c);
  return build_lattice_precision(std::get<LatticeSpec>(spec));
}

Dataset sample_gaussian(const PrecisionMatrix& theta, std::size_t n, std::uint64_t seed) {
  const std::size_t d = theta.d();
  const Eigen::LLT<RowMat> llt = factor(theta, "sample_gaussian");
  const RowMat sigma = llt.solve(RowMat::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
  const Eigen::LLT<RowMat> sigma_llt(sigma);
  if (sigma_llt.info() != Eigen::Success) throw NumericError("sample_gaussian: covariance factorization failed");
  const RowMat lower = sigma_llt.matrixL();

  Rng rng(seed);
  Tensor samples({n, d});
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) z(static_cast<Eigen::Index>(j)) = rng.normal();
    const Eigen::VectorXd x = lower * z;
    for (std::size_t j = 0; j < d; ++j) samples(r, j) = x(static_cast<Eigen::Index>(j));
  }
  Dataset out{std::move(samples)};
  out.meta = {{"transform", "gaussian"}, {"seed", seed}};
  return out;
}

Dataset nonparanormal_transform(const Dataset& data, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("nonparanormal: gamma must be positive");
  Dataset out = data;
  Tensor& s = out.samples;
  for (double& v : s.data()) v = std::copysign(std::pow(std::abs(v), gamma), v);

  const std::size_t n = s.rows(), d = s.cols();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += s(r, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (s(r, j) - mean) * (s(r, j) - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) throw DataError("nonparanormal: column " + std::to_string(j) + " has zero variance");
    const double sd = std::sqrt(var);
    for (std::size_t r = 0; r < n; ++r) s(r, j) = (s(r, j) - mean) / sd;
  }
  out.meta["transform"] = "nonparanormal";
  out.meta["gamma"] = gamma;
  return out;
}

double sample_normal_above(double lower, Rng& rng) {
  if (lower == -std::numeric_limits<double>::infinity()) return rng.normal();
  const double tail = upper_tail(lower);
  if (tail > 0.0) {
    const double p = rng.uniform_open() * tail;
    const double z = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
    return z > lower ? z : std::nextafter(lower, std::numeric_limits<double>::infinity());
  }
  // Tail mass underflows: exponential proposal rejection (Robert, 1995).
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(rng.uniform_open()) / rate;
    if (std::log(rng.uniform_open()) <= -0.5 * (z - rate) * (z - rate)) return z;
  }
}

Dataset sample_truncated(const PrecisionMatrix& theta, double tau, std::size_t n, std::size_t burnin,
                         std::size_t thin, std::uint64_t seed) {
  if (thin == 0) throw ParameterError("sample_truncated: thin must be at least 1");
  if (std::isnan(tau) || tau == std::numeric_limits<double>::infinity()) {
    throw ParameterError("sample_truncated: tau must be finite or -infinity");
  }
  factor(theta, "sample_truncated");
  const std::size_t d = theta.d();
  const Tensor& th = theta.theta;

  std::vector<double> sd(d);
  for (std::size_t i = 0; i < d; ++i) sd[i] = 1.0 / std::sqrt(th(i, i));

  const bool truncated = std::isfinite(tau);
  std::vector<double> z(d, truncated ? std::max(0.0, tau + 0.5) : 0.0);
  Rng rng(seed);
  auto sweep = [&] {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (j != i) acc += th(i, j) * z[j];
      }
      const double mean = -acc / th(i, i);
      const double lower = truncated ? (tau - mean) / sd[i] : kNoTruncation;
      double v = mean + sd[i] * sample_normal_above(lower, rng);
      if (truncated && !(v > tau)) v = std::nextafter(tau, std::numeric_limits<double>::infinity());
      z[i] = v;
    }
  };

  for (std::size_t s = 0; s < burnin; ++s) sweep();
  Tensor samples({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t s = 0; s < thin; ++s) sweep();
    for (std::size_t j = 0; j < d; ++j) samples(r, j) = z[j];
  }
  Dataset out{std::move(samples)};
  out.meta = {{"transform", "truncated"}, {"seed", seed}, {"burnin", burnin}, {"thin", thin}};
  out.meta["tau"] = truncated ? nlohmann::json(tau) : nlohmann::json("-inf");
  return out;
}

Dataset generate(const GraphSpec& graph, const MarginalTransform& transform, std::size_t n,
                 std::uint64_t seed) {
  if (n == 0) throw ParameterError("generate: n must be at least 1");
  const PrecisionMatrix theta = build_precision(graph);
  Dataset out;
  if (const auto* t = std::get_if<TruncatedMarginals>(&transform)) {
    out = sample_truncated(theta, t->tau, n, t->burnin, t->thin, seed);
  } else {
    out = sample_gaussian(theta, n, seed);
    if (const auto* np = std::get_if<NonparanormalMarginals>(&transform)) {
      out = nonparanormal_transform(out, np->gamma);
    }
  }
  if (const auto* c = std::get_if<ChainSpec>(&graph)) {
    out.meta["graph"] = {{"kind", "chain"}, {"d", c->d}, {"weights", c->weights}, {"margin", c->margin}};
  } else {
    const auto& l = std::get<LatticeSpec>(graph);
    out.meta["graph"] = {{"kind", "lattice"}, {"side", l.side}, {"weight", l.weight}, {"margin", l.margin}};
  }
  out.meta["seed"] = seed;
  out.meta["n"] = n;
  return out;
}

Dataset conditional_demo_data(std::size_t n, std::uint64_t seed, double noise_scale) {
  if (n == 0) throw ParameterError("conditional_demo_data: n must be at least 1");
  Rng rng(seed);
  Tensor s({n, 2});
  for (std::size_t r = 0; r < n; ++r) {
    const double y = rng.normal();
    const double noise = rng.normal();
    s(r, 0) = 0.5 * y + noise_scale * noise;
    s(r, 1) = y;
  }
  Dataset out{std::move(s)};
  out.meta = {{"kind", "conditional_demo"}, {"columns", {"x", "y"}}, {"slope", 0.5},
              {"noise_scale", noise_scale}, {"seed", seed}};
  return out;
}

Dataset mixture2d(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParameterError("mixture2d: n must be at least 1");
  constexpr double kCenter = 1.5;
  constexpr double kStd = 0.3;
  Rng rng(seed);
  Tensor s({n, 2});
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint64_t c = rng.below(4);
    const double cx = (c & 1U) ? kCenter : -kCenter;
    const double cy = (c & 2U) ? kCenter : -kCenter;
    s(r, 0) = cx + kStd * rng.normal();
    s(r, 1) = cy + kStd * rng.normal();
  }
  Dataset out{std::move(s)};
  out.meta = {{"kind", "mixture2d"}, {"components", 4}, {"center", kCenter}, {"std", kStd}, {"seed", seed}};
  return out;
}

Dataset gaussian_samples(std::size_t n, std::size_t d, double mean, double stddev, std::uint64_t seed) {
  if (n == 0 || d == 0) throw ParameterError("gaussian_samples: n and d must be positive");
  if (!(stddev > 0.0)) throw ParameterError("gaussian_samples: stddev must be positive");
  Rng rng(seed);
  Tensor s({n, d});
  for (double& v : s.data()) v = mean + stddev * rng.normal();
  Dataset out{std::move(s)};
  out.meta = {{"kind", "gaussian"}, {"mean", mean}, {"std", stddev}, {"seed", seed}};
  return out;
}

}  // namespace zf
