#include "zeroflow/flowdiag.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "zeroflow/adam.hpp"
#include "zeroflow/errors.hpp"
#include "zeroflow/rng.hpp"
#include "zeroflow/tape.hpp"
#include "zeroflow/trainer.hpp"

namespace zf {

double analytic_velocity(const GaussianPair& pair, double t, double z) {
  // The endpoints are fine: var_t stays positive for positive sigmas.
  if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("analytic_velocity: t must lie in [0, 1]");
  if (!(pair.sigma0 > 0.0 && pair.sigma1 > 0.0)) throw ParameterError("analytic_velocity: sigmas must be positive");
  const double s0 = pair.sigma0 * pair.sigma0, s1 = pair.sigma1 * pair.sigma1;
  const double m_t = t * pair.mu1 + (1.0 - t) * pair.mu0;
  const double var_t = t * t * s1 + (1.0 - t) * (1.0 - t) * s0;
  if (!(var_t > 0.0)) throw NumericError("analytic_velocity: degenerate interpolant variance");
  return (pair.mu1 - pair.mu0) + (t * s1 - (1.0 - t) * s0) * (z - m_t) / var_t;
}

VelocityField analytic_field(const GaussianPair& pair) {
  return [pair](const Tensor& z, double t) {
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = analytic_velocity(pair, t, z[i]);
    return out;
  };
}

UncondVelocityNet UncondVelocityNet::create(std::size_t d, std::size_t hidden, std::uint64_t seed) {
  if (d == 0) throw ParameterError("UncondVelocityNet: d must be positive");
  const std::size_t dims[] = {d + 1, hidden, d};
  return {d, init_mlp(dims, seed)};
}

namespace {

Tensor with_time_column(const Tensor& z, double t) {
  const std::size_t k = z.rows(), d = z.cols();
  Tensor in({k, d + 1});
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < d; ++j) in(r, j) = z[r * d + j];
    in(r, d) = t;
  }
  return in;
}

/// Minimizes mean_b ||target - net(inputs)||^2 with Adam over freshly drawn
/// batches. `draw` fills (inputs, target) for one iteration.
template <class Draw>
void fit_regression(MlpParams& net, const TrainConfig& cfg, Rng& rng, Draw&& draw) {
  std::vector<Tensor*> params;
  collect_parameters(net, params);
  AdamState adam = AdamState::for_params(params, cfg.lr, cfg.weight_decay);
  std::vector<Tensor> grads;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto [inputs, target] = draw(rng);
    ad::Tape tape;
    ad::ParamSlot slot = 0;
    const MlpVars vars = bind_mlp(tape, net, slot);
    const ad::Var out = mlp_forward(net, vars, tape.constant(std::move(inputs)));
    const double inv_b = 1.0 / static_cast<double>(target.rows());
    const ad::Var loss = inv_b * ad::sum(ad::square(tape.constant(std::move(target)) - out));
    if (!std::isfinite(loss.value().item())) {
      throw NumericError("regression: loss became non-finite at iteration " + std::to_string(it));
    }
    ad::Gradients g = tape.backward(loss);
    grads.clear();
    for (std::size_t i = 0; i < params.size(); ++i) grads.push_back(std::move(g.at(i)));
    adam_step(params, grads, adam);
  }
}

std::size_t partner(std::size_t i, std::size_t lo, std::size_t n, Rng& rng) {
  std::size_t j;
  do {
    j = lo + rng.below(n);
  } while (j == i);
  return j;
}

}  // namespace

Tensor UncondVelocityNet::operator()(const Tensor& z, double t) const {
  const Tensor zz = z.rank() == 1 ? z.reshaped({1, z.size()}) : z;
  if (zz.cols() != d) throw ShapeError("UncondVelocityNet: expected " + std::to_string(d) + " columns");
  Tensor out = mlp_apply(net, with_time_column(zz, t));
  return z.rank() == 1 ? out.reshaped(z.shape()) : out;
}

VelocityField as_field(const UncondVelocityNet& net) {
  return [net](const Tensor& z, double t) { return net(z, t); };
}

UncondVelocityNet train_unconditional(const Dataset& p, const Dataset& q, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t d = p.d();
  if (q.d() != d) throw ShapeError("train_unconditional: source and target dimensions differ");
  if (p.n() == 0 || q.n() == 0) throw DataError("train_unconditional: empty sample set");
  UncondVelocityNet net = UncondVelocityNet::create(d, cfg.velocity_hidden, derive_seed(cfg.seed, 3));
  Rng rng(derive_seed(cfg.seed, 1));
  const std::size_t b = cfg.batch_size;
  fit_regression(net.net, cfg, rng, [&](Rng& r) {
    Tensor in({b, d + 1}), target({b, d});
    for (std::size_t row = 0; row < b; ++row) {
      const std::size_t i = r.below(p.n()), j = r.below(q.n());
      const double t = sample_beta(cfg.beta_alpha, r);
      for (std::size_t c = 0; c < d; ++c) {
        const double x0 = p.samples(i, c), x1 = q.samples(j, c);
        in(row, c) = t * x1 + (1.0 - t) * x0;
        target(row, c) = x1 - x0;
      }
      in(row, d) = t;
    }
    return std::pair{std::move(in), std::move(target)};
  });
  return net;
}

Tensor z_grid() {
  Tensor g({81, 1});
  for (std::size_t i = 0; i < 81; ++i) g[i] = (4.0 * static_cast<double>(i) - 160.0) / 80.0;
  return g;
}

std::vector<double> t_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 9; ++i) out.push_back(i / 10.0);
  return out;
}

namespace {

double row_norm(const Tensor& v, std::size_t r) {
  const std::size_t d = v.cols();
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += v[r * d + j] * v[r * d + j];
  return std::sqrt(s);
}

Tensor as_rows(const Tensor& points) { return points.rank() == 1 ? points.reshaped({points.size(), 1}) : points; }

}  // namespace

double midpoint_norm(const VelocityField& field, const Tensor& points) {
  const Tensor pts = as_rows(points);
  const Tensor v = field(pts, 0.5);
  double total = 0.0;
  for (std::size_t r = 0; r < pts.rows(); ++r) total += row_norm(v, r);
  return pts.rows() ? total / static_cast<double>(pts.rows()) : 0.0;
}

double antisymmetry_residual(const VelocityField& field, const Tensor& points, std::span<const double> times) {
  const Tensor pts = as_rows(points);
  double total = 0.0;
  std::size_t count = 0;
  for (double t : times) {
    if (!(t > 0.0 && t < 1.0)) throw ParameterError("antisymmetry_residual: times must lie in (0, 1)");
    const Tensor s = add(field(pts, t), field(pts, 1.0 - t));
    for (std::size_t r = 0; r < pts.rows(); ++r) total += row_norm(s, r);
    count += pts.rows();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double field_mae(const VelocityField& a, const VelocityField& b, const Tensor& points, std::span<const double> times) {
  const Tensor pts = as_rows(points);
  double total = 0.0;
  std::size_t count = 0;
  for (double t : times) {
    const Tensor diff = sub(a(pts, t), b(pts, t));
    for (double v : diff.data()) total += std::abs(v);
    count += diff.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

Tensor euler_integrate(const VelocityField& field, const Tensor& x0, std::size_t steps) {
  if (steps == 0) throw ParameterError("euler_integrate: steps must be >= 1");
  const double h = 1.0 / static_cast<double>(steps);
  Tensor x = x0;
  for (std::size_t s = 0; s < steps; ++s) {
    const Tensor v = field(x, static_cast<double>(s) * h);
    if (v.shape() != x.shape()) throw ShapeError("euler_integrate: field changed the state shape");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h * v[i];
    if (!x.all_finite()) throw NumericError("euler_integrate: non-finite state at step " + std::to_string(s));
  }
  return x;
}

TransportError moment_error(const Tensor& samples, double mean, double var) {
  const Tensor s = as_rows(samples);
  const std::size_t n = s.rows(), d = s.cols();
  if (n < 2) throw DataError("moment_error: need at least 2 samples");
  TransportError err;
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += s(r, j);
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (s(r, j) - mu) * (s(r, j) - mu);
    err.mean_err += std::abs(mu - mean);
    err.var_err += std::abs(ss / static_cast<double>(n - 1) - var);
  }
  err.mean_err /= static_cast<double>(d);
  err.var_err /= static_cast<double>(d);
  return err;
}

DiagnosticsReport diagnose(const VelocityField& field, const Tensor& points, std::span<const double> times,
                           const Tensor& x0, double target_mean, double target_var, std::size_t steps) {
  DiagnosticsReport rep;
  rep.midpoint_norm = midpoint_norm(field, points);
  rep.antisymmetry_residual = antisymmetry_residual(field, points, times);
  rep.transport_error = moment_error(euler_integrate(field, x0, steps), target_mean, target_var);
  rep.notes = {{"points", points.rows()}, {"times", std::vector<double>(times.begin(), times.end())},
               {"euler_steps", steps}, {"transported", x0.rows()}};
  return rep;
}

nlohmann::json to_json(const DiagnosticsReport& report) {
  return {{"midpoint_norm", report.midpoint_norm},
          {"antisymmetry_residual", report.antisymmetry_residual},
          {"transport_error", {{"mean_err", report.transport_error.mean_err},
                               {"var_err", report.transport_error.var_err}}},
          {"notes", report.notes}};
}

// ---------------------------------------------------------------------------

Tensor SufficiencyNet::operator()(const Tensor& x_t, const Tensor& fy, const Tensor& y, double t) const {
  const std::size_t k = x_t.size();
  if (fy.size() != k || y.size() != k) throw ShapeError("SufficiencyNet: inputs must have matching lengths");
  Tensor in({k, 4});
  for (std::size_t r = 0; r < k; ++r) {
    in(r, 0) = x_t[r];
    in(r, 1) = fy[r];
    in(r, 2) = y[r];
    in(r, 3) = t;
  }
  return mlp_apply(net, in).reshaped({k});
}

SufficiencyResult train_sufficiency(const Dataset& demo, const ScalarMap& f, const TrainConfig& cfg) {
  cfg.validate();
  if (demo.d() != 2) throw ShapeError("sufficiency: demo data must have columns (X, Y)");
  const std::size_t n = demo.n();
  const std::size_t n_train = n * 3 / 4;
  if (n_train < 2 || n - n_train < 2) throw DataError("sufficiency: need at least 8 rows");

  std::vector<double> fy(n);
  for (std::size_t i = 0; i < n; ++i) {
    fy[i] = f(demo.samples(i, 1));
    if (!std::isfinite(fy[i])) throw NumericError("sufficiency: f(y) is not finite at row " + std::to_string(i));
  }

  SufficiencyResult res;
  const std::size_t dims[] = {4, cfg.velocity_hidden, 1};
  res.net.net = init_mlp(dims, derive_seed(cfg.seed, 3));
  res.net.f = f;
  Rng rng(derive_seed(cfg.seed, 1));
  const std::size_t b = cfg.batch_size;
  fit_regression(res.net.net, cfg, rng, [&](Rng& r) {
    Tensor in({b, 4}), target({b, 1});
    for (std::size_t row = 0; row < b; ++row) {
      const std::size_t i = r.below(n_train);
      const std::size_t j = partner(i, 0, n_train, r);
      const double t = sample_beta(cfg.beta_alpha, r);
      const double x = demo.samples(i, 0), xp = demo.samples(j, 0);
      in(row, 0) = t * xp + (1.0 - t) * x;
      in(row, 1) = fy[j];  // the copy's statistic: learns the flow towards p(X | f(Y) = f(y'))
      in(row, 2) = demo.samples(i, 1);
      in(row, 3) = t;
      target[row] = xp - x;
    }
    return std::pair{std::move(in), std::move(target)};
  });

  // Held-out score: the statistic of the row itself, i.e. matched pairs.
  Rng eval_rng(derive_seed(cfg.seed, 4));
  const std::size_t k = n - n_train;
  Tensor x_mid({k}), f_own({k}), y({k});
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = n_train + r;
    const std::size_t j = partner(i, n_train, k, eval_rng);
    x_mid[r] = 0.5 * (demo.samples(i, 0) + demo.samples(j, 0));
    f_own[r] = fy[i];
    y[r] = demo.samples(i, 1);
  }
  const Tensor v = res.net(x_mid, f_own, y, 0.5);
  double total = 0.0;
  for (double vi : v.data()) total += std::abs(vi);
  res.score = total / static_cast<double>(k);
  return res;
}

double sufficiency_score(const Dataset& demo, const ScalarMap& f, const TrainConfig& cfg) {
  return train_sufficiency(demo, f, cfg).score;
}

}  // namespace zf
