#include "zeroflow/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "zeroflow/adam.hpp"
#include "zeroflow/dataset_io.hpp"
#include "zeroflow/errors.hpp"

namespace zf {

std::string mask_kind(const MaskStrategy& strategy) {
  struct Visitor {
    std::string operator()(const OneHotMasks&) const { return "one_hot"; }
    std::string operator()(const WindowMasks&) const { return "window"; }
    std::string operator()(const LatticeMasks&) const { return "lattice_neighbors"; }
    std::string operator()(const BernoulliMasks&) const { return "bernoulli"; }
  };
  return std::visit(Visitor{}, strategy);
}

void validate_strategy(const MaskStrategy& strategy, std::size_t d) {
  if (d < 2) throw ParameterError("masks: need d >= 2 for a non-trivial partition");
  if (const auto* w = std::get_if<WindowMasks>(&strategy)) {
    if (w->length == 0 || w->length >= d) {
      throw ParameterError("masks: window length " + std::to_string(w->length) + " must be in [1, d) for d=" +
                           std::to_string(d));
    }
  } else if (const auto* l = std::get_if<LatticeMasks>(&strategy)) {
    if (l->side < 2 || l->side * l->side != d) {
      throw ParameterError("masks: lattice side " + std::to_string(l->side) + " does not match d=" +
                           std::to_string(d));
    }
    if (!(l->include_prob >= 0.0 && l->include_prob <= 1.0)) {
      throw ParameterError("masks: lattice include probability must be in [0, 1]");
    }
  } else if (const auto* b = std::get_if<BernoulliMasks>(&strategy)) {
    if (!(b->p > 0.0 && b->p < 1.0)) throw ParameterError("masks: bernoulli p must be in (0, 1)");
  }
}

Tensor sample_masks(const MaskStrategy& strategy, std::size_t count, std::size_t d, Rng& rng) {
  validate_strategy(strategy, d);
  Tensor masks({count, d});
  for (std::size_t r = 0; r < count; ++r) {
    double* row = masks.data().data() + r * d;
    if (std::holds_alternative<OneHotMasks>(strategy)) {
      row[rng.below(d)] = 1.0;
    } else if (const auto* w = std::get_if<WindowMasks>(&strategy)) {
      const std::size_t start = rng.below(d - w->length + 1);
      std::fill_n(row + start, w->length, 1.0);
    } else if (const auto* l = std::get_if<LatticeMasks>(&strategy)) {
      const std::size_t node = rng.below(d);
      row[node] = 1.0;
      for (std::size_t nb : lattice_neighbors(l->side, node)) {
        if (rng.bernoulli(l->include_prob)) row[nb] = 1.0;
      }
    } else {
      const double p = std::get<BernoulliMasks>(strategy).p;
      for (;;) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < d; ++j) {
          row[j] = rng.bernoulli(p) ? 1.0 : 0.0;
          ones += row[j] > 0.0;
        }
        if (ones > 0 && ones < d) break;
      }
    }
  }
  return masks;
}

Batch assemble_batch(const Tensor& z1, const Tensor& z2, const Tensor& masks, const Tensor& t) {
  if (z1.shape() != masks.shape() || z2.shape() != masks.shape() || masks.rank() != 2) {
    throw ShapeError("batch: rows and masks must share a [B x d] shape");
  }
  const std::size_t b = masks.rows(), d = masks.cols();
  if (t.size() != b) throw ShapeError("batch: need one t per row");
  Batch out;
  out.x = Tensor({b, d});
  out.y = Tensor({b, d});
  out.xp = Tensor({b, d});
  out.yp = Tensor({b, d});
  out.x_t = Tensor({b, d});
  out.m = masks;
  out.t = t.reshaped({b});
  for (std::size_t r = 0; r < b; ++r) {
    const double tr = out.t[r];
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k = r * d + j;
      const double m = masks[k];
      out.x[k] = z1[k] * m;
      out.y[k] = z1[k] * (1.0 - m);
      out.xp[k] = z2[k] * m;
      out.yp[k] = z2[k] * (1.0 - m);
      out.x_t[k] = tr * out.xp[k] + (1.0 - tr) * out.x[k];
    }
  }
  return out;
}

Batch make_batch(const Dataset& data, const Tensor& masks, double t_alpha, Rng& rng) {
  const std::size_t n = data.n(), d = data.d();
  if (n < 2) throw DataError("make_batch: need at least 2 rows for independent pairing");
  if (masks.rank() != 2 || masks.cols() != d) {
    throw ShapeError("make_batch: masks " + shape_str(masks.shape()) + " do not match d=" + std::to_string(d));
  }
  const std::size_t b = masks.rows();
  Tensor z1({b, d}), z2({b, d}), t({b});
  for (std::size_t r = 0; r < b; ++r) {
    const std::size_t i = rng.below(n);
    std::size_t j;
    do {
      j = rng.below(n);
    } while (j == i);
    std::copy_n(data.samples.data().begin() + static_cast<std::ptrdiff_t>(i * d), d,
                z1.data().begin() + static_cast<std::ptrdiff_t>(r * d));
    std::copy_n(data.samples.data().begin() + static_cast<std::ptrdiff_t>(j * d), d,
                z2.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  for (std::size_t r = 0; r < b; ++r) t[r] = sample_beta(t_alpha, rng);
  return assemble_batch(z1, z2, masks, t);
}

double sample_beta(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ParameterError("sample_beta: alpha must be positive");
  const double g1 = rng.gamma(alpha);
  const double g2 = rng.gamma(alpha);
  return std::clamp(g1 / (g1 + g2), 1e-6, 1.0 - 1e-6);
}

double omega(double t, double b) {
  if (!(b > 0.0)) throw ParameterError("omega: bandwidth must be positive");
  return std::exp(-std::abs(t - 0.5) / b);
}

// ---------------------------------------------------------------------------

namespace {

ad::Var masked_sq_mean(ad::Var v, ad::Var m, std::size_t rows) {
  return (1.0 / static_cast<double>(rows)) * ad::sum(ad::square(v * m));
}

}  // namespace

ad::Var rf_loss(ad::Var vhat, const Batch& batch) {
  ad::Tape& tape = *vhat.tape;
  const ad::Var target = tape.constant(sub(batch.xp, batch.x));
  return masked_sq_mean(target - vhat, tape.constant(batch.m), batch.size());
}

double rf_loss(const Tensor& vhat, const Tensor& x, const Tensor& xp, const Tensor& m) {
  ad::Tape tape;
  const ad::Var v = tape.constant(vhat);
  const ad::Var diff = tape.constant(sub(xp, x)) - v;
  return masked_sq_mean(diff, tape.constant(m), m.rows()).value().item();
}

ad::Var zf_penalty(const BoundModel& bound, ad::Var gates, const Batch& batch, ZfMode mode, double bandwidth) {
  ad::Tape& tape = *gates.tape;
  const std::size_t b = batch.size(), d = batch.m.cols();
  const ad::Var m = tape.constant(batch.m);
  const ad::Var y = tape.constant(batch.y);
  const ad::Var f_y = y * gates;
  if (mode == ZfMode::Midpoint) {
    const ad::Var x_mid = tape.constant(scale(add(batch.x, batch.xp), 0.5));
    const ad::Var t_col = tape.constant(Tensor({b, 1}, 0.5));
    return masked_sq_mean(velocity_forward(bound, x_mid, f_y, y, m, t_col), m, b);
  }
  Tensor weights({b, d});
  for (std::size_t r = 0; r < b; ++r) {
    const double w = omega(batch.t[r], bandwidth);
    std::fill_n(weights.data().begin() + static_cast<std::ptrdiff_t>(r * d), d, w);
  }
  const ad::Var v = velocity_forward(bound, tape.constant(batch.x_t), f_y, y, m,
                                     tape.constant(batch.t.reshaped({b, 1})));
  return (1.0 / static_cast<double>(b)) * ad::sum(ad::square(v * m) * tape.constant(std::move(weights)));
}

double zf_penalty(const ZeroFlowModel& model, const Batch& batch, ZfMode mode, double bandwidth) {
  ad::Tape tape;
  const BoundModel bound = bind_model(tape, model, false);
  const ad::Var gates = encoder_gates(bound, tape.constant(batch.m));
  return zf_penalty(bound, gates, batch, mode, bandwidth).value().item();
}

ad::Var gate_sparsity(ad::Var gates) {
  return (1.0 / static_cast<double>(gates.value().rows())) * ad::sum(gates);
}

double gate_sparsity(const Tensor& gates) { return sum(gates) / static_cast<double>(gates.rows()); }

LossVars objective(const BoundModel& bound, const Batch& batch, const TrainConfig& cfg) {
  ad::Tape& tape = *bound.velocity.weights.front().tape;
  const std::size_t b = batch.size();
  const ad::Var m = tape.constant(batch.m);
  const ad::Var gates = encoder_gates(bound, m);

  // Rectified-flow regression conditions on the independent copy's encoding.
  const ad::Var f_yp = tape.constant(batch.yp) * gates;
  const ad::Var vhat = velocity_forward(bound, tape.constant(batch.x_t), f_yp, tape.constant(batch.y), m,
                                        tape.constant(batch.t.reshaped({b, 1})));
  LossVars out;
  out.rf = rf_loss(vhat, batch);
  out.zf = zf_penalty(bound, gates, batch, cfg.zf_mode, cfg.omega_bandwidth);
  out.sparsity = gate_sparsity(gates);
  out.total = out.rf + cfg.zf_weight * out.zf + cfg.lambda_sparsity * out.sparsity;
  return out;
}

LossBreakdown evaluate_objective(const ZeroFlowModel& model, const Batch& batch, const TrainConfig& cfg) {
  ad::Tape tape;
  const BoundModel bound = bind_model(tape, model, false);
  const LossVars v = objective(bound, batch, cfg);
  return {v.rf.value().item(), v.zf.value().item(), v.sparsity.value().item(), v.total.value().item()};
}

// ---------------------------------------------------------------------------

ZeroFlowModel init_model(std::size_t d, const TrainConfig& cfg, EncoderKind encoder) {
  ZeroFlowModel model;
  if (encoder == EncoderKind::Amortized) {
    model.encoder = AmortizedGateEncoder::create(d, cfg.encoder_hidden, derive_seed(cfg.seed, 2));
  } else {
    model.encoder = FixedGateEncoder{Tensor({d})};
  }
  model.velocity = VelocityNet::create(d, cfg.velocity_hidden, derive_seed(cfg.seed, 3));
  return model;
}

TrainResult train(const Dataset& data, const MaskStrategy& strategy, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  const std::size_t d = data.d();
  validate_strategy(strategy, d);
  if (data.n() < 2) throw DataError("train: need at least 2 samples");
  if (!data.samples.all_finite()) throw DataError("train: dataset contains non-finite values");

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.d = d;
  ckpt.seed = cfg.seed;
  ckpt.train_config = cfg;
  ckpt.model = init_model(d, cfg, options.encoder);
  ckpt.meta.mask_kind = mask_kind(strategy);
  ckpt.meta.trained_on = data.meta.is_object() ? data.meta.dump() : std::string();

  ZeroFlowModel& model = ckpt.model;
  const std::vector<Tensor*> params = model.parameters();
  AdamState adam = AdamState::for_params(params, cfg.lr, cfg.weight_decay);
  Rng rng(derive_seed(cfg.seed, 1));
  std::vector<Tensor> grads;
  grads.reserve(params.size());

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Tensor masks = sample_masks(strategy, cfg.batch_size, d, rng);
    const Batch batch = make_batch(data, masks, cfg.beta_alpha, rng);

    ad::Tape tape;
    const BoundModel bound = bind_model(tape, model, true);
    const LossVars loss = objective(bound, batch, cfg);
    const double total = loss.total.value().item();
    if (!std::isfinite(total)) {
      throw NumericError("train: loss became non-finite at iteration " + std::to_string(it));
    }

    const bool log_now = options.log_every > 0 && (it % options.log_every == 0 || it + 1 == cfg.iterations);
    if (log_now) {
      LossRecord rec{it, {loss.rf.value().item(), loss.zf.value().item(), loss.sparsity.value().item(), total}};
      result.history.push_back(rec);
      if (options.on_log) options.on_log(rec);
    }

    ad::Gradients g = tape.backward(loss.total);
    grads.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto found = g.find(i);
      grads.push_back(found != g.end() ? std::move(found->second) : Tensor(params[i]->shape()));
    }
    try {
      adam_step(params, grads, adam);
    } catch (const NumericError& e) {
      throw NumericError("train: iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  return result;
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::string text = "iter,rf,zf,sparsity,total\n";
  for (const LossRecord& r : history) {
    text += std::to_string(r.iter) + ',' + format_double(r.loss.rf) + ',' + format_double(r.loss.zf) + ',' +
            format_double(r.loss.sparsity) + ',' + format_double(r.loss.total) + '\n';
  }
  write_text_file(path, text);
}

}  // namespace zf
