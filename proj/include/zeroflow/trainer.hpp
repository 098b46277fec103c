#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "zeroflow/checkpoint.hpp"
#include "zeroflow/config.hpp"
#include "zeroflow/datagen.hpp"
#include "zeroflow/models.hpp"
#include "zeroflow/rng.hpp"
#include "zeroflow/tape.hpp"

namespace zf {

// ---------------------------------------------------------------------------
// Mask strategies

/// A single target coordinate.
struct OneHotMasks {};
/// `length` consecutive coordinates with a uniform start.
struct WindowMasks {
  std::size_t length = 5;
};
/// A uniform grid node plus each of its grid neighbours independently.
struct LatticeMasks {
  std::size_t side = 8;
  double include_prob = 0.5;
};
/// Independent Bernoulli(p) bits, redrawn until mixed.
struct BernoulliMasks {
  double p = 0.5;
};

using MaskStrategy = std::variant<OneHotMasks, WindowMasks, LatticeMasks, BernoulliMasks>;

std::string mask_kind(const MaskStrategy& strategy);
/// Throws ParameterError when the strategy cannot produce mixed masks over d.
void validate_strategy(const MaskStrategy& strategy, std::size_t d);
/// [count x d] binary masks; every row has at least one 1 and one 0.
Tensor sample_masks(const MaskStrategy& strategy, std::size_t count, std::size_t d, Rng& rng);

// ---------------------------------------------------------------------------
// Batches

/// Masked splits of two independently drawn rows z1, z2:
/// x = z1*m, y = z1*(1-m), xp = z2*m, yp = z2*(1-m), x_t = t xp + (1-t) x.
struct Batch {
  Tensor x, y, xp, yp;
  Tensor m;    // [B x d]
  Tensor t;    // [B]
  Tensor x_t;  // [B x d]

  std::size_t size() const { return m.rows(); }
};

/// Builds the splits from explicit rows, masks and times.
Batch assemble_batch(const Tensor& z1, const Tensor& z2, const Tensor& masks, const Tensor& t);

/// Draws z1 uniformly, pairs it with an independent uniform redraw (never
/// the same row), and samples t ~ Beta(alpha, alpha) per row.
Batch make_batch(const Dataset& data, const Tensor& masks, double t_alpha, Rng& rng);

/// Beta(alpha, alpha) as G1 / (G1 + G2), clamped to [1e-6, 1 - 1e-6].
double sample_beta(double alpha, Rng& rng);

/// exp(-|t - 0.5| / b).
double omega(double t, double b);

// ---------------------------------------------------------------------------
// Losses

struct LossBreakdown {
  double rf = 0.0;
  double zf = 0.0;
  double sparsity = 0.0;
  double total = 0.0;
};

struct LossVars {
  ad::Var rf, zf, sparsity, total;
};

/// mean_b ||(xp - x - vhat) * m||^2.
ad::Var rf_loss(ad::Var vhat, const Batch& batch);
double rf_loss(const Tensor& vhat, const Tensor& x, const Tensor& xp, const Tensor& m);

/// Velocity magnitude on matched pairs, conditioned on f(y) (not f(yp)).
/// Midpoint: mean ||v(x_mid, f(y), y, m, 0.5) * m||^2 with x_mid = (x + xp)/2.
/// Kernel: mean omega(t) ||v(x_t, f(y), y, m, t) * m||^2 at the batch's t.
ad::Var zf_penalty(const BoundModel& bound, ad::Var gates, const Batch& batch, ZfMode mode, double bandwidth);
double zf_penalty(const ZeroFlowModel& model, const Batch& batch, ZfMode mode, double bandwidth);

/// mean_b sum_j gates_bj.
ad::Var gate_sparsity(ad::Var gates);
double gate_sparsity(const Tensor& gates);

/// rf (conditioned on f(yp)) + zf_weight * zf + lambda * sparsity.
LossVars objective(const BoundModel& bound, const Batch& batch, const TrainConfig& cfg);
LossBreakdown evaluate_objective(const ZeroFlowModel& model, const Batch& batch, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Training

enum class EncoderKind { Amortized, Fixed };

struct LossRecord {
  std::size_t iter = 0;
  LossBreakdown loss;
};

struct TrainOptions {
  EncoderKind encoder = EncoderKind::Amortized;
  std::size_t log_every = 50;
  /// Called for each logged record (progress reporting).
  std::function<void(const LossRecord&)> on_log;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> history;
};

/// Fresh model for dimension d with the config's hidden sizes and seed.
ZeroFlowModel init_model(std::size_t d, const TrainConfig& cfg, EncoderKind encoder = EncoderKind::Amortized);

/// Joint Adam optimization of encoder and velocity field. Deterministic in
/// (data, strategy, cfg). Throws NumericError naming the iteration if the
/// loss stops being finite.
TrainResult train(const Dataset& data, const MaskStrategy& strategy, const TrainConfig& cfg,
                  const TrainOptions& options = {});

/// CSV `iter,rf,zf,sparsity,total`.
void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

}  // namespace zf
