#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "zeroflow/tape.hpp"
#include "zeroflow/tensor.hpp"

namespace zf {

enum class OutputActivation { None, Sigmoid };

/// Fully connected ReLU network: dims = {in, hidden..., out}.
struct MlpParams {
  std::vector<std::size_t> dims;
  std::vector<Tensor> weights;  // weights[i] is dims[i] x dims[i+1]
  std::vector<Tensor> biases;   // biases[i] has dims[i+1] entries
  OutputActivation output = OutputActivation::None;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed,
                   OutputActivation output = OutputActivation::None);

/// Forward pass without a tape. `x` is [n x in] or [in].
Tensor mlp_apply(const MlpParams& mlp, const Tensor& x);

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

/// Registers the parameters on `tape` under consecutive slots starting at
/// `next_slot` (advanced past them).
MlpVars bind_mlp(ad::Tape& tape, const MlpParams& mlp, ad::ParamSlot& next_slot);
/// Same layout as bind_mlp but untracked.
MlpVars const_mlp(ad::Tape& tape, const MlpParams& mlp);
ad::Var mlp_forward(const MlpParams& mlp, const MlpVars& vars, ad::Var x);

void collect_parameters(MlpParams& mlp, std::vector<Tensor*>& out);

inline constexpr std::size_t kEncoderHidden = 128;
inline constexpr std::size_t kVelocityHidden = 256;

/// Gate network sigma_beta(m): d -> hidden -> d with sigmoid output.
struct AmortizedGateEncoder {
  MlpParams gate_net;

  static AmortizedGateEncoder create(std::size_t d, std::size_t hidden, std::uint64_t seed);
  friend bool operator==(const AmortizedGateEncoder&, const AmortizedGateEncoder&) = default;
};

/// Mask-independent gates sigma(w) for a single fixed partition.
struct FixedGateEncoder {
  Tensor logits;  // [d]

  friend bool operator==(const FixedGateEncoder&, const FixedGateEncoder&) = default;
};

using Encoder = std::variant<AmortizedGateEncoder, FixedGateEncoder>;

std::size_t encoder_dim(const Encoder& enc);

struct EncoderOutput {
  Tensor features;  // y * gates
  Tensor gates;
};

/// Gates for each mask row. `masks` is [n x d] or [d]; output has its shape.
Tensor encoder_gates(const Encoder& enc, const Tensor& masks);
/// f(y, m) = y * gates(m), elementwise.
EncoderOutput encoder_forward(const Encoder& enc, const Tensor& y, const Tensor& m);

/// Conditional velocity field over the concatenation
/// x_t | f(y) | y | m | t, i.e. 4d + 1 inputs and d outputs.
struct VelocityNet {
  std::size_t d = 0;
  MlpParams net;

  static VelocityNet create(std::size_t d, std::size_t hidden, std::uint64_t seed);
  friend bool operator==(const VelocityNet&, const VelocityNet&) = default;
};

/// Batched: x_t, f_enc, y, m are [n x d] and t is [n]. Single-sample
/// vectors of length d are accepted with a scalar-sized t.
Tensor velocity_forward(const VelocityNet& vnet, const Tensor& x_t, const Tensor& f_enc, const Tensor& y,
                        const Tensor& m, const Tensor& t);
Tensor velocity_forward(const VelocityNet& vnet, const Tensor& x_t, const Tensor& f_enc, const Tensor& y,
                        const Tensor& m, double t);

/// Encoder plus velocity field: everything a training run optimizes.
struct ZeroFlowModel {
  Encoder encoder;
  VelocityNet velocity;

  std::vector<Tensor*> parameters();
  friend bool operator==(const ZeroFlowModel&, const ZeroFlowModel&) = default;
};

/// Tape handles for a ZeroFlowModel. Tracked binding registers parameters in
/// the same order as ZeroFlowModel::parameters().
struct BoundModel {
  const ZeroFlowModel* model = nullptr;
  std::variant<MlpVars, ad::Var> encoder;
  MlpVars velocity;
};

BoundModel bind_model(ad::Tape& tape, const ZeroFlowModel& model, bool tracked);
/// Uses caller-made handles, one per entry of ZeroFlowModel::parameters()
/// and in that order (e.g. the perturbed copies of a gradient check).
BoundModel bind_model(const ZeroFlowModel& model, std::span<const ad::Var> params);

/// Gates as a tape node, [n x d] for an [n x d] mask batch.
ad::Var encoder_gates(const BoundModel& bound, ad::Var masks);
ad::Var velocity_forward(const BoundModel& bound, ad::Var x_t, ad::Var f_enc, ad::Var y, ad::Var m,
                         ad::Var t_col);

}  // namespace zf
