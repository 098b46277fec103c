#include "zeroflow/models.hpp"

#include <array>
#include <cmath>
#include <string>

#include "zeroflow/errors.hpp"
#include "zeroflow/rng.hpp"

namespace zf {

MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed, OutputActivation output) {
  if (dims.size() < 2) throw ParameterError("init_mlp: need at least input and output dims");
  for (std::size_t d : dims) {
    if (d == 0) throw ParameterError("init_mlp: dims must be positive");
  }
  MlpParams mlp;
  mlp.dims.assign(dims.begin(), dims.end());
  mlp.output = output;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[i] + dims[i + 1]));
    Tensor w({dims[i], dims[i + 1]});
    for (double& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
    mlp.weights.push_back(std::move(w));
    mlp.biases.emplace_back(Shape{dims[i + 1]});
  }
  return mlp;
}

Tensor mlp_apply(const MlpParams& mlp, const Tensor& x) {
  const bool single = x.rank() == 1;
  Tensor h = single ? x.reshaped({1, x.size()}) : x;
  if (h.cols() != mlp.dims.front()) {
    throw ShapeError("mlp: expected " + std::to_string(mlp.dims.front()) + " inputs, got " +
                     shape_str(x.shape()));
  }
  const std::size_t layers = mlp.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = add_row(matmul(h, mlp.weights[i]), mlp.biases[i]);
    if (i + 1 < layers) {
      h = relu(h);
    } else if (mlp.output == OutputActivation::Sigmoid) {
      h = sigmoid(h);
    }
  }
  return single ? h.reshaped({h.size()}) : h;
}

MlpVars bind_mlp(ad::Tape& tape, const MlpParams& mlp, ad::ParamSlot& next_slot) {
  MlpVars vars;
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    vars.weights.push_back(tape.parameter(mlp.weights[i], next_slot++));
    vars.biases.push_back(tape.parameter(mlp.biases[i], next_slot++));
  }
  return vars;
}

MlpVars const_mlp(ad::Tape& tape, const MlpParams& mlp) {
  MlpVars vars;
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    vars.weights.push_back(tape.constant(mlp.weights[i]));
    vars.biases.push_back(tape.constant(mlp.biases[i]));
  }
  return vars;
}

ad::Var mlp_forward(const MlpParams& mlp, const MlpVars& vars, ad::Var x) {
  if (x.value().rank() != 2 || x.value().cols() != mlp.dims.front()) {
    throw ShapeError("mlp: expected [n x " + std::to_string(mlp.dims.front()) + "] input, got " +
                     shape_str(x.shape()));
  }
  ad::Var h = x;
  const std::size_t layers = vars.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = ad::add_row(ad::matmul(h, vars.weights[i]), vars.biases[i]);
    if (i + 1 < layers) {
      h = ad::relu(h);
    } else if (mlp.output == OutputActivation::Sigmoid) {
      h = ad::sigmoid(h);
    }
  }
  return h;
}

void collect_parameters(MlpParams& mlp, std::vector<Tensor*>& out) {
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    out.push_back(&mlp.weights[i]);
    out.push_back(&mlp.biases[i]);
  }
}

AmortizedGateEncoder AmortizedGateEncoder::create(std::size_t d, std::size_t hidden, std::uint64_t seed) {
  const std::array<std::size_t, 3> dims{d, hidden, d};
  return {init_mlp(dims, seed, OutputActivation::Sigmoid)};
}

std::size_t encoder_dim(const Encoder& enc) {
  if (const auto* a = std::get_if<AmortizedGateEncoder>(&enc)) return a->gate_net.dims.front();
  return std::get<FixedGateEncoder>(enc).logits.size();
}

Tensor encoder_gates(const Encoder& enc, const Tensor& masks) {
  const std::size_t d = encoder_dim(enc);
  if (masks.cols() != d) {
    throw ShapeError("encoder: mask has shape " + shape_str(masks.shape()) + ", expected " +
                     std::to_string(d) + " columns");
  }
  if (const auto* a = std::get_if<AmortizedGateEncoder>(&enc)) return mlp_apply(a->gate_net, masks);

  const Tensor g = sigmoid(std::get<FixedGateEncoder>(enc).logits);
  Tensor out(masks.shape());
  for (std::size_t r = 0; r < masks.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = g[j];
  }
  return out;
}

EncoderOutput encoder_forward(const Encoder& enc, const Tensor& y, const Tensor& m) {
  if (y.shape() != m.shape()) {
    throw ShapeError("encoder: y " + shape_str(y.shape()) + " and m " + shape_str(m.shape()) + " differ");
  }
  Tensor gates = encoder_gates(enc, m);
  Tensor features = mul(y, gates);
  return {std::move(features), std::move(gates)};
}

VelocityNet VelocityNet::create(std::size_t d, std::size_t hidden, std::uint64_t seed) {
  const std::array<std::size_t, 3> dims{4 * d + 1, hidden, d};
  return {d, init_mlp(dims, seed)};
}

Tensor velocity_forward(const VelocityNet& vnet, const Tensor& x_t, const Tensor& f_enc, const Tensor& y,
                        const Tensor& m, const Tensor& t) {
  const bool single = x_t.rank() == 1;
  auto as_rows = [&](const Tensor& v, const char* name) {
    const Tensor r = single && v.rank() == 1 ? v.reshaped({1, v.size()}) : v;
    if (r.rank() != 2 || r.cols() != vnet.d || r.rows() != (single ? 1 : x_t.rows())) {
      throw ShapeError(std::string("velocity: ") + name + " has shape " + shape_str(v.shape()));
    }
    return r;
  };
  const std::size_t n = single ? 1 : x_t.rows();
  if (t.size() != n) throw ShapeError("velocity: t has " + std::to_string(t.size()) + " entries for " +
                                      std::to_string(n) + " rows");
  const std::array<Tensor, 5> parts{as_rows(x_t, "x_t"), as_rows(f_enc, "f_enc"), as_rows(y, "y"),
                                    as_rows(m, "m"), t.reshaped({n, 1})};
  Tensor out = mlp_apply(vnet.net, concat(parts, 1));
  return single ? out.reshaped({vnet.d}) : out;
}

Tensor velocity_forward(const VelocityNet& vnet, const Tensor& x_t, const Tensor& f_enc, const Tensor& y,
                        const Tensor& m, double t) {
  const std::size_t n = x_t.rank() == 1 ? 1 : x_t.rows();
  return velocity_forward(vnet, x_t, f_enc, y, m, Tensor({n}, t));
}

std::vector<Tensor*> ZeroFlowModel::parameters() {
  std::vector<Tensor*> out;
  if (auto* a = std::get_if<AmortizedGateEncoder>(&encoder)) {
    collect_parameters(a->gate_net, out);
  } else {
    out.push_back(&std::get<FixedGateEncoder>(encoder).logits);
  }
  collect_parameters(velocity.net, out);
  return out;
}

BoundModel bind_model(ad::Tape& tape, const ZeroFlowModel& model, bool tracked) {
  BoundModel b;
  b.model = &model;
  ad::ParamSlot slot = 0;
  if (const auto* a = std::get_if<AmortizedGateEncoder>(&model.encoder)) {
    b.encoder = tracked ? bind_mlp(tape, a->gate_net, slot) : const_mlp(tape, a->gate_net);
  } else {
    const Tensor& w = std::get<FixedGateEncoder>(model.encoder).logits;
    b.encoder = tracked ? tape.parameter(w, slot++) : tape.constant(w);
  }
  b.velocity = tracked ? bind_mlp(tape, model.velocity.net, slot) : const_mlp(tape, model.velocity.net);
  return b;
}

BoundModel bind_model(const ZeroFlowModel& model, std::span<const ad::Var> params) {
  BoundModel b;
  b.model = &model;
  std::size_t next = 0;
  auto take_mlp = [&](const MlpParams& mlp) {
    MlpVars vars;
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
      if (next + 2 > params.size()) throw ShapeError("bind_model: too few parameter handles");
      vars.weights.push_back(params[next++]);
      vars.biases.push_back(params[next++]);
    }
    return vars;
  };
  if (const auto* a = std::get_if<AmortizedGateEncoder>(&model.encoder)) {
    b.encoder = take_mlp(a->gate_net);
  } else {
    if (params.empty()) throw ShapeError("bind_model: too few parameter handles");
    b.encoder = params[next++];
  }
  b.velocity = take_mlp(model.velocity.net);
  if (next != params.size()) throw ShapeError("bind_model: too many parameter handles");
  return b;
}

ad::Var encoder_gates(const BoundModel& bound, ad::Var masks) {
  if (const auto* vars = std::get_if<MlpVars>(&bound.encoder)) {
    return mlp_forward(std::get<AmortizedGateEncoder>(bound.model->encoder).gate_net, *vars, masks);
  }
  // Broadcast sigma(w) over the batch rows via a zero base.
  ad::Tape& tape = *masks.tape;
  const ad::Var zeros = tape.constant(Tensor(masks.shape()));
  return ad::add_row(zeros, ad::sigmoid(std::get<ad::Var>(bound.encoder)));
}

ad::Var velocity_forward(const BoundModel& bound, ad::Var x_t, ad::Var f_enc, ad::Var y, ad::Var m,
                         ad::Var t_col) {
  const std::array<ad::Var, 5> parts{x_t, f_enc, y, m, t_col};
  return mlp_forward(bound.model->velocity.net, bound.velocity, ad::concat(parts, 1));
}

}  // namespace zf
