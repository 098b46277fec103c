#include "zeroflow/tape.hpp"

#include <string>

#include "zeroflow/errors.hpp"

namespace zf::ad {

Var Tape::push(Op op, std::vector<std::size_t> inputs, Tensor value, double coeff, std::size_t axis) {
  TapeNode node;
  node.op = op;
  node.value = std::move(value);
  node.coeff = coeff;
  node.axis = axis;
  for (std::size_t in : inputs) node.tracked = node.tracked || nodes_[in].tracked;
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw ContractError("tape: variable belongs to another tape");
}

Var Tape::constant(Tensor value) { return push(Op::Leaf, {}, std::move(value)); }

Var Tape::parameter(Tensor value, ParamSlot slot) {
  if (slots_.contains(slot)) throw ContractError("tape: parameter slot " + std::to_string(slot) + " reused");
  Var v = push(Op::Leaf, {}, std::move(value));
  nodes_[v.id].tracked = true;
  nodes_[v.id].slot = slot;
  slots_[slot] = v.id;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(Op::MatMul, {a.id, b.id}, zf::matmul(a.value(), b.value()));
}

Var Tape::add_row(Var a, Var bias) {
  check_owned(a);
  check_owned(bias);
  return push(Op::AddRow, {a.id, bias.id}, zf::add_row(a.value(), bias.value()));
}

Var Tape::add(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(Op::Add, {a.id, b.id}, zf::add(a.value(), b.value()));
}

Var Tape::sub(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(Op::Sub, {a.id, b.id}, zf::sub(a.value(), b.value()));
}

Var Tape::mul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(Op::Mul, {a.id, b.id}, zf::mul(a.value(), b.value()));
}

Var Tape::scale(Var a, double s) {
  check_owned(a);
  return push(Op::Scale, {a.id}, zf::scale(a.value(), s), s);
}

Var Tape::relu(Var a) {
  check_owned(a);
  return push(Op::Relu, {a.id}, zf::relu(a.value()));
}

Var Tape::sigmoid(Var a) {
  check_owned(a);
  return push(Op::Sigmoid, {a.id}, zf::sigmoid(a.value()));
}

Var Tape::concat(std::span<const Var> parts, std::size_t axis) {
  std::vector<Tensor> values;
  std::vector<std::size_t> ids;
  values.reserve(parts.size());
  for (Var p : parts) {
    check_owned(p);
    values.push_back(p.value());
    ids.push_back(p.id);
  }
  return push(Op::Concat, std::move(ids), zf::concat(values, axis), 0.0, axis);
}

Var Tape::square(Var a) {
  check_owned(a);
  return push(Op::Square, {a.id}, zf::mul(a.value(), a.value()));
}

Var Tape::sum(Var a) {
  check_owned(a);
  return push(Op::Sum, {a.id}, Tensor::scalar(zf::sum(a.value())));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  return parts.front().tape->concat(parts, axis);
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  TapeNode& n = nodes_[id];
  if (!n.tracked) return;
  // A default Tensor has the scalar shape but no storage.
  if (n.adjoint.size() != n.value.size() || n.adjoint.shape() != n.value.shape()) n.adjoint = Tensor(n.value.shape());
  auto dst = n.adjoint.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Gradients Tape::backward(Var loss) {
  check_owned(loss);
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }

  for (TapeNode& n : nodes_) n.adjoint = Tensor();
  Gradients grads;
  if (!nodes_[loss.id].tracked) return grads;

  nodes_[loss.id].adjoint = Tensor(loss.shape(), 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    TapeNode& n = nodes_[id];
    if (!n.tracked || n.adjoint.size() == 0) continue;
    for (std::size_t in : n.inputs) {
      if (in >= id) throw ContractError("backward: tape is not acyclic at node " + std::to_string(id));
    }
    const Tensor& g = n.adjoint;
    switch (n.op) {
      case Op::Leaf:
        if (n.slot) grads[*n.slot] = g;
        break;
      case Op::MatMul: {
        const std::size_t a = n.inputs[0], b = n.inputs[1];
        if (nodes_[a].tracked) accumulate(a, zf::matmul_nt(g, nodes_[b].value));
        if (nodes_[b].tracked) accumulate(b, zf::matmul_tn(nodes_[a].value, g));
        break;
      }
      case Op::AddRow: {
        accumulate(n.inputs[0], g);
        if (nodes_[n.inputs[1]].tracked) {
          accumulate(n.inputs[1], zf::sum_rows(g).reshaped(nodes_[n.inputs[1]].value.shape()));
        }
        break;
      }
      case Op::Add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::Sub:
        accumulate(n.inputs[0], g);
        if (nodes_[n.inputs[1]].tracked) accumulate(n.inputs[1], zf::scale(g, -1.0));
        break;
      case Op::Mul: {
        const std::size_t a = n.inputs[0], b = n.inputs[1];
        if (nodes_[a].tracked) accumulate(a, zf::mul(g, nodes_[b].value));
        if (nodes_[b].tracked) accumulate(b, zf::mul(g, nodes_[a].value));
        break;
      }
      case Op::Scale:
        accumulate(n.inputs[0], zf::scale(g, n.coeff));
        break;
      case Op::Relu: {
        Tensor d = g;
        const Tensor& x = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (!(x[i] > 0.0)) d[i] = 0.0;
        }
        accumulate(n.inputs[0], d);
        break;
      }
      case Op::Sigmoid: {
        Tensor d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.value[i] * (1.0 - n.value[i]);
        accumulate(n.inputs[0], d);
        break;
      }
      case Op::Concat: {
        std::vector<Shape> shapes;
        for (std::size_t in : n.inputs) shapes.push_back(nodes_[in].value.shape());
        std::vector<Tensor> pieces = zf::split(g, shapes, n.axis);
        for (std::size_t k = 0; k < n.inputs.size(); ++k) accumulate(n.inputs[k], pieces[k]);
        break;
      }
      case Op::Square: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 2.0 * x[i];
        accumulate(n.inputs[0], d);
        break;
      }
      case Op::Sum:
        accumulate(n.inputs[0], Tensor(nodes_[n.inputs[0]].value.shape(), g.item()));
        break;
    }
  }
  return grads;
}

}  // namespace zf::ad
