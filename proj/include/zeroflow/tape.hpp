#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "zeroflow/tensor.hpp"

namespace zf::ad {

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  AddRow,
  Add,
  Sub,
  Mul,
  Scale,
  Relu,
  Sigmoid,
  Concat,
  Square,
  Sum,
};

/// Identifies a parameter across tapes; gradients are keyed by it.
using ParamSlot = std::size_t;
using Gradients = std::map<ParamSlot, Tensor>;

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

struct TapeNode {
  Op op = Op::Leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  Tensor adjoint;
  double coeff = 0.0;     // Scale factor
  std::size_t axis = 0;   // Concat axis
  bool tracked = false;   // some parameter is an ancestor
  std::optional<ParamSlot> slot;
};

/// Append-only reverse-mode tape. Nodes are stored in creation order, which
/// is a topological order of the DAG, so backward is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value, ParamSlot slot);

  Var matmul(Var a, Var b);
  Var add_row(Var a, Var bias);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var square(Var a);
  Var sum(Var a);

  /// Gradient of a single-element loss with respect to every parameter that
  /// is an ancestor of it. Parameters the loss does not depend on are absent.
  Gradients backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const TapeNode& node(std::size_t id) const { return nodes_.at(id); }

 private:
  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, double coeff = 0.0,
           std::size_t axis = 0);
  void check_owned(Var v) const;
  void accumulate(std::size_t id, const Tensor& g);

  std::vector<TapeNode> nodes_;
  std::map<ParamSlot, std::size_t> slots_;
};

inline const Tensor& Var::value() const { return tape->node(id).value; }

inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var add_row(Var a, Var bias) { return a.tape->add_row(a, bias); }
inline Var relu(Var a) { return a.tape->relu(a); }
inline Var sigmoid(Var a) { return a.tape->sigmoid(a); }
inline Var square(Var a) { return a.tape->square(a); }
inline Var sum(Var a) { return a.tape->sum(a); }
Var concat(std::span<const Var> parts, std::size_t axis);

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }

}  // namespace zf::ad
