#include "zeroflow/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "zeroflow/errors.hpp"

namespace zf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_mat(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same(a, b, op);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("tensor: ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw ShapeError("rows: tensor of shape " + shape_str(shape_) + " is not a matrix");
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw ShapeError("cols: tensor of shape " + shape_str(shape_) + " is not a matrix");
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item: tensor has " + std::to_string(data_.size()) + " elements");
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  if (r >= rows()) throw ShapeError("row: index out of range");
  return Tensor({c}, std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(r * c),
                                         data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  as_mat(out).noalias() = as_mat(a) * as_mat(b);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  Tensor out({a.cols(), b.cols()});
  as_mat(out).noalias() = as_mat(a).transpose() * as_mat(b);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  Tensor out({a.rows(), b.rows()});
  as_mat(out).noalias() = as_mat(a) * as_mat(b).transpose();
  return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row");
  if (row.size() != a.cols()) {
    throw ShapeError("add_row: bias of " + std::to_string(row.size()) + " for " +
                     std::to_string(a.cols()) + " columns");
  }
  Tensor out = a;
  const std::size_t c = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] += row[j];
  }
  return out;
}

Tensor sum_rows(const Tensor& a) {
  require_matrix(a, "sum_rows");
  const std::size_t c = a.cols();
  Tensor out({c});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < c; ++j) out[j] += a[r * c + j];
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

double sigmoid(double x) {
  // Clamped so that finite logits never produce exactly 0 or 1.
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));

  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k != axis && s[k] != first[k]) {
        throw ShapeError("concat: off-axis mismatch " + shape_str(s) + " vs " + shape_str(first));
      }
    }
    out_shape[axis] += s[axis];
  }

  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= first[k];
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < first.size(); ++k) inner *= first[k];

  Tensor out(out_shape);
  const std::size_t out_stride = out_shape[axis] * inner;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t block = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  out.data().begin() + static_cast<std::ptrdiff_t>(o * out_stride + offset));
    }
    offset += block;
  }
  return out;
}

std::vector<Tensor> split(const Tensor& whole, std::span<const Shape> part_shapes, std::size_t axis) {
  const Shape& ws = whole.shape();
  if (axis >= ws.size()) throw ShapeError("split: axis out of range");
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= ws[k];
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < ws.size(); ++k) inner *= ws[k];

  const std::size_t stride = ws[axis] * inner;
  std::vector<Tensor> out;
  out.reserve(part_shapes.size());
  std::size_t offset = 0;
  for (const Shape& s : part_shapes) {
    Tensor p(s);
    const std::size_t block = s[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(whole.data().begin() + static_cast<std::ptrdiff_t>(o * stride + offset), block,
                  p.data().begin() + static_cast<std::ptrdiff_t>(o * block));
    }
    offset += block;
    out.push_back(std::move(p));
  }
  if (offset != stride) throw ShapeError("split: part sizes do not cover the axis");
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

}  // namespace zf
