#include "zeroflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "zeroflow/errors.hpp"

namespace zf {

namespace {

double evaluate(const Objective& f, std::span<const Tensor> values) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(values.size());
  for (const Tensor& v : values) vars.push_back(tape.constant(v));
  const double out = f(tape, vars).value().item();
  if (!std::isfinite(out)) throw NumericError("grad_check: objective evaluated to a non-finite value");
  return out;
}

}  // namespace

double grad_check(const Objective& f, std::span<const Tensor> params, double eps) {
  if (!(eps > 0.0)) throw ParameterError("grad_check: eps must be positive");
  if (params.empty()) return 0.0;

  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.parameter(params[i], i));
  const ad::Var loss = f(tape, vars);
  if (!std::isfinite(loss.value().item())) {
    throw NumericError("grad_check: objective evaluated to a non-finite value");
  }
  const ad::Gradients grads = tape.backward(loss);

  std::vector<Tensor> work(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto it = grads.find(i);
    for (std::size_t k = 0; k < work[i].size(); ++k) {
      const double g_ad = it == grads.end() ? 0.0 : it->second[k];
      const double original = work[i][k];
      work[i][k] = original + eps;
      const double f_plus = evaluate(f, work);
      work[i][k] = original - eps;
      const double f_minus = evaluate(f, work);
      work[i][k] = original;
      const double g_fd = (f_plus - f_minus) / (2.0 * eps);
      const double rel = std::abs(g_ad - g_fd) / std::max(1e-8, std::abs(g_ad) + std::abs(g_fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace zf
