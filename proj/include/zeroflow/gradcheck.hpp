#pragma once

#include <functional>
#include <span>

#include "zeroflow/tape.hpp"

namespace zf {

/// Builds a scalar objective on `tape` from the given parameter handles.
using Objective = std::function<ad::Var(ad::Tape& tape, std::span<const ad::Var> params)>;

/// Compares tape gradients against central differences
/// (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) over every coordinate and
/// returns max |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|). Zero parameters
/// yields 0. Throws NumericError if any evaluation is non-finite.
double grad_check(const Objective& f, std::span<const Tensor> params, double eps);

}  // namespace zf
