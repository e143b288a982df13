#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vcons/nn/param_set.hpp"
#include "vcons/nn/tape.hpp"

namespace vcons::nn {

// Builds a scalar from leaf variables wrapping `inputs`.
using GradClosure = std::function<Var(Tape&, std::span<const Var>)>;

// Central-difference check of every input component. Returns
// max over components of |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
double grad_check(const GradClosure& fn, std::vector<Tensor> inputs, double h = 1e-5);

enum class ErrorNorm {
  kComponent,  // max over components
  kTensor,     // per parameter: ||g_a - g_n|| / max(1e-8, ||g_a|| + ||g_n||), max over parameters
};

// Same check over the trainable entries of a ParamSet. `fn` must bind
// parameters through Tape::param. When max_per_param > 0 only that many
// evenly spaced components of each parameter are perturbed.
double grad_check_params(const std::function<Var(Tape&)>& fn, ParamSet& params, double h = 1e-5,
                         std::size_t max_per_param = 0, ErrorNorm norm = ErrorNorm::kComponent);

}  // namespace vcons::nn
