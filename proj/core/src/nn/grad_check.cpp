#include "vcons/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace vcons::nn {
namespace {

double rel_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
}

}  // namespace

double grad_check(const GradClosure& fn, std::vector<Tensor> inputs, double h) {
  auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& in : inputs) vars.push_back(tape.leaf(in));
    Var out = fn(tape, vars);
    const double value = out.value().item();
    if (with_grad) {
      tape.backward(out);
      for (const auto& v : vars) grads->push_back(tape.has_grad(v.id) ? tape.grad(v.id) : Tensor(v.shape()));
    }
    return value;
  };

  std::vector<Tensor> analytic;
  evaluate(true, &analytic);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double plus = evaluate(false, nullptr);
      inputs[k][i] = orig - h;
      const double minus = evaluate(false, nullptr);
      inputs[k][i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      worst = std::max(worst, rel_error(analytic[k][i], numeric));
    }
  }
  return worst;
}

double grad_check_params(const std::function<Var(Tape&)>& fn, ParamSet& params, double h,
                         std::size_t max_per_param, ErrorNorm norm) {
  std::map<std::string, Tensor> analytic;
  {
    Tape tape;
    Var out = fn(tape);
    tape.backward(out);
    analytic = tape.param_grads();
  }
  auto evaluate = [&] {
    Tape tape;
    return fn(tape).value().item();
  };

  double worst = 0.0;
  for (const auto& name : params.names()) {
    if (!params.entry(name).trainable) continue;
    Tensor& value = params.get(name);
    const std::size_t n = value.size();
    const std::size_t stride = (max_per_param == 0 || n <= max_per_param) ? 1 : n / max_per_param;
    auto it = analytic.find(name);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = value[i];
      value[i] = orig + h;
      const double plus = evaluate();
      value[i] = orig - h;
      const double minus = evaluate();
      value[i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      if (norm == ErrorNorm::kComponent) worst = std::max(worst, rel_error(a, numeric));
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    if (norm == ErrorNorm::kTensor)
      worst = std::max(worst, std::sqrt(diff2) / std::max(1e-8, std::sqrt(a2) + std::sqrt(n2)));
  }
  return worst;
}

}  // namespace vcons::nn
