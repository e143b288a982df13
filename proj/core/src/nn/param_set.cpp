#include "vcons/nn/param_set.hpp"

#include <cmath>

#include "vcons/error.hpp"

namespace vcons::nn {

Tensor& ParamSet::add(const std::string& name, Tensor init, bool trainable) {
  if (entries_.count(name)) fail(ErrorKind::kData, "duplicate parameter name '" + name + "'");
  Entry e;
  if (trainable) {
    e.m = Tensor(init.shape());
    e.v = Tensor(init.shape());
  }
  e.value = std::move(init);
  e.trainable = trainable;
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorKind::kCorruptModel, "missing parameter '" + name + "'");
  return it->second.value;
}

const Tensor& ParamSet::get(const std::string& name) const { return entry(name).value; }

const ParamSet::Entry& ParamSet::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorKind::kCorruptModel, "missing parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

void ParamSet::adam_step(const std::map<std::string, Tensor>& grads, const AdamOptions& opts) {
  for (const auto& [name, g] : grads) {
    const auto& e = entry(name);
    if (!e.trainable) fail(ErrorKind::kUsage, "gradient supplied for non-trainable '" + name + "'");
    if (g.shape() != e.value.shape()) {
      fail(ErrorKind::kShape, "gradient for '" + name + "' has shape " + shape_str(g.shape()) + ", parameter has " +
                                  shape_str(e.value.shape()));
    }
    if (!g.all_finite()) fail(ErrorKind::kNumeric, "non-finite gradient for parameter '" + name + "'");
  }
  ++step_;
  for (const auto& [name, g] : grads) {
    auto& e = entries_.at(name);
    ++e.steps;
    const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(e.steps));
    const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(e.steps));
    for (std::size_t i = 0; i < g.size(); ++i) {
      e.m[i] = opts.beta1 * e.m[i] + (1.0 - opts.beta1) * g[i];
      e.v[i] = opts.beta2 * e.v[i] + (1.0 - opts.beta2) * g[i] * g[i];
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      e.value[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

}  // namespace vcons::nn
