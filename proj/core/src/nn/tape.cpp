#include "vcons/nn/tape.hpp"

#include "vcons/error.hpp"

namespace vcons::nn {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  n.op = "leaf";
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(const ParamSet& params, const std::string& name) {
  if (param_owner_ && param_owner_ != &params) {
    fail(ErrorKind::kUsage, "a tape binds parameters from a single ParamSet");
  }
  param_owner_ = &params;
  auto it = params_.find(name);
  if (it != params_.end()) return {this, it->second};
  const auto& e = params.entry(name);
  Node n;
  n.external = &e.value;
  n.requires_grad = e.trainable;
  n.op = "param";
  nodes_.push_back(std::move(n));
  params_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const char* op, std::initializer_list<Var> parents, Backward backward) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || nodes_[p.id].requires_grad;
  return record(std::move(value), op, rg, std::move(backward));
}

Var Tape::record(Tensor value, const char* op, bool requires_grad, Backward backward) {
  if (!value.all_finite()) fail(ErrorKind::kNumeric, std::string("non-finite output in op '") + op + "'");
  Node n;
  n.owned = std::move(value);
  n.op = op;
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const auto& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor(value(id).shape());
    n.grad_ready = true;
  }
  return n.grad;
}

bool Tape::has_grad(std::size_t id) const { return nodes_[id].grad_ready; }

void Tape::backward(Var scalar) {
  if (scalar.tape != this) fail(ErrorKind::kUsage, "backward() on a variable from another tape");
  if (value(scalar.id).size() != 1) {
    fail(ErrorKind::kShape, "backward() needs a scalar, got " + shape_str(value(scalar.id).shape()));
  }
  grad(scalar.id)[0] = 1.0;
  for (std::size_t i = scalar.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.grad_ready || !n.backward) continue;
    n.backward(*this, i);
    if (!n.grad.all_finite()) {
      fail(ErrorKind::kNumeric, std::string("non-finite gradient in op '") + n.op + "'");
    }
  }
}

std::map<std::string, Tensor> Tape::param_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params_) {
    const auto& n = nodes_[id];
    if (n.requires_grad && n.grad_ready) out.emplace(name, n.grad);
  }
  return out;
}

}  // namespace vcons::nn
