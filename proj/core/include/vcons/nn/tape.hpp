#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>

#include "vcons/nn/param_set.hpp"
#include "vcons/nn/tensor.hpp"

namespace vcons::nn {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Records one forward pass; backward() replays it in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Binds a parameter by reference; repeated calls with the same name return
  // the same node, so shared weights accumulate into one gradient.
  Var param(const ParamSet& params, const std::string& name);

  Var record(Tensor value, const char* op, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, const char* op, bool requires_grad, Backward backward);

  const Tensor& value(std::size_t id) const;
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var scalar);

  std::map<std::string, Tensor> param_grads() const;
  const std::map<std::string, std::size_t>& param_nodes() const { return params_; }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool grad_ready = false;
    bool requires_grad = false;
    const char* op = "";
    Backward backward;
  };

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  const ParamSet* param_owner_ = nullptr;
};

}  // namespace vcons::nn
