#pragma once

#include <map>
#include <string>
#include <vector>

#include "vcons/nn/tensor.hpp"

namespace vcons::nn {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters with their Adam moment buffers. Non-trainable entries hold
// state such as batch-norm running statistics and are never updated by Adam.
class ParamSet {
 public:
  struct Entry {
    Tensor value;
    Tensor m;
    Tensor v;
    long steps = 0;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor init, bool trainable = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t num_values() const;

  long step() const { return step_; }

  // Parameters absent from `grads` are left untouched (moments included).
  void adam_step(const std::map<std::string, Tensor>& grads, const AdamOptions& opts = {});

 private:
  std::map<std::string, Entry> entries_;
  long step_ = 0;
};

}  // namespace vcons::nn
