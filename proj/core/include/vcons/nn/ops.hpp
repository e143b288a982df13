#pragma once

#include <cstdint>
#include <vector>

#include "vcons/nn/tape.hpp"

namespace vcons::nn {

enum class Mode { kTrain, kEval };

// y = x W + b; x is [..., I], W is [I, O], b is [O].
Var dense(Var x, Var w, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
// Sum of all elements, as a [1] tensor.
Var sum(Var x);
// Sum of x * weights for a constant weight tensor of the same shape.
Var weighted_sum(Var x, const Tensor& weights);

// Rows of `table` ([V, E]) selected by `indices`, giving [indices.size(), E].
Var embedding_lookup(Var table, const std::vector<int>& indices);
// Concatenation of 2-D tensors along the last axis.
Var concat(const std::vector<Var>& xs);
Var slice_cols(Var x, std::size_t start, std::size_t len);
// Mean over one axis; the axis is removed from the shape.
Var mean_over_axis(Var x, std::size_t axis);
// Row r is taken from `a` where mask[r] != 0, otherwise from `b`.
Var row_select(const std::vector<std::uint8_t>& mask, Var a, Var b);
// out[r] = x[r, index[r]], giving [R, 1].
Var gather_cols(Var x, const std::vector<int>& index);
// x is [R, E], s is [R, 1]; each row of x is multiplied by its scalar.
Var scale_rows(Var x, Var s);

struct LstmWeights {
  Var w;  // [I + H, 4H], gate blocks ordered input, forget, candidate, output
  Var b;  // [4H]
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_step(Var x, LstmState state, const LstmWeights& weights);

// Softmax-weighted sum of per-step states ([B, H] each) scored by a single query ([H]).
Var attention_pool(const std::vector<Var>& states, Var query);

// x is [B, L, Cin], w is [3, Cin, Cout], b is [Cout]. No padding: output is [B, L - 2d, Cout].
Var dilated_conv1d(Var x, Var w, Var b, std::size_t dilation);
// Keeps time steps [start, start + len) of a [B, L, C] tensor.
Var crop_time(Var x, std::size_t start, std::size_t len);

struct BatchNormStats {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// Normalizes every feature (last axis) over all leading positions. Train mode
// uses batch statistics and folds them into `stats` when given; eval mode uses
// the running statistics.
Var batchnorm1d(Var x, Var gamma, Var beta, BatchNormStats stats, Mode mode);

inline constexpr int kIgnoreIndex = -1;

// Mean cross-entropy over rows whose target is not kIgnoreIndex.
Var softmax_xent(Var logits, const std::vector<int>& targets);
// Mean binary cross-entropy over all elements.
Var sigmoid_bce(Var logits, const Tensor& targets);

double stable_sigmoid(double x);

}  // namespace vcons::nn
