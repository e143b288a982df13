#include "vcons/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "vcons/error.hpp"

namespace vcons::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap as_mat(const Tensor& t) {
  return ConstMatMap(t.ptr(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MatMap as_mat(Tensor& t) {
  return MatMap(t.ptr(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorKind::kShape, std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

template <typename F>
Var unary(Var x, const char* op, F forward_and_deriv) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  Tensor d(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    auto [val, der] = forward_and_deriv(xv[i]);
    y[i] = val;
    d[i] = der;
  }
  const std::size_t xid = x.id;
  return x.tape->record(std::move(y), op, {x}, [xid, d = std::move(d)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d[i];
  });
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var dense(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (wv.rank() != 2 || xv.rank() < 1 || xv.cols() != wv.dim(0)) shape_error("dense", xv.shape(), wv.shape());
  if (bv.rank() != 1 || bv.dim(0) != wv.dim(1)) shape_error("dense", wv.shape(), bv.shape());
  Shape out_shape = xv.shape();
  out_shape.back() = wv.dim(1);
  Tensor y(out_shape);
  auto ym = as_mat(y);
  ym.noalias() = as_mat(xv) * as_mat(wv);
  ym.rowwise() += ConstVecMap(bv.ptr(), static_cast<Eigen::Index>(bv.size()));
  const std::size_t xid = x.id, wid = w.id, bid = b.id;
  return x.tape->record(std::move(y), "dense", {x, w, b}, [xid, wid, bid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const auto gm = as_mat(g);
    if (t.requires_grad(xid)) as_mat(t.grad(xid)).noalias() += gm * as_mat(t.value(wid)).transpose();
    if (t.requires_grad(wid)) as_mat(t.grad(wid)).noalias() += as_mat(t.value(xid)).transpose() * gm;
    if (t.requires_grad(bid)) {
      Tensor& gb = t.grad(bid);
      VecMap(gb.ptr(), static_cast<Eigen::Index>(gb.size())) += gm.colwise().sum();
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(std::move(y), "add", {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t id : {aid, bid}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(std::move(y), "mul", {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(aid)) {
      Tensor& ga = t.grad(aid);
      const Tensor& bv = t.value(bid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bid)) {
      Tensor& gb = t.grad(bid);
      const Tensor& av = t.value(aid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor y = a.value();
  for (auto& v : y.data()) v *= s;
  const std::size_t aid = a.id;
  return a.tape->record(std::move(y), "scale", {a}, [aid, s](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var relu(Var x) {
  return unary(x, "relu", [](double v) { return v > 0.0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0}; });
}

Var sigmoid(Var x) {
  return unary(x, "sigmoid", [](double v) {
    const double s = stable_sigmoid(v);
    return std::pair{s, s * (1.0 - s)};
  });
}

Var tanh(Var x) {
  return unary(x, "tanh", [](double v) {
    const double th = std::tanh(v);
    return std::pair{th, 1.0 - th * th};
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t xid = x.id;
  return x.tape->record(Tensor::scalar(total), "sum", {x}, [xid](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(xid).data()) v += g;
  });
}

Var weighted_sum(Var x, const Tensor& weights) {
  if (weights.shape() != x.shape()) shape_error("weighted_sum", x.shape(), weights.shape());
  double total = 0.0;
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i] * weights[i];
  const std::size_t xid = x.id;
  return x.tape->record(Tensor::scalar(total), "weighted_sum", {x}, [xid, weights](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * weights[i];
  });
}

Var embedding_lookup(Var table, const std::vector<int>& indices) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) fail(ErrorKind::kShape, "embedding_lookup: table must be 2-D, got " + shape_str(tv.shape()));
  const std::size_t e = tv.dim(1);
  Tensor y({indices.size(), e});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || static_cast<std::size_t>(idx) >= tv.dim(0)) {
      fail(ErrorKind::kData, "embedding_lookup: index " + std::to_string(idx) + " outside table of " +
                                 std::to_string(tv.dim(0)) + " rows");
    }
    std::copy_n(tv.ptr() + idx * e, e, y.ptr() + r * e);
  }
  const std::size_t tid = table.id;
  return table.tape->record(std::move(y), "embedding_lookup", {table}, [tid, indices, e](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad(tid);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      double* dst = gt.ptr() + indices[r] * e;
      const double* src = g.ptr() + r * e;
      for (std::size_t k = 0; k < e; ++k) dst[k] += src[k];
    }
  });
}

Var concat(const std::vector<Var>& xs) {
  if (xs.empty()) fail(ErrorKind::kShape, "concat: no inputs");
  const std::size_t rows = xs[0].value().rows();
  std::size_t total = 0;
  for (const auto& x : xs) {
    const Tensor& v = x.value();
    if (v.rank() != 2 || v.rows() != rows) shape_error("concat", xs[0].shape(), v.shape());
    total += v.cols();
  }
  Tensor y({rows, total});
  std::vector<std::size_t> ids, widths;
  bool rg = false;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const Tensor& v = x.value();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.ptr() + r * v.cols(), v.cols(), y.ptr() + r * total + offset);
    offset += v.cols();
    ids.push_back(x.id);
    widths.push_back(v.cols());
    rg = rg || xs[0].tape->requires_grad(x.id);
  }
  return xs[0].tape->record(std::move(y), "concat", rg, [ids, widths, rows, total](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor& gx = t.grad(ids[k]);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < widths[k]; ++c) gx[r * widths[k] + c] += g[r * total + off + c];
        }
      }
      off += widths[k];
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || start + len > xv.cols()) {
    fail(ErrorKind::kShape, "slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                ") outside " + shape_str(xv.shape()));
  }
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor y({rows, len});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.ptr() + r * cols + start, len, y.ptr() + r * len);
  const std::size_t xid = x.id;
  return x.tape->record(std::move(y), "slice_cols", {x}, [xid, rows, cols, start, len](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < len; ++c) gx[r * cols + start + c] += g[r * len + c];
    }
  });
}

Var mean_over_axis(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) fail(ErrorKind::kShape, "mean_over_axis: axis out of range for " + shape_str(xv.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t a = xv.dim(axis);
  if (a == 0) fail(ErrorKind::kShape, "mean_over_axis: empty axis");
  Shape out_shape;
  for (std::size_t i = 0; i < xv.rank(); ++i) {
    if (i != axis) out_shape.push_back(xv.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor y(out_shape);
  const double inv = 1.0 / static_cast<double>(a);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < a; ++k) {
      const double* src = xv.ptr() + (o * a + k) * inner;
      double* dst = y.ptr() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : y.data()) v *= inv;
  const std::size_t xid = x.id;
  return x.tape->record(std::move(y), "mean_over_axis", {x}, [xid, outer, a, inner, inv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xid);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t k = 0; k < a; ++k) {
        double* dst = gx.ptr() + (o * a + k) * inner;
        const double* src = g.ptr() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += inv * src[i];
      }
    }
  });
}

Var row_select(const std::vector<std::uint8_t>& mask, Var a, Var b) {
  require_same_shape("row_select", a, b);
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (mask.size() != rows) {
    fail(ErrorKind::kShape, "row_select: mask of " + std::to_string(mask.size()) + " rows for " + shape_str(av.shape()));
  }
  Tensor y = b.value();
  for (std::size_t r = 0; r < rows; ++r) {
    if (mask[r]) std::copy_n(av.ptr() + r * cols, cols, y.ptr() + r * cols);
  }
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(std::move(y), "row_select", {a, b}, [mask, aid, bid, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t r = 0; r < mask.size(); ++r) {
      const std::size_t target = mask[r] ? aid : bid;
      if (!t.requires_grad(target)) continue;
      Tensor& gx = t.grad(target);
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c];
    }
  });
}

Var gather_cols(Var x, const std::vector<int>& index) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (index.size() != rows) fail(ErrorKind::kShape, "gather_cols: index length does not match " + shape_str(xv.shape()));
  Tensor y({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= cols) {
      fail(ErrorKind::kData, "gather_cols: column " + std::to_string(index[r]) + " out of range");
    }
    y[r] = xv[r * cols + index[r]];
  }
  const std::size_t xid = x.id;
  return x.tape->record(std::move(y), "gather_cols", {x}, [xid, index, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xid);
    for (std::size_t r = 0; r < index.size(); ++r) gx[r * cols + index[r]] += g[r];
  });
}

Var scale_rows(Var x, Var s) {
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (sv.rank() != 2 || sv.dim(0) != rows || sv.dim(1) != 1) shape_error("scale_rows", xv.shape(), sv.shape());
  Tensor y = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] *= sv[r];
  }
  const std::size_t xid = x.id, sid = s.id;
  return x.tape->record(std::move(y), "scale_rows", {x, s}, [xid, sid, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(xid)) {
      Tensor& gx = t.grad(xid);
      const Tensor& sv = t.value(sid);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * sv[r];
      }
    }
    if (t.requires_grad(sid)) {
      Tensor& gs = t.grad(sid);
      const Tensor& xv = t.value(xid);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * xv[r * cols + c];
        gs[r] += acc;
      }
    }
  });
}

LstmState lstm_step(Var x, LstmState state, const LstmWeights& weights) {
  const Tensor& hv = state.h.value();
  const Tensor& wv = weights.w.value();
  const std::size_t hidden = hv.cols();
  if (wv.rank() != 2 || wv.dim(1) != 4 * hidden || wv.dim(0) != x.value().cols() + hidden) {
    fail(ErrorKind::kShape, "lstm_step: weights " + shape_str(wv.shape()) + " do not fit input " +
                                shape_str(x.shape()) + " and state " + shape_str(hv.shape()));
  }
  if (state.c.shape() != state.h.shape()) shape_error("lstm_step", state.h.shape(), state.c.shape());
  Var z = dense(concat({x, state.h}), weights.w, weights.b);
  Var in_gate = sigmoid(slice_cols(z, 0, hidden));
  Var forget_gate = sigmoid(slice_cols(z, hidden, hidden));
  Var candidate = tanh(slice_cols(z, 2 * hidden, hidden));
  Var out_gate = sigmoid(slice_cols(z, 3 * hidden, hidden));
  Var c = add(mul(forget_gate, state.c), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

Var attention_pool(const std::vector<Var>& states, Var query) {
  if (states.empty()) fail(ErrorKind::kShape, "attention_pool: no states");
  const Tensor& qv = query.value();
  const std::size_t rows = states[0].value().rows(), hidden = states[0].value().cols();
  if (qv.size() != hidden) shape_error("attention_pool", states[0].shape(), qv.shape());
  const std::size_t steps = states.size();
  for (const auto& s : states) {
    if (s.shape() != states[0].shape()) shape_error("attention_pool", states[0].shape(), s.shape());
  }
  Tensor alpha({rows, steps});
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < steps; ++k) {
      const double* h = states[k].value().ptr() + r * hidden;
      double s = 0.0;
      for (std::size_t j = 0; j < hidden; ++j) s += h[j] * qv[j];
      alpha[r * steps + k] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      alpha[r * steps + k] = std::exp(alpha[r * steps + k] - mx);
      z += alpha[r * steps + k];
    }
    for (std::size_t k = 0; k < steps; ++k) alpha[r * steps + k] /= z;
  }
  Tensor y({rows, hidden});
  for (std::size_t k = 0; k < steps; ++k) {
    const Tensor& hv = states[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = alpha[r * steps + k];
      for (std::size_t j = 0; j < hidden; ++j) y[r * hidden + j] += a * hv[r * hidden + j];
    }
  }
  std::vector<std::size_t> ids;
  bool rg = query.tape->requires_grad(query.id);
  for (const auto& s : states) {
    ids.push_back(s.id);
    rg = rg || query.tape->requires_grad(s.id);
  }
  const std::size_t qid = query.id;
  return query.tape->record(
      std::move(y), "attention_pool", rg,
      [ids, qid, alpha = std::move(alpha), rows, hidden, steps](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(qid);
        Tensor dscore({rows, steps});
        for (std::size_t r = 0; r < rows; ++r) {
          double weighted = 0.0;
          for (std::size_t k = 0; k < steps; ++k) {
            const double* h = t.value(ids[k]).ptr() + r * hidden;
            double da = 0.0;
            for (std::size_t j = 0; j < hidden; ++j) da += g[r * hidden + j] * h[j];
            dscore[r * steps + k] = da;
            weighted += alpha[r * steps + k] * da;
          }
          for (std::size_t k = 0; k < steps; ++k) {
            dscore[r * steps + k] = alpha[r * steps + k] * (dscore[r * steps + k] - weighted);
          }
        }
        for (std::size_t k = 0; k < steps; ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& gh = t.grad(ids[k]);
          for (std::size_t r = 0; r < rows; ++r) {
            const double a = alpha[r * steps + k];
            const double ds = dscore[r * steps + k];
            for (std::size_t j = 0; j < hidden; ++j) gh[r * hidden + j] += a * g[r * hidden + j] + ds * qv[j];
          }
        }
        if (t.requires_grad(qid)) {
          Tensor& gq = t.grad(qid);
          for (std::size_t k = 0; k < steps; ++k) {
            const Tensor& hv = t.value(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              const double ds = dscore[r * steps + k];
              for (std::size_t j = 0; j < hidden; ++j) gq[j] += ds * hv[r * hidden + j];
            }
          }
        }
      });
}

Var dilated_conv1d(Var x, Var w, Var b, std::size_t dilation) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 3 || wv.rank() != 3 || wv.dim(0) != 3 || wv.dim(1) != xv.dim(2)) {
    shape_error("dilated_conv1d", xv.shape(), wv.shape());
  }
  if (bv.rank() != 1 || bv.dim(0) != wv.dim(2)) shape_error("dilated_conv1d", wv.shape(), bv.shape());
  if (dilation < 1) fail(ErrorKind::kUsage, "dilated_conv1d: dilation must be >= 1");
  const std::size_t batch = xv.dim(0), len = xv.dim(1), cin = xv.dim(2), cout = wv.dim(2);
  if (len <= 2 * dilation) {
    fail(ErrorKind::kShape, "dilated_conv1d: sequence too short (length " + std::to_string(len) + ", dilation " +
                                std::to_string(dilation) + ")");
  }
  const std::size_t out_len = len - 2 * dilation;
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  Tensor y({batch, out_len, cout});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    ConstMatMap xb(xv.ptr() + bi * len * cin, ei(len), ei(cin));
    MatMap yb(y.ptr() + bi * out_len * cout, ei(out_len), ei(cout));
    yb.rowwise() = ConstVecMap(bv.ptr(), ei(cout));
    for (std::size_t k = 0; k < 3; ++k) {
      ConstMatMap wk(wv.ptr() + k * cin * cout, ei(cin), ei(cout));
      yb.noalias() += xb.middleRows(ei(k * dilation), ei(out_len)) * wk;
    }
  }
  const std::size_t xid = x.id, wid = w.id, bid = b.id;
  return x.tape->record(
      std::move(y), "dilated_conv1d", {x, w, b},
      [=](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(xid);
        const Tensor& wv = t.value(wid);
        for (std::size_t bi = 0; bi < batch; ++bi) {
          ConstMatMap gb(g.ptr() + bi * out_len * cout, ei(out_len), ei(cout));
          if (t.requires_grad(bid)) {
            Tensor& gbias = t.grad(bid);
            VecMap(gbias.ptr(), ei(cout)) += gb.colwise().sum();
          }
          for (std::size_t k = 0; k < 3; ++k) {
            ConstMatMap wk(wv.ptr() + k * cin * cout, ei(cin), ei(cout));
            if (t.requires_grad(xid)) {
              MatMap gx(t.grad(xid).ptr() + bi * len * cin, ei(len), ei(cin));
              gx.middleRows(ei(k * dilation), ei(out_len)).noalias() += gb * wk.transpose();
            }
            if (t.requires_grad(wid)) {
              ConstMatMap xb(xv.ptr() + bi * len * cin, ei(len), ei(cin));
              MatMap gw(t.grad(wid).ptr() + k * cin * cout, ei(cin), ei(cout));
              gw.noalias() += xb.middleRows(ei(k * dilation), ei(out_len)).transpose() * gb;
            }
          }
        }
      });
}

Var crop_time(Var x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || start + len > xv.dim(1) || len == 0) {
    fail(ErrorKind::kShape, "crop_time: window [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                ") outside " + shape_str(xv.shape()));
  }
  const std::size_t batch = xv.dim(0), full = xv.dim(1), ch = xv.dim(2);
  Tensor y({batch, len, ch});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    std::copy_n(xv.ptr() + (bi * full + start) * ch, len * ch, y.ptr() + bi * len * ch);
  }
  const std::size_t xid = x.id;
  return x.tape->record(std::move(y), "crop_time", {x}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(xid);
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const double* src = g.ptr() + bi * len * ch;
      double* dst = gx.ptr() + (bi * full + start) * ch;
      for (std::size_t i = 0; i < len * ch; ++i) dst[i] += src[i];
    }
  });
}

Var batchnorm1d(Var x, Var gamma, Var beta, BatchNormStats stats, Mode mode) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), feats = xv.cols();
  if (gamma.value().size() != feats || beta.value().size() != feats) {
    shape_error("batchnorm1d", xv.shape(), gamma.shape());
  }
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  std::vector<double> mean(feats, 0.0), inv_std(feats, 0.0);
  if (mode == Mode::kTrain) {
    if (rows < 2) fail(ErrorKind::kData, "batchnorm1d: degenerate batch of 1 row in train mode");
    std::vector<double> var(feats, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < feats; ++f) mean[f] += xv[r * feats + f];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < feats; ++f) {
        const double d = xv[r * feats + f] - mean[f];
        var[f] += d * d;
      }
    }
    for (std::size_t f = 0; f < feats; ++f) {
      var[f] /= static_cast<double>(rows);
      inv_std[f] = 1.0 / std::sqrt(var[f] + kBatchNormEps);
    }
    if (stats.running_mean && stats.running_var) {
      for (std::size_t f = 0; f < feats; ++f) {
        (*stats.running_mean)[f] = kBatchNormMomentum * (*stats.running_mean)[f] + (1.0 - kBatchNormMomentum) * mean[f];
        (*stats.running_var)[f] = kBatchNormMomentum * (*stats.running_var)[f] + (1.0 - kBatchNormMomentum) * var[f];
      }
    }
  } else {
    if (!stats.running_mean || !stats.running_var) {
      fail(ErrorKind::kUsage, "batchnorm1d: eval mode requires running statistics");
    }
    for (std::size_t f = 0; f < feats; ++f) {
      mean[f] = (*stats.running_mean)[f];
      inv_std[f] = 1.0 / std::sqrt((*stats.running_var)[f] + kBatchNormEps);
    }
  }
  Tensor xhat(xv.shape());
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < feats; ++f) {
      const std::size_t i = r * feats + f;
      xhat[i] = (xv[i] - mean[f]) * inv_std[f];
      y[i] = gv[f] * xhat[i] + bv[f];
    }
  }
  const std::size_t xid = x.id, gid = gamma.id, bid = beta.id;
  const bool train = mode == Mode::kTrain;
  return x.tape->record(
      std::move(y), "batchnorm1d", {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::vector<double> sum_g(feats, 0.0), sum_gx(feats, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t f = 0; f < feats; ++f) {
            sum_g[f] += g[r * feats + f];
            sum_gx[f] += g[r * feats + f] * xhat[r * feats + f];
          }
        }
        if (t.requires_grad(gid)) {
          Tensor& gg = t.grad(gid);
          for (std::size_t f = 0; f < feats; ++f) gg[f] += sum_gx[f];
        }
        if (t.requires_grad(bid)) {
          Tensor& gb = t.grad(bid);
          for (std::size_t f = 0; f < feats; ++f) gb[f] += sum_g[f];
        }
        if (t.requires_grad(xid)) {
          Tensor& gx = t.grad(xid);
          const Tensor& gv = t.value(gid);
          const double n = static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t f = 0; f < feats; ++f) {
              const std::size_t i = r * feats + f;
              if (train) {
                gx[i] += gv[f] * inv_std[f] / n * (n * g[i] - sum_g[f] - xhat[i] * sum_gx[f]);
              } else {
                gx[i] += gv[f] * inv_std[f] * g[i];
              }
            }
          }
        }
      });
}

Var softmax_xent(Var logits, const std::vector<int>& targets) {
  const Tensor& lv = logits.value();
  const std::size_t rows = lv.rows(), classes = lv.cols();
  if (targets.size() != rows) {
    fail(ErrorKind::kShape, "softmax_xent: " + std::to_string(targets.size()) + " targets for logits " +
                                shape_str(lv.shape()));
  }
  Tensor probs(lv.shape());
  double loss = 0.0;
  std::size_t valid = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int target = targets[r];
    if (target == kIgnoreIndex) continue;
    if (target < 0 || static_cast<std::size_t>(target) >= classes) {
      fail(ErrorKind::kData, "softmax_xent: target " + std::to_string(target) + " outside " +
                                 std::to_string(classes) + " classes");
    }
    const double* row = lv.ptr() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - lse);
    loss += lse - row[target];
    ++valid;
  }
  const double inv = valid ? 1.0 / static_cast<double>(valid) : 0.0;
  const std::size_t lid = logits.id;
  return logits.tape->record(
      Tensor::scalar(loss * inv), "softmax_xent", {logits},
      [lid, targets, probs = std::move(probs), classes, inv](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] * inv;
        Tensor& gl = t.grad(lid);
        for (std::size_t r = 0; r < targets.size(); ++r) {
          if (targets[r] == kIgnoreIndex) continue;
          for (std::size_t c = 0; c < classes; ++c) gl[r * classes + c] += g * probs[r * classes + c];
          gl[r * classes + targets[r]] -= g;
        }
      });
}

Var sigmoid_bce(Var logits, const Tensor& targets) {
  const Tensor& lv = logits.value();
  if (targets.shape() != lv.shape()) shape_error("sigmoid_bce", lv.shape(), targets.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    const double z = lv[i];
    loss += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::fabs(z)));
  }
  const double inv = 1.0 / static_cast<double>(lv.size());
  const std::size_t lid = logits.id;
  return logits.tape->record(Tensor::scalar(loss * inv), "sigmoid_bce", {logits},
                             [lid, targets, inv](Tape& t, std::size_t self) {
                               const double g = t.grad(self)[0] * inv;
                               Tensor& gl = t.grad(lid);
                               const Tensor& lv = t.value(lid);
                               for (std::size_t i = 0; i < lv.size(); ++i) {
                                 gl[i] += g * (stable_sigmoid(lv[i]) - targets[i]);
                               }
                             });
}

}  // namespace vcons::nn
