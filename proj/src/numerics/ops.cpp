#include "hypercaps/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace hypercaps::numerics {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
const Tensor<T>& upstream(Tape<T>& tape, std::size_t self) {
  return tape.node(self).grad;
}

template <typename T>
void require_rank2(const char* op, const Tensor<T>& t) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

template <typename T>
void require_single(const char* op, const Tensor<T>& s) {
  if (s.size() != 1) {
    throw DimensionError(std::string(op) + ": expected a single value, got shape " + shape_to_string(s.shape()));
  }
}

// outer × axis × inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename T, typename F, typename D>
Var<T> unary(const char* op, Var<T> x, F forward, D derivative_from_output) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  const std::size_t xid = x.id;
  return x.tape->record(op, std::move(out), {x}, [xid, derivative_from_output](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const auto& g = upstream(t, self);
    const auto& y = t.value(self);
    const auto& xin = t.value(xid);
    auto& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative_from_output(xin[i], y[i]);
  });
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(av.shape()) + " x " +
                         shape_to_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* o = out.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = av[i * k + kk];
      const T* br = bv.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
    }
  }
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record("matmul", std::move(out), {a, b}, [aid, bid, m, k, n](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    if (t.requires_grad(aid)) {
      const auto& bv = t.value(bid);
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < m; ++i) {
        const T* gr = g.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T* br = bv.data() + kk * n;
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += gr[j] * br[j];
          ga[i * k + kk] += acc;
        }
      }
    }
    if (t.requires_grad(bid)) {
      const auto& av = t.value(aid);
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < m; ++i) {
        const T* gr = g.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T aik = av[i * k + kk];
          T* gbr = gb.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbr[j] += aik * gr[j];
        }
      }
    }
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank2("matmul_nt", av);
  require_rank2("matmul_nt", bv);
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_to_string(av.shape()) + " x " +
                         shape_to_string(bv.shape()) + "^T");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = av.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* br = bv.data() + j * k;
      T acc = 0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += ar[kk] * br[kk];
      out[i * n + j] = acc;
    }
  }
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record("matmul_nt", std::move(out), {a, b}, [aid, bid, m, k, n](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    if (t.requires_grad(aid)) {
      const auto& bv = t.value(bid);
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < m; ++i) {
        T* gar = ga.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const T gij = g[i * n + j];
          const T* br = bv.data() + j * k;
          for (std::size_t kk = 0; kk < k; ++kk) gar[kk] += gij * br[kk];
        }
      }
    }
    if (t.requires_grad(bid)) {
      const auto& av = t.value(aid);
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < m; ++i) {
        const T* ar = av.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const T gij = g[i * n + j];
          T* gbr = gb.data() + j * k;
          for (std::size_t kk = 0; kk < k; ++kk) gbr[kk] += gij * ar[kk];
        }
      }
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a.value(), b.value());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record("add", std::move(out), {a, b}, [aid, bid](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    for (auto id : {aid, bid}) {
      if (!t.requires_grad(id)) continue;
      auto& gx = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record("sub", std::move(out), {a, b}, [aid, bid](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    if (t.requires_grad(aid)) {
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bid)) {
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> elementwise_mul(Var<T> a, Var<T> b) {
  require_same_shape("elementwise_mul", a.value(), b.value());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record("elementwise_mul", std::move(out), {a, b}, [aid, bid](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    if (t.requires_grad(aid)) {
      const auto& bv = t.value(bid);
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bid)) {
      const auto& av = t.value(aid);
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> affine(Var<T> a, T scale, T shift) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = scale * v + shift;
  const std::size_t aid = a.id;
  return a.tape->record("affine", std::move(out), {a}, [aid, scale](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(aid)) return;
    const auto& g = upstream(t, self);
    auto& ga = t.grad_buffer(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += scale * g[i];
  });
}

template <typename T>
Var<T> scale_by(Var<T> a, Var<T> s) {
  require_single("scale_by", s.value());
  const T sv = s.value()[0];
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= sv;
  const std::size_t aid = a.id, sid = s.id;
  return a.tape->record("scale_by", std::move(out), {a, s}, [aid, sid](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    if (t.requires_grad(aid)) {
      const T sv = t.value(sid)[0];
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += sv * g[i];
    }
    if (t.requires_grad(sid)) {
      const auto& av = t.value(aid);
      T acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad_buffer(sid)[0] += acc;
    }
  });
}

template <typename T>
Var<T> shift_by(Var<T> a, Var<T> s) {
  require_single("shift_by", s.value());
  const T sv = s.value()[0];
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v += sv;
  const std::size_t aid = a.id, sid = s.id;
  return a.tape->record("shift_by", std::move(out), {a, s}, [aid, sid](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    if (t.requires_grad(aid)) {
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(sid)) {
      T acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
      t.grad_buffer(sid)[0] += acc;
    }
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= 0) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> relu(Var<T> x) {
  return unary<T>(
      "relu", x, [](T v) { return v > 0 ? v : T{0}; }, [](T v, T) { return v > 0 ? T{1} : T{0}; });
}

template <typename T>
Var<T> square(Var<T> x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (T v : x.value().values()) acc += v;
  const std::size_t xid = x.id;
  return x.tape->record("sum", Tensor<T>::scalar(acc), {x}, [xid](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const T g = upstream(t, self)[0];
    for (auto& v : t.grad_buffer(xid).values()) v += g;
  });
}

template <typename T>
Var<T> dot(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() != bv.size()) {
    throw DimensionError("dot: size mismatch " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  }
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record("dot", Tensor<T>::scalar(acc), {a, b}, [aid, bid](Tape<T>& t, std::size_t self) {
    const T g = upstream(t, self)[0];
    if (t.requires_grad(aid)) {
      const auto& bv = t.value(bid);
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g * bv[i];
    }
    if (t.requires_grad(bid)) {
      const auto& av = t.value(aid);
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g * av[i];
    }
  });
}

template <typename T>
Var<T> l2_norm(Var<T> x) {
  T acc = 0;
  for (T v : x.value().values()) acc += v * v;
  const T norm = std::sqrt(acc);
  const std::size_t xid = x.id;
  return x.tape->record("l2_norm", Tensor<T>::scalar(norm), {x}, [xid](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const T n = t.value(self)[0];
    if (n == T{0}) return;
    const T g = upstream(t, self)[0];
    const auto& xv = t.value(xid);
    auto& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g * xv[i] / n;
  });
}

template <typename T>
Tensor<T> softmax_values(const Tensor<T>& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "softmax");
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = x[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, x[base + k * s.inner]);
      T total = 0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const T e = std::exp(x[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= total;
    }
  }
  return out;
}

template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  Tensor<T> out = softmax_values(x.value(), axis);
  const auto s = split_axis(x.shape(), axis, "softmax");
  const std::size_t xid = x.id;
  return x.tape->record("softmax", std::move(out), {x}, [xid, s](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const auto& g = upstream(t, self);
    const auto& y = t.value(self);
    auto& gx = t.grad_buffer(xid);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        T inner_product = 0;
        for (std::size_t k = 0; k < s.extent; ++k) inner_product += g[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t idx = base + k * s.inner;
          gx[idx] += y[idx] * (g[idx] - inner_product);
        }
      }
    }
  });
}

template <typename T>
Var<T> concat(Var<T> a, Var<T> b, std::size_t axis) {
  const auto& av = a.value();
  const auto& bv = b.value();
  bool compatible = av.rank() == bv.rank() && axis < av.rank();
  for (std::size_t i = 0; compatible && i < av.rank(); ++i) {
    if (i != axis && av.dim(i) != bv.dim(i)) compatible = false;
  }
  if (!compatible) {
    throw DimensionError("concat: cannot join " + shape_to_string(av.shape()) + " and " +
                         shape_to_string(bv.shape()) + " along axis " + std::to_string(axis));
  }
  const auto sa = split_axis(av.shape(), axis, "concat");
  const auto sb = split_axis(bv.shape(), axis, "concat");
  Shape shape = av.shape();
  shape[axis] += bv.dim(axis);
  Tensor<T> out(shape);
  const std::size_t a_block = sa.extent * sa.inner;
  const std::size_t b_block = sb.extent * sb.inner;
  for (std::size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(av.data() + o * a_block, a_block, out.data() + o * (a_block + b_block));
    std::copy_n(bv.data() + o * b_block, b_block, out.data() + o * (a_block + b_block) + a_block);
  }
  const std::size_t aid = a.id, bid = b.id, outer = sa.outer;
  return a.tape->record("concat", std::move(out), {a, b},
                        [aid, bid, outer, a_block, b_block](Tape<T>& t, std::size_t self) {
                          const auto& g = upstream(t, self);
                          if (t.requires_grad(aid)) {
                            auto& ga = t.grad_buffer(aid);
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t i = 0; i < a_block; ++i) ga[o * a_block + i] += g[o * (a_block + b_block) + i];
                          }
                          if (t.requires_grad(bid)) {
                            auto& gb = t.grad_buffer(bid);
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t i = 0; i < b_block; ++i)
                                gb[o * b_block + i] += g[o * (a_block + b_block) + a_block + i];
                          }
                        });
}

template <typename T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& xv = x.value();
  const auto s = split_axis(xv.shape(), axis, "slice");
  if (begin >= end || end > s.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of shape " + shape_to_string(xv.shape()));
  }
  Shape shape = xv.shape();
  shape[axis] = end - begin;
  Tensor<T> out(shape);
  const std::size_t block = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + o * s.extent * s.inner + begin * s.inner, block, out.data() + o * block);
  }
  const std::size_t xid = x.id;
  return x.tape->record("slice", std::move(out), {x}, [xid, s, begin, block](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const auto& g = upstream(t, self);
    auto& gx = t.grad_buffer(xid);
    for (std::size_t o = 0; o < s.outer; ++o) {
      T* dst = gx.data() + o * s.extent * s.inner + begin * s.inner;
      const T* src = g.data() + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var<T> element(Var<T> x, std::size_t index) {
  const auto& xv = x.value();
  if (index >= xv.size()) {
    throw DimensionError("element: index " + std::to_string(index) + " out of range for shape " +
                         shape_to_string(xv.shape()));
  }
  const std::size_t xid = x.id;
  return x.tape->record("element", Tensor<T>::scalar(xv[index]), {x}, [xid, index](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    t.grad_buffer(xid)[index] += upstream(t, self)[0];
  });
}

template <typename T>
Var<T> stack_rows(std::span<const Var<T>> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t n = rows.front().size();
  Tensor<T> out({rows.size(), n});
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& rv = rows[r].value();
    if (rv.size() != n) {
      throw DimensionError("stack_rows: row " + std::to_string(r) + " has shape " + shape_to_string(rv.shape()) +
                           ", expected " + std::to_string(n) + " values");
    }
    std::copy_n(rv.data(), n, out.data() + r * n);
    ids.push_back(rows[r].id);
  }
  std::vector<Var<T>> inputs(rows.begin(), rows.end());
  return rows.front().tape->record("stack_rows", std::move(out), inputs,
                                   [ids = std::move(ids), n](Tape<T>& t, std::size_t self) {
                                     const auto& g = upstream(t, self);
                                     for (std::size_t r = 0; r < ids.size(); ++r) {
                                       if (!t.requires_grad(ids[r])) continue;
                                       auto& gr = t.grad_buffer(ids[r]);
                                       for (std::size_t i = 0; i < n; ++i) gr[i] += g[r * n + i];
                                     }
                                   });
}

template <typename T>
Var<T> pack(std::span<const Var<T>> scalars, Shape shape) {
  if (scalars.empty() || shape_size(shape) != scalars.size()) {
    throw DimensionError("pack: " + std::to_string(scalars.size()) + " values cannot fill shape " +
                         shape_to_string(shape));
  }
  Tensor<T> out(std::move(shape));
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require_single("pack", scalars[i].value());
    out[i] = scalars[i].value()[0];
    ids.push_back(scalars[i].id);
  }
  std::vector<Var<T>> inputs(scalars.begin(), scalars.end());
  return scalars.front().tape->record("pack", std::move(out), inputs, [ids = std::move(ids)](Tape<T>& t, std::size_t self) {
    const auto& g = upstream(t, self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.requires_grad(ids[i])) t.grad_buffer(ids[i])[0] += g[i];
    }
  });
}

template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const std::size_t> ids) {
  const auto& tv = table.value();
  require_rank2("gather_rows", tv);
  if (ids.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t cols = tv.cols();
  Tensor<T> out({ids.size(), cols});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= tv.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(ids[r]) + " out of range for table " +
                           shape_to_string(tv.shape()));
    }
    std::copy_n(tv.data() + ids[r] * cols, cols, out.data() + r * cols);
  }
  const std::size_t tid = table.id;
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return table.tape->record("gather_rows", std::move(out), {table},
                            [tid, cols, rows = std::move(rows)](Tape<T>& t, std::size_t self) {
                              if (!t.requires_grad(tid)) return;
                              const auto& g = upstream(t, self);
                              if (t.sparse_rows(tid)) {
                                for (std::size_t r = 0; r < rows.size(); ++r) {
                                  auto& dst = t.row_grad_buffer(tid, rows[r]);
                                  for (std::size_t c = 0; c < cols; ++c) dst[c] += g[r * cols + c];
                                }
                              } else {
                                auto& gt = t.grad_buffer(tid);
                                for (std::size_t r = 0; r < rows.size(); ++r)
                                  for (std::size_t c = 0; c < cols; ++c) gt[rows[r] * cols + c] += g[r * cols + c];
                              }
                            });
}

#define HYPERCAPS_INSTANTIATE_OPS(T)                                                     \
  template Var<T> matmul(Var<T>, Var<T>);                                                \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                             \
  template Var<T> add(Var<T>, Var<T>);                                                   \
  template Var<T> sub(Var<T>, Var<T>);                                                   \
  template Var<T> elementwise_mul(Var<T>, Var<T>);                                       \
  template Var<T> affine(Var<T>, T, T);                                                  \
  template Var<T> scale_by(Var<T>, Var<T>);                                              \
  template Var<T> shift_by(Var<T>, Var<T>);                                              \
  template Var<T> sigmoid(Var<T>);                                                       \
  template Var<T> tanh(Var<T>);                                                          \
  template Var<T> relu(Var<T>);                                                          \
  template Var<T> square(Var<T>);                                                        \
  template Var<T> sum(Var<T>);                                                           \
  template Var<T> dot(Var<T>, Var<T>);                                                   \
  template Var<T> l2_norm(Var<T>);                                                       \
  template Var<T> softmax(Var<T>, std::size_t);                                          \
  template Var<T> concat(Var<T>, Var<T>, std::size_t);                                   \
  template Var<T> slice(Var<T>, std::size_t, std::size_t, std::size_t);                  \
  template Var<T> element(Var<T>, std::size_t);                                          \
  template Var<T> stack_rows(std::span<const Var<T>>);                                   \
  template Var<T> pack(std::span<const Var<T>>, Shape);                                  \
  template Var<T> gather_rows(Var<T>, std::span<const std::size_t>);                     \
  template Tensor<T> softmax_values(const Tensor<T>&, std::size_t);

HYPERCAPS_INSTANTIATE_OPS(float)
HYPERCAPS_INSTANTIATE_OPS(double)

}  // namespace hypercaps::numerics
