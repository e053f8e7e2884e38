// tensorgrad.cpp

// Copyright 2026  The SeganForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "seganforge/tensorgrad.h"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <unordered_set>

extern "C" void openblas_set_num_threads(int);

namespace seganforge {
namespace tg {

namespace {

// BLAS runs single-threaded inside each call; parallelism happens one level
// up, over output-disjoint partitions, so results do not depend on the
// thread count.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit g_blas_init;

std::atomic<bool> g_finite_checks{true};

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int64_t m, int64_t n,
          int64_t k, float alpha, const float* a, int64_t lda, const float* b,
          int64_t ldb, float beta, float* c, int64_t ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, int(m), int(n), int(k), alpha, a, int(lda),
              b, int(ldb), beta, c, int(ldc));
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int64_t m, int64_t n,
          int64_t k, double alpha, const double* a, int64_t lda,
          const double* b, int64_t ldb, double beta, double* c, int64_t ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, int(m), int(n), int(k), alpha, a, int(lda),
              b, int(ldb), beta, c, int(ldc));
}

// Valid output range [t_lo, t_hi) for source index t*stride + k - pad within
// [0, src_len).
void valid_range(int64_t k, int64_t pad, int64_t stride, int64_t src_len,
                 int64_t out_len, int64_t* t_lo, int64_t* t_hi) {
  int64_t lo = 0;
  if (pad - k > 0) lo = (pad - k + stride - 1) / stride;
  int64_t hi = out_len;
  int64_t limit = src_len - k + pad;  // need t*stride < limit
  if (limit <= 0) {
    hi = lo;
  } else {
    hi = std::min(hi, (limit + stride - 1) / stride);
  }
  if (hi < lo) hi = lo;
  *t_lo = lo;
  *t_hi = hi;
}

// x: [C, L] -> cols: [C*K, out_len], cols[c*K+k, t] = x[c, t*stride + k - pad]
template <typename T>
void im2col(const T* x, int64_t channels, int64_t src_len, int64_t kernel,
            int64_t stride, int64_t pad, int64_t out_len, T* cols) {
  for (int64_t c = 0; c < channels; ++c) {
    const T* xc = x + c * src_len;
    for (int64_t k = 0; k < kernel; ++k) {
      T* row = cols + (c * kernel + k) * out_len;
      int64_t t_lo, t_hi;
      valid_range(k, pad, stride, src_len, out_len, &t_lo, &t_hi);
      std::fill(row, row + t_lo, T(0));
      int64_t src = t_lo * stride + k - pad;
      for (int64_t t = t_lo; t < t_hi; ++t, src += stride) row[t] = xc[src];
      std::fill(row + t_hi, row + out_len, T(0));
    }
  }
}

// Accumulating inverse of im2col: x[c, t*stride + k - pad] += cols[c*K+k, t].
template <typename T>
void col2im_add(const T* cols, int64_t channels, int64_t dst_len,
                int64_t kernel, int64_t stride, int64_t pad, int64_t col_len,
                T* x) {
  for (int64_t c = 0; c < channels; ++c) {
    T* xc = x + c * dst_len;
    for (int64_t k = 0; k < kernel; ++k) {
      const T* row = cols + (c * kernel + k) * col_len;
      int64_t t_lo, t_hi;
      valid_range(k, pad, stride, dst_len, col_len, &t_lo, &t_hi);
      int64_t dst = t_lo * stride + k - pad;
      for (int64_t t = t_lo; t < t_hi; ++t, dst += stride) xc[dst] += row[t];
    }
  }
}

template <typename T>
void check_finite(const char* op, const std::vector<T>& v) {
  if (!g_finite_checks.load(std::memory_order_relaxed)) return;
  for (const T& x : v) {
    if (!std::isfinite(double(x)))
      raise(strprintf("non-finite value produced by op \"%s\"", op));
  }
}

template <typename T>
std::shared_ptr<Node<T>> make_node(const char* op, Shape shape,
                                   std::vector<std::shared_ptr<Node<T>>> parents) {
  auto n = std::make_shared<Node<T>>();
  n->op = op;
  n->shape = std::move(shape);
  n->values.resize(size_t(shape_numel(n->shape)));
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  return n;
}

template <typename T>
void ensure_grad(Node<T>& n) {
  if (n.grad.size() != n.values.size()) n.grad.assign(n.values.size(), T(0));
}

// Blocks the batch so transient im2col buffers stay within a memory budget.
int64_t batch_block(int64_t per_item_floats) {
  constexpr int64_t kBudgetFloats = int64_t(64) << 20;  // 256 MB of float32
  int64_t block = per_item_floats > 0 ? kBudgetFloats / per_item_floats : 1;
  return std::max<int64_t>(1, block);
}

}  // namespace

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) raise("shape dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void set_finite_checks(bool enabled) {
  g_finite_checks.store(enabled, std::memory_order_relaxed);
}

bool finite_checks_enabled() {
  return g_finite_checks.load(std::memory_order_relaxed);
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->shape = shape;
  n->values.assign(size_t(shape_numel(shape)), T(0));
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return Tensor<T>(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  Tensor<T> t = zeros(shape, requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from_values(const Shape& shape, std::vector<T> values,
                                 bool requires_grad) {
  if (int64_t(values.size()) != shape_numel(shape))
    raise(strprintf("from_values: %zu values for shape %s", values.size(),
                    shape_str(shape).c_str()));
  Tensor<T> t = zeros(shape, requires_grad);
  t.values() = std::move(values);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return from_values({1}, {value});
}

template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
  if (node_->grad.empty())
    raise(strprintf("tensor (op %s) has no gradient", node_->op));
  return node_->grad;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1)
    raise("item() requires a scalar tensor, shape is " + shape_str(shape()));
  return node_->values[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor<T> t = zeros(shape(), false);
  t.values() = values();
  return t;
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1)
    raise("backward() requires a scalar root, shape is " + shape_str(shape()));
  if (!node_->needs_grad)
    raise("backward() on a graph without trainable leaves");

  // Post-order over parents puts every node after its graph ancestors; the
  // reversed order therefore runs each node only once all of its consumers
  // have contributed to its gradient.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  struct Frame {
    Node<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node<T>* p = f.node->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order)
    if (n->needs_grad) {
      ensure_grad(*n);
      std::fill(n->grad.begin(), n->grad.end(), T(0));
    }
  node_->grad[0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->needs_grad && n->backward_fn) n->backward_fn();
  }

  if (finite_checks_enabled()) {
    for (Node<T>* n : order)
      if (n->needs_grad) check_finite((std::string(n->op) + ".grad").c_str(), n->grad);
  }
}

// ---------------------------------------------------------------------------
// conv1d

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int64_t stride, int64_t pad) {
  if (x.shape().size() != 3 || w.shape().size() != 3 || bias.shape().size() != 1)
    raise("conv1d: expected x[B,Cin,L], w[Cout,Cin,K], bias[Cout]");
  const int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const int64_t cout = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != cin)
    raise(strprintf("conv1d: weight Cin %lld != input Cin %lld",
                    (long long)w.dim(1), (long long)cin));
  if (bias.dim(0) != cout) raise("conv1d: bias size mismatch");
  if (stride < 1) raise("conv1d: stride must be >= 1");
  if (pad < 0) raise("conv1d: pad must be >= 0");
  if (kernel > len + 2 * pad)
    raise(strprintf("conv1d: kernel %lld exceeds padded input %lld",
                    (long long)kernel, (long long)(len + 2 * pad)));
  const int64_t lout = (len + 2 * pad - kernel) / stride + 1;

  auto node = make_node<T>("conv1d", {batch, cout, lout},
                           {x.node(), w.node(), bias.node()});
  const int64_t ck = cin * kernel;
  {
    const T* xv = x.values().data();
    const T* wv = w.values().data();
    const T* bv = bias.values().data();
    T* yv = node->values.data();
    parallel_for(0, batch, [&](int64_t b0, int64_t b1) {
      std::vector<T> cols(size_t(ck * lout));
      for (int64_t b = b0; b < b1; ++b) {
        im2col(xv + b * cin * len, cin, len, kernel, stride, pad, lout,
               cols.data());
        T* yb = yv + b * cout * lout;
        gemm(CblasNoTrans, CblasNoTrans, cout, lout, ck, T(1), wv, ck,
             cols.data(), lout, T(0), yb, lout);
        for (int64_t co = 0; co < cout; ++co) {
          T bval = bv[co];
          T* row = yb + co * lout;
          for (int64_t t = 0; t < lout; ++t) row[t] += bval;
        }
      }
    });
  }
  check_finite("conv1d", node->values);

  Node<T>* self = node.get();
  auto xn = x.node(), wn = w.node(), bn = bias.node();
  node->backward_fn = [self, xn, wn, bn, batch, cin, len, cout, kernel, stride,
                       pad, lout, ck]() {
    const T* dy = self->grad.data();
    const T* wv = wn->values.data();
    const T* xv = xn->values.data();

    if (xn->needs_grad) {
      T* dx = xn->grad.data();
      parallel_for(0, batch, [&](int64_t b0, int64_t b1) {
        std::vector<T> dcols(size_t(ck * lout));
        for (int64_t b = b0; b < b1; ++b) {
          gemm(CblasTrans, CblasNoTrans, ck, lout, cout, T(1), wv, ck,
               dy + b * cout * lout, lout, T(0), dcols.data(), lout);
          col2im_add(dcols.data(), cin, len, kernel, stride, pad, lout,
                     dx + b * cin * len);
        }
      });
    }

    if (wn->needs_grad) {
      // Weight gradients are accumulated over the batch in ascending order,
      // with each thread owning a disjoint slice of output rows.
      T* dw = wn->grad.data();
      int64_t block = batch_block(ck * lout);
      std::vector<T> cols_all(size_t(std::min(block, batch) * ck * lout));
      for (int64_t base = 0; base < batch; base += block) {
        int64_t bn_hi = std::min(batch, base + block);
        parallel_for(base, bn_hi, [&](int64_t b0, int64_t b1) {
          for (int64_t b = b0; b < b1; ++b)
            im2col(xv + b * cin * len, cin, len, kernel, stride, pad, lout,
                   cols_all.data() + (b - base) * ck * lout);
        });
        parallel_for(0, cout, [&](int64_t c0, int64_t c1) {
          for (int64_t b = base; b < bn_hi; ++b) {
            gemm(CblasNoTrans, CblasTrans, c1 - c0, ck, lout, T(1),
                 dy + b * cout * lout + c0 * lout, lout,
                 cols_all.data() + (b - base) * ck * lout, lout, T(1),
                 dw + c0 * ck, ck);
          }
        });
      }
    }

    if (bn->needs_grad) {
      T* db = bn->grad.data();
      parallel_for(0, cout, [&](int64_t c0, int64_t c1) {
        for (int64_t co = c0; co < c1; ++co) {
          double acc = 0.0;
          for (int64_t b = 0; b < batch; ++b) {
            const T* row = dy + (b * cout + co) * lout;
            for (int64_t t = 0; t < lout; ++t) acc += double(row[t]);
          }
          db[co] += T(acc);
        }
      });
    }
  };
  return Tensor<T>(std::move(node));
}

// ---------------------------------------------------------------------------
// conv_transpose1d

template <typename T>
Tensor<T> conv_transpose1d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias, int64_t stride, int64_t pad,
                           int64_t output_padding) {
  if (x.shape().size() != 3 || w.shape().size() != 3 || bias.shape().size() != 1)
    raise("conv_transpose1d: expected x[B,Cin,L], w[Cin,Cout,K], bias[Cout]");
  const int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const int64_t cout = w.dim(1), kernel = w.dim(2);
  if (w.dim(0) != cin)
    raise(strprintf("conv_transpose1d: weight Cin %lld != input Cin %lld",
                    (long long)w.dim(0), (long long)cin));
  if (bias.dim(0) != cout) raise("conv_transpose1d: bias size mismatch");
  if (stride < 1) raise("conv_transpose1d: stride must be >= 1");
  if (pad < 0) raise("conv_transpose1d: pad must be >= 0");
  if (output_padding < 0 || output_padding >= stride)
    raise("conv_transpose1d: output_padding must be in [0, stride)");
  const int64_t lout = (len - 1) * stride - 2 * pad + kernel + output_padding;
  if (lout < 1) raise("conv_transpose1d: non-positive output length");

  auto node = make_node<T>("conv_transpose1d", {batch, cout, lout},
                           {x.node(), w.node(), bias.node()});
  const int64_t ck = cout * kernel;
  {
    const T* xv = x.values().data();
    const T* wv = w.values().data();  // [Cin, Cout*K] row-major
    const T* bv = bias.values().data();
    T* yv = node->values.data();
    parallel_for(0, batch, [&](int64_t b0, int64_t b1) {
      std::vector<T> cols(size_t(ck * len));
      for (int64_t b = b0; b < b1; ++b) {
        gemm(CblasTrans, CblasNoTrans, ck, len, cin, T(1), wv, ck,
             xv + b * cin * len, len, T(0), cols.data(), len);
        T* yb = yv + b * cout * lout;
        for (int64_t co = 0; co < cout; ++co)
          std::fill(yb + co * lout, yb + (co + 1) * lout, bv[co]);
        // Scatter: y[co, t*stride + k - pad] += cols[co*K + k, t].
        for (int64_t co = 0; co < cout; ++co) {
          T* yrow = yb + co * lout;
          for (int64_t k = 0; k < kernel; ++k) {
            const T* crow = cols.data() + (co * kernel + k) * len;
            int64_t t_lo, t_hi;
            valid_range(k, pad, stride, lout, len, &t_lo, &t_hi);
            int64_t dst = t_lo * stride + k - pad;
            for (int64_t t = t_lo; t < t_hi; ++t, dst += stride)
              yrow[dst] += crow[t];
          }
        }
      }
    });
  }
  check_finite("conv_transpose1d", node->values);

  Node<T>* self = node.get();
  auto xn = x.node(), wn = w.node(), bn = bias.node();
  node->backward_fn = [self, xn, wn, bn, batch, cin, len, cout, kernel, stride,
                       pad, lout, ck]() {
    const T* dy = self->grad.data();
    const T* wv = wn->values.data();
    const T* xv = xn->values.data();

    if (xn->needs_grad) {
      T* dx = xn->grad.data();
      parallel_for(0, batch, [&](int64_t b0, int64_t b1) {
        std::vector<T> dcols(size_t(ck * len));
        for (int64_t b = b0; b < b1; ++b) {
          im2col(dy + b * cout * lout, cout, lout, kernel, stride, pad, len,
                 dcols.data());
          gemm(CblasNoTrans, CblasNoTrans, cin, len, ck, T(1), wv, ck,
               dcols.data(), len, T(1), dx + b * cin * len, len);
        }
      });
    }

    if (wn->needs_grad) {
      T* dw = wn->grad.data();
      int64_t block = batch_block(ck * len);
      std::vector<T> dcols_all(size_t(std::min(block, batch) * ck * len));
      for (int64_t base = 0; base < batch; base += block) {
        int64_t b_hi = std::min(batch, base + block);
        parallel_for(base, b_hi, [&](int64_t b0, int64_t b1) {
          for (int64_t b = b0; b < b1; ++b)
            im2col(dy + b * cout * lout, cout, lout, kernel, stride, pad, len,
                   dcols_all.data() + (b - base) * ck * len);
        });
        parallel_for(0, cin, [&](int64_t c0, int64_t c1) {
          for (int64_t b = base; b < b_hi; ++b) {
            gemm(CblasNoTrans, CblasTrans, c1 - c0, ck, len, T(1),
                 xv + b * cin * len + c0 * len, len,
                 dcols_all.data() + (b - base) * ck * len, len, T(1),
                 dw + c0 * ck, ck);
          }
        });
      }
    }

    if (bn->needs_grad) {
      T* db = bn->grad.data();
      parallel_for(0, cout, [&](int64_t c0, int64_t c1) {
        for (int64_t co = c0; co < c1; ++co) {
          double acc = 0.0;
          for (int64_t b = 0; b < batch; ++b) {
            const T* row = dy + (b * cout + co) * lout;
            for (int64_t t = 0; t < lout; ++t) acc += double(row[t]);
          }
          db[co] += T(acc);
        }
      });
    }
  };
  return Tensor<T>(std::move(node));
}

// ---------------------------------------------------------------------------
// elementwise ops

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha) {
  if (x.shape().size() != 3) raise("prelu: expected x[B,C,L]");
  const int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (alpha.shape().size() != 1 || alpha.dim(0) != channels)
    raise("prelu: alpha must have one slope per channel");

  auto node = make_node<T>("prelu", x.shape(), {x.node(), alpha.node()});
  const T* xv = x.values().data();
  const T* av = alpha.values().data();
  T* yv = node->values.data();
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < channels; ++c) {
      const T a = av[c];
      const T* xr = xv + (b * channels + c) * len;
      T* yr = yv + (b * channels + c) * len;
      for (int64_t i = 0; i < len; ++i) yr[i] = xr[i] > T(0) ? xr[i] : a * xr[i];
    }
  check_finite("prelu", node->values);

  Node<T>* self = node.get();
  auto xn = x.node(), an = alpha.node();
  node->backward_fn = [self, xn, an, batch, channels, len]() {
    const T* dy = self->grad.data();
    const T* xv = xn->values.data();
    const T* av = an->values.data();
    if (xn->needs_grad) {
      T* dx = xn->grad.data();
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t c = 0; c < channels; ++c) {
          const T a = av[c];
          int64_t off = (b * channels + c) * len;
          for (int64_t i = 0; i < len; ++i)
            dx[off + i] += dy[off + i] * (xv[off + i] > T(0) ? T(1) : a);
        }
    }
    if (an->needs_grad) {
      T* da = an->grad.data();
      for (int64_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int64_t b = 0; b < batch; ++b) {
          int64_t off = (b * channels + c) * len;
          for (int64_t i = 0; i < len; ++i)
            if (xv[off + i] <= T(0)) acc += double(dy[off + i]) * double(xv[off + i]);
        }
        da[c] += T(acc);
      }
    }
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  auto node = make_node<T>("leaky_relu", x.shape(), {x.node()});
  const T* xv = x.values().data();
  T* yv = node->values.data();
  const size_t n = x.values().size();
  for (size_t i = 0; i < n; ++i) yv[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  check_finite("leaky_relu", node->values);

  Node<T>* self = node.get();
  auto xn = x.node();
  node->backward_fn = [self, xn, slope, n]() {
    if (!xn->needs_grad) return;
    const T* dy = self->grad.data();
    const T* xv = xn->values.data();
    T* dx = xn->grad.data();
    for (size_t i = 0; i < n; ++i)
      dx[i] += dy[i] * (xv[i] > T(0) ? T(1) : slope);
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  auto node = make_node<T>("tanh", x.shape(), {x.node()});
  const T* xv = x.values().data();
  T* yv = node->values.data();
  const size_t n = x.values().size();
  for (size_t i = 0; i < n; ++i) yv[i] = T(std::tanh(double(xv[i])));
  check_finite("tanh", node->values);

  Node<T>* self = node.get();
  auto xn = x.node();
  node->backward_fn = [self, xn, n]() {
    if (!xn->needs_grad) return;
    const T* dy = self->grad.data();
    const T* yv = self->values.data();
    T* dx = xn->grad.data();
    for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - yv[i] * yv[i]);
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().size() != 3 || b.shape().size() != 3)
    raise("concat_channels: expected rank-3 tensors");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2))
    raise(strprintf("concat_channels: batch/length mismatch %s vs %s",
                    shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  const int64_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), len = a.dim(2);

  auto node = make_node<T>("concat_channels", {batch, ca + cb, len},
                           {a.node(), b.node()});
  const T* avv = a.values().data();
  const T* bvv = b.values().data();
  T* yv = node->values.data();
  for (int64_t i = 0; i < batch; ++i) {
    std::memcpy(yv + i * (ca + cb) * len, avv + i * ca * len,
                size_t(ca * len) * sizeof(T));
    std::memcpy(yv + i * (ca + cb) * len + ca * len, bvv + i * cb * len,
                size_t(cb * len) * sizeof(T));
  }

  Node<T>* self = node.get();
  auto an = a.node(), bn = b.node();
  node->backward_fn = [self, an, bn, batch, ca, cb, len]() {
    const T* dy = self->grad.data();
    for (int64_t i = 0; i < batch; ++i) {
      if (an->needs_grad) {
        T* da = an->grad.data() + i * ca * len;
        const T* src = dy + i * (ca + cb) * len;
        for (int64_t j = 0; j < ca * len; ++j) da[j] += src[j];
      }
      if (bn->needs_grad) {
        T* db = bn->grad.data() + i * cb * len;
        const T* src = dy + i * (ca + cb) * len + ca * len;
        for (int64_t j = 0; j < cb * len; ++j) db[j] += src[j];
      }
    }
  };
  return Tensor<T>(std::move(node));
}

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    raise(strprintf("%s: shape mismatch %s vs %s", op,
                    shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
}

}  // namespace

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("l1_loss", a, b);
  auto node = make_node<T>("l1_loss", {1}, {a.node(), b.node()});
  const size_t n = a.values().size();
  const T* av = a.values().data();
  const T* bv = b.values().data();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += std::abs(double(av[i]) - double(bv[i]));
  node->values[0] = T(acc / double(n));
  check_finite("l1_loss", node->values);

  Node<T>* self = node.get();
  auto an = a.node(), bn = b.node();
  node->backward_fn = [self, an, bn, n]() {
    const T g = self->grad[0] / T(double(n));
    const T* av = an->values.data();
    const T* bv = bn->values.data();
    for (size_t i = 0; i < n; ++i) {
      T d = av[i] - bv[i];
      T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (an->needs_grad) an->grad[i] += s;
      if (bn->needs_grad) bn->grad[i] -= s;
    }
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mse_loss", a, b);
  auto node = make_node<T>("mse_loss", {1}, {a.node(), b.node()});
  const size_t n = a.values().size();
  const T* av = a.values().data();
  const T* bv = b.values().data();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = double(av[i]) - double(bv[i]);
    acc += d * d;
  }
  node->values[0] = T(acc / double(n));
  check_finite("mse_loss", node->values);

  Node<T>* self = node.get();
  auto an = a.node(), bn = b.node();
  node->backward_fn = [self, an, bn, n]() {
    const T g = self->grad[0] * T(2.0 / double(n));
    const T* av = an->values.data();
    const T* bv = bn->values.data();
    for (size_t i = 0; i < n; ++i) {
      T d = (av[i] - bv[i]) * g;
      if (an->needs_grad) an->grad[i] += d;
      if (bn->needs_grad) bn->grad[i] -= d;
    }
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  auto node = make_node<T>("add", a.shape(), {a.node(), b.node()});
  const size_t n = a.values().size();
  for (size_t i = 0; i < n; ++i)
    node->values[i] = a.values()[i] + b.values()[i];
  check_finite("add", node->values);

  Node<T>* self = node.get();
  auto an = a.node(), bn = b.node();
  node->backward_fn = [self, an, bn, n]() {
    const T* dy = self->grad.data();
    if (an->needs_grad)
      for (size_t i = 0; i < n; ++i) an->grad[i] += dy[i];
    if (bn->needs_grad)
      for (size_t i = 0; i < n; ++i) bn->grad[i] += dy[i];
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  auto node = make_node<T>("scale", x.shape(), {x.node()});
  const size_t n = x.values().size();
  for (size_t i = 0; i < n; ++i) node->values[i] = factor * x.values()[i];
  check_finite("scale", node->values);

  Node<T>* self = node.get();
  auto xn = x.node();
  node->backward_fn = [self, xn, factor, n]() {
    if (!xn->needs_grad) return;
    const T* dy = self->grad.data();
    for (size_t i = 0; i < n; ++i) xn->grad[i] += factor * dy[i];
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel())
    raise(strprintf("reshape: %lld elements cannot view as %s",
                    (long long)x.numel(), shape_str(shape).c_str()));
  auto node = make_node<T>("reshape", shape, {x.node()});
  node->values = x.values();

  Node<T>* self = node.get();
  auto xn = x.node();
  node->backward_fn = [self, xn]() {
    if (!xn->needs_grad) return;
    for (size_t i = 0; i < self->grad.size(); ++i)
      xn->grad[i] += self->grad[i];
  };
  return Tensor<T>(std::move(node));
}

template <typename T>
void rmsprop_step(const std::vector<Parameter<T>*>& params,
                  const RmspropOptions& opt) {
  for (Parameter<T>* p : params) {
    auto& node = *p->tensor.node();
    if (node.grad.size() != node.values.size())
      raise("rmsprop_step: parameter \"" + p->name + "\" has no gradient");
    if (p->rms.size() != node.values.size())
      p->rms.assign(node.values.size(), T(0));
    for (size_t i = 0; i < node.values.size(); ++i) {
      double g = double(node.grad[i]);
      double s = opt.decay * double(p->rms[i]) + (1.0 - opt.decay) * g * g;
      p->rms[i] = T(s);
      node.values[i] =
          T(double(node.values[i]) - opt.lr * g / (std::sqrt(s) + opt.eps));
    }
    std::fill(node.grad.begin(), node.grad.end(), T(0));
  }
}

// Explicit instantiations: float32 production path and float64 shadow.
template class Tensor<float>;
template class Tensor<double>;

#define SEGANFORGE_INSTANTIATE(T)                                              \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&,               \
                            const Tensor<T>&, int64_t, int64_t);              \
  template Tensor<T> conv_transpose1d(const Tensor<T>&, const Tensor<T>&,     \
                                      const Tensor<T>&, int64_t, int64_t,     \
                                      int64_t);                               \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                         \
  template Tensor<T> tanh(const Tensor<T>&);                                  \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> scale(const Tensor<T>&, T);                              \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                 \
  template void rmsprop_step(const std::vector<Parameter<T>*>&,               \
                             const RmspropOptions&);

SEGANFORGE_INSTANTIATE(float)
SEGANFORGE_INSTANTIATE(double)
#undef SEGANFORGE_INSTANTIATE

}  // namespace tg
}  // namespace seganforge
