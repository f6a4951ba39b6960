// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "moe3d/errors.hpp"

namespace moe3d {

namespace {

thread_local bool g_grad_enabled = true;

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

// c[m×n] += a[m×k] · b[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m×k] += g[m×n] · b[k×n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// c[k×n] += a[m×k]^T · g[m×n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_to_string(shape) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return from(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractError("access to undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::numel() const { return impl().data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::span<const double> Tensor::data() const { return impl().data; }
std::span<double> Tensor::mutable_data() { return impl().data; }

double Tensor::at(std::size_t flat_index) const {
  const auto& d = impl().data;
  if (flat_index >= d.size()) throw DimensionError("flat index out of range");
  return d[flat_index];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_to_string(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return impl().node == nullptr; }
bool Tensor::has_grad() const { return !impl().grad.empty(); }
std::span<const double> Tensor::grad() const { return impl().grad; }

void Tensor::zero_grad() { impl().grad.clear(); }

Tensor Tensor::clone() const {
  return from(shape(), impl().data, requires_grad());
}

Tensor Tensor::detach() const { return from(shape(), impl().data, false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::string op, BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(op + ": non-finite value produced");
  }
  Tensor out = Tensor::from(shape, std::move(values), false);
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  auto node = std::make_shared<Node>();
  node->op = std::move(op);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl().requires_grad = true;
  out.impl().node = std::move(node);
  return out;
}

std::span<double> grad_buffer(const Tensor& t) {
  auto& impl = t.impl();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

}  // namespace detail

namespace {

// Post-order DFS over nodes that require grad; iterative to survive deep graphs.
std::vector<detail::TensorImpl*> topo_order(const Tensor& root) {
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  struct Frame {
    detail::TensorImpl* impl;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({&root.impl(), 0});
  visited.insert(&root.impl());
  while (!stack.empty()) {
    Frame& f = stack.back();
    auto* node = f.impl->node.get();
    if (node && f.next < node->inputs.size()) {
      detail::TensorImpl* child = &node->inputs[f.next++].impl();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(f.impl);
    stack.pop_back();
  }
  return order;
}

}  // namespace

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_to_string(shape()));
  }
  if (!requires_grad()) throw ContractError("backward on a tensor that does not require grad");
  auto order = topo_order(*this);
  // Interior gradients are per-pass scratch; leaves accumulate.
  for (auto* impl : order) {
    if (impl->node) impl->grad.assign(impl->data.size(), 0.0);
  }
  auto& root = impl();
  if (root.grad.empty()) root.grad.assign(1, 0.0);
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* impl = *it;
    if (impl->node && impl->node->backward) impl->node->backward(*impl, impl->node->inputs);
  }
}

Graph Graph::trace(const Tensor& root) {
  Graph graph;
  std::vector<detail::TensorImpl*> order;
  if (root.requires_grad()) {
    order = topo_order(root);
  } else {
    order.push_back(&root.impl());
  }
  std::unordered_map<detail::TensorImpl*, std::size_t> position;
  for (auto* impl : order) {
    Entry e;
    e.leaf = impl->node == nullptr;
    e.op = e.leaf ? "leaf" : impl->node->op;
    if (impl->node) {
      for (auto& in : impl->node->inputs) {
        auto found = position.find(&in.impl());
        if (found != position.end()) e.inputs.push_back(found->second);
      }
    }
    position[impl] = graph.entries.size();
    graph.entries.push_back(std::move(e));
  }
  return graph;
}

bool Graph::is_topological() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (auto in : entries[i].inputs) {
      if (in >= i) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return detail::make_result(
      {m, n}, std::move(out), {a, b}, "matmul",
      [m, k, n](const detail::TensorImpl& o, std::vector<Tensor>& in) {
        if (in[0].requires_grad()) {
          gemm_nt(o.grad.data(), in[1].data().data(), detail::grad_buffer(in[0]).data(), m, n, k);
        }
        if (in[1].requires_grad()) {
          gemm_tn(in[0].data().data(), o.grad.data(), detail::grad_buffer(in[1]).data(), m, k, n);
        }
      });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto d = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
  return detail::make_result({c, r}, std::move(out), {a}, "transpose",
                             [r, c](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, "add",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               for (auto& t : in) {
                                 if (!t.requires_grad()) continue;
                                 auto g = detail::grad_buffer(t);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                               }
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, "sub",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               if (in[0].requires_grad()) {
                                 auto g = detail::grad_buffer(in[0]);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                               }
                               if (in[1].requires_grad()) {
                                 auto g = detail::grad_buffer(in[1]);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
                               }
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, "mul",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               if (in[0].requires_grad()) {
                                 auto g = detail::grad_buffer(in[0]);
                                 auto y = in[1].data();
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * y[i];
                               }
                               if (in[1].requires_grad()) {
                                 auto g = detail::grad_buffer(in[1]);
                                 auto x = in[0].data();
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * x[i];
                               }
                             });
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return detail::make_result(a.shape(), std::move(out), {a}, "scale",
                             [factor](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
                             });
}

Tensor add_scalar(const Tensor& a, double value) {
  require_defined(a, "add_scalar");
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + value;
  return detail::make_result(a.shape(), std::move(out), {a}, "add_scalar",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                             });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  require_rank2(x, "add_rowvec");
  require_defined(v, "add_rowvec");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (v.numel() != c || v.rank() > 2 || (v.rank() == 2 && v.dim(0) != 1)) {
    throw DimensionError("add_rowvec: cannot broadcast " + shape_to_string(v.shape()) + " over " +
                         shape_to_string(x.shape()));
  }
  std::vector<double> out(n * c);
  auto xd = x.data(), vd = v.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xd[i * c + j] + vd[j];
  return detail::make_result(x.shape(), std::move(out), {x, v}, "add_rowvec",
                             [n, c](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               if (in[0].requires_grad()) {
                                 auto g = detail::grad_buffer(in[0]);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                               }
                               if (in[1].requires_grad()) {
                                 auto g = detail::grad_buffer(in[1]);
                                 for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t j = 0; j < c; ++j) g[j] += o.grad[i * c + j];
                               }
                             });
}

Tensor softmax(const Tensor& x, int axis) {
  require_defined(x, "softmax");
  const auto& s = x.shape();
  const int rank = static_cast<int>(s.size());
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= s[i];
  for (int i = ax + 1; i < rank; ++i) inner *= s[i];
  const std::size_t k = s[ax];
  if (k == 0) throw DimensionError("softmax: empty axis");
  std::vector<double> out(x.numel());
  auto d = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * k * inner + i;
      double mx = d[base];
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, d[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double e = std::exp(d[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < k; ++j) out[base + j * inner] /= total;
    }
  }
  return detail::make_result(
      s, std::move(out), {x}, "softmax",
      [outer, inner, k](const detail::TensorImpl& o, std::vector<Tensor>& in) {
        auto g = detail::grad_buffer(in[0]);
        for (std::size_t a = 0; a < outer; ++a) {
          for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = a * k * inner + i;
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += o.grad[base + j * inner] * o.data[base + j * inner];
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t idx = base + j * inner;
              g[idx] += o.data[idx] * (o.grad[idx] - dot);
            }
          }
        }
      });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank2(x, "layernorm");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (c < 2) throw DimensionError("layernorm: needs at least 2 channels, got " + shape_to_string(x.shape()));
  if (gain.numel() != c || bias.numel() != c) {
    throw DimensionError("layernorm: gain/bias " + shape_to_string(gain.shape()) + "/" +
                         shape_to_string(bias.shape()) + " do not match " + shape_to_string(x.shape()));
  }
  std::vector<double> out(n * c), xhat(n * c), inv_std(n);
  auto d = x.data(), gd = gain.data(), bd = bias.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = d.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * c + j] = h;
      out[r * c + j] = gd[j] * h + bd[j];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x, gain, bias}, "layernorm",
      [n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](const detail::TensorImpl& o,
                                                                   std::vector<Tensor>& in) {
        auto gd = in[1].data();
        if (in[0].requires_grad()) {
          auto g = detail::grad_buffer(in[0]);
          const double cn = static_cast<double>(c);
          for (std::size_t r = 0; r < n; ++r) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = o.grad[r * c + j] * gd[j];
              sum_dh += dh;
              sum_dh_h += dh * xhat[r * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = o.grad[r * c + j] * gd[j];
              g[r * c + j] += inv_std[r] / cn * (cn * dh - sum_dh - xhat[r * c + j] * sum_dh_h);
            }
          }
        }
        if (in[1].requires_grad()) {
          auto g = detail::grad_buffer(in[1]);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < c; ++j) g[j] += o.grad[r * c + j] * xhat[r * c + j];
        }
        if (in[2].requires_grad()) {
          auto g = detail::grad_buffer(in[2]);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < c; ++j) g[j] += o.grad[r * c + j];
        }
      });
}

Tensor gelu(const Tensor& x) {
  require_defined(x, "gelu");
  std::vector<double> out(x.numel());
  auto d = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * d[i] * (1.0 + std::erf(d[i] * std::numbers::sqrt2 / 2.0));
  }
  return detail::make_result(x.shape(), std::move(out), {x}, "gelu",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               auto d = in[0].data();
                               const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 const double cdf = 0.5 * (1.0 + std::erf(d[i] * std::numbers::sqrt2 / 2.0));
                                 const double pdf = inv_sqrt_2pi * std::exp(-0.5 * d[i] * d[i]);
                                 g[i] += o.grad[i] * (cdf + d[i] * pdf);
                               }
                             });
}

Tensor sigmoid(const Tensor& x) {
  require_defined(x, "sigmoid");
  std::vector<double> out(x.numel());
  auto d = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = d[i];
    if (v >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x}, "sigmoid",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 g[i] += o.grad[i] * o.data[i] * (1.0 - o.data[i]);
                               }
                             });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result({1}, {total}, {x}, "sum",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (auto& v : g) v += o.grad[0];
                             });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  double total = 0.0;
  for (double v : x.data()) total += v;
  const double n = static_cast<double>(x.numel());
  return detail::make_result({1}, {total / n}, {x}, "mean",
                             [n](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (auto& v : g) v += o.grad[0] / n;
                             });
}

Tensor mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(c, 0.0);
  auto d = x.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += d[i * c + j];
  for (auto& v : out) v /= static_cast<double>(n);
  return detail::make_result({1, c}, std::move(out), {x}, "mean_rows",
                             [n, c](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               const double inv = 1.0 / static_cast<double>(n);
                               for (std::size_t i = 0; i < n; ++i)
                                 for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j] * inv;
                             });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_to_string(x.shape()) + " -> " + shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result(shape, std::move(out), {x}, "reshape",
                             [](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                             });
}

Tensor gather(const Tensor& x, std::span<const std::uint32_t> index, const Shape& shape) {
  require_defined(x, "gather");
  if (shape_numel(shape) != index.size()) {
    throw DimensionError("gather: index count " + std::to_string(index.size()) +
                         " does not match shape " + shape_to_string(shape));
  }
  const std::size_t n = x.numel();
  std::vector<double> out(index.size());
  auto d = x.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw DimensionError("gather: index out of range");
    out[i] = d[index[i]];
  }
  std::vector<std::uint32_t> saved(index.begin(), index.end());
  return detail::make_result(shape, std::move(out), {x}, "gather",
                             [saved = std::move(saved)](const detail::TensorImpl& o,
                                                        std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t i = 0; i < saved.size(); ++i) g[saved[i]] += o.grad[i];
                             });
}

}  // namespace moe3d
