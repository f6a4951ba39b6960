// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major float64 tensors with a dynamically recorded graph for
// reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage and gradient,
// which is what parameter containers and the optimizer rely on. Use clone()
// for an independent deep copy.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace moe3d {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor;

namespace detail {

struct Node;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty when no gradient has been populated
  bool requires_grad = false;
  std::shared_ptr<Node> node;  // null for leaves
};

/// Backward closure: reads the output gradient and accumulates into inputs.
using BackwardFn = std::function<void(const TensorImpl& out, std::vector<Tensor>& inputs)>;

struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

}  // namespace detail

class Tensor {
 public:
  /// An empty handle; most operations reject it.
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const;
  /// Writable view of the values. Only meaningful for leaves (parameters,
  /// constants); mutating an interior node invalidates its saved graph.
  std::span<double> mutable_data();
  double at(std::size_t flat_index) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy of the values; the result is a leaf with the same requires_grad.
  Tensor clone() const;
  /// Same values as a new constant leaf (no graph, no grad).
  Tensor detach() const;

  /// Reverse pass from this scalar. Leaf gradients accumulate across calls.
  void backward() const;

  detail::TensorImpl& impl() const;
  const std::shared_ptr<detail::TensorImpl>& handle() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Records graph nodes only while enabled (default on, per thread).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

/// Builds an op result. A node is attached only when grad mode is on and at
/// least one input requires grad. Throws NumericError on non-finite output.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::string op, BackwardFn backward);

/// Gradient buffer of `t`, allocated (zeroed) on first use.
std::span<double> grad_buffer(const Tensor& t);

}  // namespace detail

/// The recorded computation graph reachable from a root, in topological
/// order (inputs before consumers).
struct Graph {
  struct Entry {
    std::string op;
    std::vector<std::size_t> inputs;  // positions within `entries`
    bool leaf = false;
  };
  std::vector<Entry> entries;

  static Graph trace(const Tensor& root);
  bool is_topological() const;
};

// ---------------------------------------------------------------------------
// Differentiable operations
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
/// x[N×C] + v broadcast over rows; v has C elements (rank 1 or 1×C).
Tensor add_rowvec(const Tensor& x, const Tensor& v);
Tensor softmax(const Tensor& x, int axis = -1);
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Column means of a rank-2 tensor, returned as 1×C.
Tensor mean_rows(const Tensor& x);
Tensor reshape(const Tensor& x, const Shape& shape);
/// out[i] = x[index[i]]; backward scatter-adds. Used for patch (un)flattening.
Tensor gather(const Tensor& x, std::span<const std::uint32_t> index, const Shape& shape);

}  // namespace moe3d
