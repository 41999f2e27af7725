#pragma once

// Dense row-major tensors with a reverse-mode autodiff graph.
//
// A Tensor<T> is a cheap handle to a shared Node. Ops that see at least one
// input with requires_grad (and grad mode enabled) record their parents and
// an adjoint closure on the result node; backward() walks the recorded graph
// in reverse topological order. Precision is the template parameter, so two
// precisions can never meet in one graph.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ffino {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

/// Thread-local switch; when disabled, ops never build graph nodes.
class GradMode {
 public:
  static bool enabled() { return flag(); }
  static void set_enabled(bool on) { flag() = on; }

 private:
  static bool& flag() {
    thread_local bool on = true;
    return on;
  }
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool complex = false;  // value holds interleaved (re, im) pairs
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  bool is_leaf() const { return parents.empty(); }

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " needs " +
                                  std::to_string(shape_numel(shape)) + " values, got " +
                                  std::to_string(values.size()));
    }
    for (std::size_t d : shape) {
      if (d == 0) throw std::invalid_argument("Tensor: zero-length axis in shape " + shape_str(shape));
    }
    node_ = std::make_shared<Node<T>>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor full(const Shape& shape, T fill, bool requires_grad = false) {
    return Tensor(shape, std::vector<T>(shape_numel(shape), fill), requires_grad);
  }
  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    return full(shape, T(0), requires_grad);
  }
  static Tensor ones(const Shape& shape, bool requires_grad = false) {
    return full(shape, T(1), requires_grad);
  }
  static Tensor scalar(T v, bool requires_grad = false) { return Tensor({1}, {v}, requires_grad); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  /// Direct write access; meant for leaves (parameter updates, initialization).
  std::span<T> mutable_data() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  T item() const {
    if (size() != 1) throw std::invalid_argument("item(): tensor has shape " + shape_str(shape()));
    return node_->value[0];
  }
  T operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    if (!node_->is_leaf()) throw std::logic_error("set_requires_grad: only valid on leaf tensors");
    node_->requires_grad = on;
    return *this;
  }
  void zero_grad() {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }

  /// Fresh leaf with a copy of the values and no history.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Spectrum-valued tensor; `shape` is the logical complex shape, values are
/// interleaved (re, im). Produced by FFT ops.
template <typename T>
class ComplexTensor {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  ComplexTensor() = default;
  explicit ComplexTensor(NodePtr node) : node_(std::move(node)) {}

  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size() / 2; }
  std::span<const T> data() const { return node_->value; }
  T real(std::size_t i) const { return node_->value[2 * i]; }
  T imag(std::size_t i) const { return node_->value[2 * i + 1]; }
  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const std::shared_ptr<Node<T>>*> inputs) {
  if (!GradMode::enabled()) return false;
  for (auto* p : inputs) {
    if (*p && (*p)->requires_grad) return true;
  }
  return false;
}

/// Builds a result node; the closure is attached only when a gradient can
/// reach one of the inputs.
template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape, std::vector<T> value,
                                   std::initializer_list<const std::shared_ptr<Node<T>>*> inputs,
                                   std::function<void(Node<T>&)> backward, const char* op,
                                   bool complex = false) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->complex = complex;
  node->op = op;
  if (any_requires_grad<T>(inputs)) {
    node->requires_grad = true;
    for (auto* p : inputs) node->parents.push_back(*p);
    node->backward = std::move(backward);
  }
  return node;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::initializer_list<const std::shared_ptr<Node<T>>*> inputs,
                      std::function<void(Node<T>&)> backward, const char* op) {
  return Tensor<T>(make_node<T>(std::move(shape), std::move(value), inputs, std::move(backward), op));
}

/// Per-axis strides of `b` mapped into the index space of `a` (0 on
/// broadcast axes). Throws if b is not trailing-broadcastable onto a.
inline std::vector<std::size_t> broadcast_strides(const Shape& a, const Shape& b, const char* op) {
  auto fail = [&] {
    throw std::invalid_argument(std::string(op) + ": shape " + shape_str(b) +
                                " cannot be broadcast onto " + shape_str(a));
  };
  if (b.size() > a.size()) fail();
  std::vector<std::size_t> strides(a.size(), 0);
  std::size_t stride = 1;
  const std::size_t offset = a.size() - b.size();
  for (std::size_t i = b.size(); i-- > 0;) {
    const std::size_t ad = a[offset + i];
    if (b[i] == ad) {
      strides[offset + i] = stride;
    } else if (b[i] != 1) {
      fail();
    }
    stride *= b[i];
  }
  return strides;
}

/// Calls f(flat_a, flat_b) for every element of `a`, with b broadcast.
template <typename F>
void for_each_broadcast(const Shape& a, const std::vector<std::size_t>& bstrides, F&& f) {
  const std::size_t n = shape_numel(a);
  const std::size_t nd = a.size();
  // Collapse the innermost run of axes that maps either contiguously or
  // constantly into b.
  std::size_t inner = 1;
  std::size_t axis = nd;
  const bool inner_const = nd > 0 && bstrides[nd - 1] == 0;
  if (inner_const) {
    while (axis > 0 && bstrides[axis - 1] == 0) inner *= a[--axis];
  } else {
    while (axis > 0 && bstrides[axis - 1] == inner) inner *= a[--axis];
  }
  std::vector<std::size_t> idx(axis, 0);
  std::size_t boff = 0;
  for (std::size_t base = 0; base < n; base += inner) {
    if (inner_const) {
      for (std::size_t k = 0; k < inner; ++k) f(base + k, boff);
    } else {
      for (std::size_t k = 0; k < inner; ++k) f(base + k, boff + k);
    }
    for (std::size_t d = axis; d-- > 0;) {
      ++idx[d];
      boff += bstrides[d];
      if (idx[d] < a[d]) break;
      boff -= bstrides[d] * idx[d];
      idx[d] = 0;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Backward pass

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must have exactly one element, got shape " +
                                shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("backward: loss is not connected to any requires_grad tensor");
  }
  using NodePtr = std::shared_ptr<Node<T>>;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const NodePtr& p = node->parents[next++];
      if (p && p->requires_grad && visited.insert(p.get()).second) stack.emplace_back(p.get(), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Node<T>* root = loss.node().get();
  if (root->is_leaf()) {
    root->grad_buffer()[0] += T(1);
    return;
  }
  root->grad.assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->is_leaf()) continue;
    if (!node->grad.empty() && node->backward) node->backward(*node);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

template <typename T>
void zero_grad(std::span<Tensor<T>> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic with trailing-axis broadcasting of the right operand

enum class BinaryOp { add, sub, mul, div };

template <typename T>
Tensor<T> elementwise(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b) {
  static constexpr const char* names[] = {"add", "sub", "mul", "div"};
  const char* name = names[static_cast<int>(op)];
  const Shape& shape = a.shape();
  const bool same = a.shape() == b.shape();
  const auto bstrides = same ? std::vector<std::size_t>{} : detail::broadcast_strides(shape, b.shape(), name);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<T> out(av.size());
  auto apply = [&](auto&& fn) {
    if (same) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(av[i], bv[i]);
    } else {
      detail::for_each_broadcast(shape, bstrides, [&](std::size_t i, std::size_t j) { out[i] = fn(av[i], bv[j]); });
    }
  };
  switch (op) {
    case BinaryOp::add: apply([](T x, T y) { return x + y; }); break;
    case BinaryOp::sub: apply([](T x, T y) { return x - y; }); break;
    case BinaryOp::mul: apply([](T x, T y) { return x * y; }); break;
    case BinaryOp::div: apply([](T x, T y) { return x / y; }); break;
  }
  auto bw = [op, same, bstrides](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto& g = self.grad;
    const auto& x = pa.value;
    const auto& y = pb.value;
    auto each = [&](auto&& fn) {
      if (same) {
        for (std::size_t i = 0; i < g.size(); ++i) fn(i, i);
      } else {
        detail::for_each_broadcast(self.shape, bstrides, fn);
      }
    };
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      switch (op) {
        case BinaryOp::add: for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; break;
        case BinaryOp::sub: for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; break;
        case BinaryOp::mul: each([&](std::size_t i, std::size_t j) { ga[i] += g[i] * y[j]; }); break;
        case BinaryOp::div: each([&](std::size_t i, std::size_t j) { ga[i] += g[i] / y[j]; }); break;
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      switch (op) {
        case BinaryOp::add: each([&](std::size_t i, std::size_t j) { gb[j] += g[i]; }); break;
        case BinaryOp::sub: each([&](std::size_t i, std::size_t j) { gb[j] -= g[i]; }); break;
        case BinaryOp::mul: each([&](std::size_t i, std::size_t j) { gb[j] += g[i] * x[i]; }); break;
        case BinaryOp::div:
          each([&](std::size_t i, std::size_t j) { gb[j] -= g[i] * x[i] / (y[j] * y[j]); });
          break;
      }
    }
  };
  return detail::make_result<T>(shape, std::move(out), {&a.node(), &b.node()}, bw, name);
}

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::add, a, b); }
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::sub, a, b); }
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::mul, a, b); }
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::div, a, b); }

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

/// a * s + c for scalar constants.
template <typename T>
Tensor<T> affine(const Tensor<T>& a, T s, T c = T(0)) {
  std::vector<T> out(a.size());
  const auto& v = a.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * s + c;
  return detail::make_result<T>(a.shape(), std::move(out), {&a.node()},
                                [s](Node<T>& self) {
                                  auto& ga = self.parents[0]->grad_buffer();
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * s;
                                },
                                "affine");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  const auto& v = a.node()->value;
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > T(0) ? v[i] : T(0);
  return detail::make_result<T>(a.shape(), std::move(out), {&a.node()},
                                [](Node<T>& self) {
                                  auto& p = *self.parents[0];
                                  auto& ga = p.grad_buffer();
                                  for (std::size_t i = 0; i < ga.size(); ++i) {
                                    if (p.value[i] > T(0)) ga[i] += self.grad[i];
                                  }
                                },
                                "relu");
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  const auto& v = a.node()->value;
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * v[i];
  return detail::make_result<T>(a.shape(), std::move(out), {&a.node()},
                                [](Node<T>& self) {
                                  auto& p = *self.parents[0];
                                  auto& ga = p.grad_buffer();
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += T(2) * p.value[i] * self.grad[i];
                                },
                                "square");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.data()) s += v;
  return detail::make_result<T>({1}, {s}, {&a.node()},
                                [](Node<T>& self) {
                                  auto& ga = self.parents[0]->grad_buffer();
                                  const T g = self.grad[0];
                                  for (auto& x : ga) x += g;
                                },
                                "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return affine(sum(a), T(1) / static_cast<T>(a.size()));
}

/// Same values, new shape (element count must match).
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return detail::make_result<T>(std::move(shape), a.node()->value, {&a.node()},
                                [](Node<T>& self) {
                                  auto& ga = self.parents[0]->grad_buffer();
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
                                },
                                "reshape");
}

/// Sum over every axis except the leading one: [B, ...] -> [B].
template <typename T>
Tensor<T> sum_per_row(const Tensor<T>& a) {
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.size() / rows;
  std::vector<T> out(rows, T(0));
  const auto& v = a.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    T s = T(0);
    for (std::size_t c = 0; c < cols; ++c) s += v[r * cols + c];
    out[r] = s;
  }
  return detail::make_result<T>({rows}, std::move(out), {&a.node()},
                                [rows, cols](Node<T>& self) {
                                  auto& ga = self.parents[0]->grad_buffer();
                                  for (std::size_t r = 0; r < rows; ++r) {
                                    for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += self.grad[r];
                                  }
                                },
                                "sum_per_row");
}

}  // namespace ffino
