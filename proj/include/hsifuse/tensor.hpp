#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hsifuse/errors.hpp"
#include "hsifuse/rng.hpp"

namespace hsifuse {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    require(d > 0, "tensor: extents must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

namespace detail {

// Graph construction is single-threaded; node ids encode creation order and
// give backward() its fixed topological order.
inline std::uint64_t next_node_id() {
  static std::uint64_t counter = 0;
  return ++counter;
}

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first needed; same length as data after
  bool requires_grad = false;
  bool needs_grad = false;  // on a path from some requires_grad leaf
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  explicit Node(Shape s) : shape(std::move(s)), data(shape_numel(shape)), id(next_node_id()) {}

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
};

}  // namespace detail

/// Value-semantics handle to an N-d array participating in the autodiff
/// graph. Data is row-major. Forward ops never mutate inputs; backward()
/// writes only grad slots.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(Shape s) { return Tensor(std::make_shared<detail::Node<T>>(std::move(s))); }

  static Tensor full(Shape s, T v) {
    Tensor t = zeros(std::move(s));
    std::fill(t.node_->data.begin(), t.node_->data.end(), v);
    return t;
  }

  static Tensor scalar(T v) { return full({1}, v); }

  static Tensor from_values(Shape s, std::vector<T> v) {
    Tensor t(std::make_shared<detail::Node<T>>(std::move(s)));
    require(v.size() == t.numel(), "tensor: data length must equal product(shape)");
    t.node_->data = std::move(v);
    return t;
  }

  static Tensor uniform(Shape s, T lo, T hi, Rng& rng) {
    Tensor t = zeros(std::move(s));
    for (auto& x : t.node_->data) x = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const { return node_->numel(); }

  const std::vector<T>& values() const { return node_->data; }
  /// Mutable access for parameter updates; must not be used while a graph
  /// referencing this tensor is still alive.
  std::vector<T>& values_mut() { return node_->data; }

  T value() const {
    require(numel() == 1, "tensor: value() requires a scalar");
    return node_->data[0];
  }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const {
    require(has_grad(), "tensor: gradient not populated");
    return node_->grad;
  }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  Tensor& set_requires_grad(bool b = true) {
    node_->requires_grad = b;
    return *this;
  }
  bool requires_grad() const { return node_->requires_grad; }

  const std::shared_ptr<detail::Node<T>>& impl() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<T>> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

template <typename T>
inline bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad || n->needs_grad;
}

/// Records parents and the pull-style backward closure on `out`, but only
/// when some parent participates in differentiation.
template <typename T, typename Fn>
inline void attach(Tensor<T>& out, std::initializer_list<Tensor<T>> parents, Fn&& fn) {
  bool need = false;
  for (const auto& p : parents) need = need || wants_grad(p.impl());
  if (!need) return;
  auto& n = *out.impl();
  n.needs_grad = true;
  for (const auto& p : parents) n.parents.push_back(p.impl());
  n.backward = std::forward<Fn>(fn);
}

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

}  // namespace detail

/// Populates grad fields of every requires_grad leaf reachable from `loss`.
/// Node ids fix the topological order, so accumulation order is
/// deterministic. Leaf grads accumulate additively across calls; grads of
/// interior nodes are reset at the start of each call.
template <typename T>
inline void backward(const Tensor<T>& loss) {
  require(loss.numel() == 1, "backward: loss must be a scalar");
  auto root = loss.impl();

  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<detail::Node<T>*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node<T>* a, const detail::Node<T>* b) { return a->id > b->id; });

  for (auto* n : order) {
    if (n->backward) {
      n->grad.assign(n->numel(), T(0));  // interior node: fresh pass
    } else {
      n->ensure_grad();  // leaf: keep accumulating
    }
  }
  root->grad[0] += T(1);

  for (auto* n : order) {
    if (n->backward) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  auto pa = a.impl();
  auto pb = b.impl();
  detail::attach(out, {a, b}, [pa, pb](detail::Node<T>& self) {
    if (detail::wants_grad(pa)) {
      pa->ensure_grad();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (detail::wants_grad(pb)) {
      pb->ensure_grad();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  auto pa = a.impl();
  auto pb = b.impl();
  detail::attach(out, {a, b}, [pa, pb](detail::Node<T>& self) {
    if (detail::wants_grad(pa)) {
      pa->ensure_grad();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (detail::wants_grad(pb)) {
      pb->ensure_grad();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  auto pa = a.impl();
  auto pb = b.impl();
  detail::attach(out, {a, b}, [pa, pb](detail::Node<T>& self) {
    if (detail::wants_grad(pa)) {
      pa->ensure_grad();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * pb->data[i];
    }
    if (detail::wants_grad(pb)) {
      pb->ensure_grad();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * pa->data[i];
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& x, T s) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * s;
  auto px = x.impl();
  detail::attach(out, {x}, [px, s](detail::Node<T>& self) {
    px->ensure_grad();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i] * s;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros({1});
  const auto& xv = x.values();
  T acc = T(0);
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i];
  out.impl()->data[0] = acc;
  auto px = x.impl();
  detail::attach(out, {x}, [px](detail::Node<T>& self) {
    px->ensure_grad();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < px->grad.size(); ++i) px->grad[i] += g;
  });
  return out;
}

template <typename T>
inline Tensor<T> mean(const Tensor<T>& x) {
  const T inv = T(1) / static_cast<T>(x.numel());
  return scale(sum(x), inv);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { sigmoid, tanh, selu };

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

namespace detail {

// Cephes-style single-precision exp (Cody-Waite reduction + degree-6
// polynomial, |rel err| < 3e-7). Branch-free and call-free so the
// elementwise loops vectorize; exp(0) == 1 exactly. The double path keeps
// libm for the f64 test suites.
inline float fast_exp_scalar(float x) {
  x = std::min(88.0f, std::max(-87.0f, x));
  const float z = x * 1.44269504088896341f;
  const float n = std::floor(z + 0.5f);
  float r = x - n * 0.693359375f;
  r -= n * -2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = (p * r) * r + r + 1.0f;
  const std::int32_t bits = (static_cast<std::int32_t>(n) + 127) << 23;
  float scale;
  std::memcpy(&scale, &bits, sizeof(scale));
  return p * scale;
}

template <typename T>
inline T fast_exp(T x) {
  if constexpr (std::is_same_v<T, float>) {
    return fast_exp_scalar(x);
  } else {
    return std::exp(x);
  }
}

// tanh(x) = (e - 1) / (e + 1) with e = exp(2x); exact zero at x = 0.
template <typename T>
inline T fast_tanh(T x) {
  if constexpr (std::is_same_v<T, float>) {
    const float e = fast_exp_scalar(2.0f * x);
    return (e - 1.0f) / (e + 1.0f);
  } else {
    return std::tanh(x);
  }
}

template <typename T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + fast_exp(-x));
  const T e = fast_exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

template <typename T>
inline Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = detail::stable_sigmoid(xv[i]);
  auto px = x.impl();
  detail::attach(out, {x}, [px](detail::Node<T>& self) {
    px->ensure_grad();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.data[i];
      px->grad[i] += self.grad[i] * y * (T(1) - y);
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = detail::fast_tanh(xv[i]);
  auto px = x.impl();
  detail::attach(out, {x}, [px](detail::Node<T>& self) {
    px->ensure_grad();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.data[i];
      px->grad[i] += self.grad[i] * (T(1) - y * y);
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> selu(const Tensor<T>& x) {
  const T lambda = static_cast<T>(kSeluLambda);
  const T alpha = static_cast<T>(kSeluAlpha);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.impl()->data;
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < ov.size(); ++i) {
    const T v = xv[i];
    ov[i] = v > T(0) ? lambda * v : lambda * alpha * (detail::fast_exp(v) - T(1));
  }
  auto px = x.impl();
  detail::attach(out, {x}, [px, lambda, alpha](detail::Node<T>& self) {
    px->ensure_grad();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T v = px->data[i];
      const T d = v > T(0) ? lambda : lambda * alpha * detail::fast_exp(v);
      px->grad[i] += self.grad[i] * d;
    }
  });
  return out;
}

template <typename T>
inline Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  switch (kind) {
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::selu:
      return selu(x);
  }
  throw ContractViolation("activation: unknown kind");
}

/// Clamp to [0, 1] with pass-through subgradient on the interior.
template <typename T>
inline Tensor<T> clamp01(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.impl()->data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::min(T(1), std::max(T(0), xv[i]));
  auto px = x.impl();
  detail::attach(out, {x}, [px](detail::Node<T>& self) {
    px->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T v = px->data[i];
      if (v >= T(0) && v <= T(1)) px->grad[i] += self.grad[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean smooth-L1: 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise, d = pred - target.
template <typename T>
inline Tensor<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::check_same_shape(pred, target, "smooth_l1");
  Tensor<T> out = Tensor<T>::zeros({1});
  const auto& pv = pred.values();
  const auto& tv = target.values();
  T acc = T(0);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const T d = pv[i] - tv[i];
    const T a = std::abs(d);
    acc += a < T(1) ? T(0.5) * d * d : a - T(0.5);
  }
  const T inv_n = T(1) / static_cast<T>(pv.size());
  out.impl()->data[0] = acc * inv_n;
  auto pp = pred.impl();
  auto pt = target.impl();
  detail::attach(out, {pred, target}, [pp, pt, inv_n](detail::Node<T>& self) {
    const T g = self.grad[0] * inv_n;
    const bool wp = detail::wants_grad(pp);
    const bool wt = detail::wants_grad(pt);
    if (wp) pp->ensure_grad();
    if (wt) pt->ensure_grad();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < pp->data.size(); ++i) {
      const T d = pp->data[i] - pt->data[i];
      const T dd = d > T(1) ? T(1) : (d < T(-1) ? T(-1) : d);
      if (wp) pp->grad[i] += g * dd;
      if (wt) pt->grad[i] -= g * dd;
    }
  });
  return out;
}

}  // namespace hsifuse
