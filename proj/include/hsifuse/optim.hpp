#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hsifuse/tensor.hpp"

namespace hsifuse {

/// Ordered registry of named trainable tensors. Order is construction order
/// and is part of the determinism contract (shuffles, init draws and
/// checkpoints all iterate it in order).
template <typename T>
class ParamSet {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> t) {
    t.set_requires_grad(true);
    items_.emplace_back(name, t);
    return t;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
  std::size_t size() const { return items_.size(); }

  void zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

template <typename T>
struct AdamWOptions {
  T lr = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(5e-5);
};

/// AdamW with decoupled weight decay: the decay is applied directly to the
/// parameter (scaled by lr), never through the moment estimates.
template <typename T>
class AdamW {
 public:
  AdamW(ParamSet<T>& params, AdamWOptions<T> opts) : params_(&params), opts_(opts) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::size_t n = params.items()[i].second.numel();
      m_[i].assign(n, T(0));
      v_[i].assign(n, T(0));
    }
  }

  const AdamWOptions<T>& options() const { return opts_; }
  long step_count() const { return step_; }

  /// Rejects the whole step (no parameter is touched) when any gradient
  /// element is non-finite.
  void step() {
    require(opts_.lr >= T(0), "adamw: lr must be nonnegative");
    for (auto& [name, t] : params_->items()) {
      if (!t.has_grad()) continue;
      for (const T g : t.grad()) {
        if (!std::isfinite(static_cast<double>(g))) {
          throw NonFiniteGradient("adamw: non-finite gradient in parameter '" + name + "'");
        }
      }
    }
    ++step_;
    const T bc1 = T(1) - std::pow(opts_.beta1, static_cast<T>(step_));
    const T bc2 = T(1) - std::pow(opts_.beta2, static_cast<T>(step_));
    for (std::size_t i = 0; i < params_->size(); ++i) {
      auto& t = params_->items()[i].second;
      if (!t.has_grad()) continue;
      const auto& g = t.grad();
      auto& p = t.values_mut();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] -= opts_.lr * opts_.weight_decay * p[j];
        m[j] = opts_.beta1 * m[j] + (T(1) - opts_.beta1) * g[j];
        v[j] = opts_.beta2 * v[j] + (T(1) - opts_.beta2) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        p[j] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
      }
    }
  }

  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_step_count(long s) { step_ = s; }

 private:
  ParamSet<T>* params_;
  AdamWOptions<T> opts_;
  long step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace hsifuse
