#pragma once

#include "mmpn/layers.hpp"

namespace mmpn::nn {

// Adam with L2-style weight decay folded into the gradient (classic Adam +
// L2, not the decoupled variant). Moments persist across learning-rate
// phases.
template <typename T>
class Adam {
 public:
  explicit Adam(ParamRegistry<T>& params, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& e : params.entries()) {
      if (!e.trainable) continue;
      m_.emplace_back(e.var.value().shape, T(0));
      v_.emplace_back(e.var.value().shape, T(0));
    }
  }

  long step_count() const { return t_; }

  void step(T lr, T weight_decay) {
    if (!(lr > T(0))) throw ValidationError("adam: learning rate must be positive");
    ++t_;
    T bc1 = T(1) - T(std::pow(double(beta1_), double(t_)));
    T bc2 = T(1) - T(std::pow(double(beta2_), double(t_)));
    std::size_t slot = 0;
    for (auto& e : params_->entries()) {
      if (!e.trainable) continue;
      auto& node = *e.var.node();
      Tensor<T>& m = m_[slot];
      Tensor<T>& v = v_[slot];
      ++slot;
      if (node.grad.data.empty()) continue;  // parameter unused this step
      for (std::size_t i = 0; i < node.value.size(); ++i) {
        T g = node.grad[i] + weight_decay * node.value[i];
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g;
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g * g;
        T m_hat = m[i] / bc1;
        T v_hat = v[i] / bc2;
        node.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
      }
      check_finite(node.value, "adam");
    }
  }

 private:
  ParamRegistry<T>* params_;
  T beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace mmpn::nn
