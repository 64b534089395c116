#pragma once

#include <string>

#include "mmpn/ops.hpp"
#include "mmpn/rng.hpp"

namespace mmpn::nn {

// Ordered registry of a model's named tensors. Trainable entries feed the
// optimizer; non-trainable entries (batch-norm running stats) are still
// checkpointed. Order is creation order, so iteration is deterministic.
template <typename T>
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    bool trainable = true;
  };

  Var<T> add(const std::string& name, Tensor<T> init, bool trainable = true) {
    for (const auto& e : entries_) {
      if (e.name == name) throw ValidationError("duplicate parameter name: " + name);
    }
    Var<T> v(std::move(init), trainable);
    entries_.push_back({name, v, trainable});
    return v;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  Entry* find(const std::string& name) {
    for (auto& e : entries_) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
      if (e.trainable) n += e.var.value().size();
    }
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) {
      auto& node = *e.var.node();
      if (!node.grad.data.empty()) std::fill(node.grad.data.begin(), node.grad.data.end(), T(0));
    }
  }

 private:
  std::vector<Entry> entries_;
};

// Kaiming-uniform fan-in (gain sqrt(2)): bound = sqrt(6 / fan_in).
template <typename T>
Tensor<T> kaiming_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(shape);
  double bound = std::sqrt(6.0 / double(fan_in));
  for (auto& v : t.data) v = T(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor<T> t(shape);
  for (auto& v : t.data) v = T(rng.uniform(-bound, bound));
  return t;
}

// use_bias=false for convolutions feeding a batch norm: the normalization
// would absorb the bias anyway (and its gradient would be identically zero).
template <typename T>
struct Conv2dLayer {
  Var<T> weight, bias;
  std::size_t stride = 1, pad = 1;

  Conv2dLayer() = default;
  Conv2dLayer(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_c,
              std::size_t out_c, std::size_t k, std::size_t stride_, std::size_t pad_, Rng& rng,
              bool use_bias = true) {
    stride = stride_;
    pad = pad_;
    std::size_t fan_in = in_c * k * k;
    weight = reg.add(prefix + ".weight", kaiming_uniform<T>({out_c, in_c, k, k}, fan_in, rng));
    if (use_bias) {
      bias = reg.add(prefix + ".bias", Tensor<T>({out_c}, T(0)));
    } else {
      bias = Var<T>(Tensor<T>({out_c}, T(0)), false);
    }
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, stride, pad); }
};

template <typename T>
struct BatchNorm2dLayer {
  Var<T> gamma, beta;
  Var<T> running_mean, running_var;  // non-trainable

  BatchNorm2dLayer() = default;
  BatchNorm2dLayer(ParamRegistry<T>& reg, const std::string& prefix, std::size_t ch) {
    gamma = reg.add(prefix + ".gamma", Tensor<T>({ch}, T(1)));
    beta = reg.add(prefix + ".beta", Tensor<T>({ch}, T(0)));
    running_mean = reg.add(prefix + ".running_mean", Tensor<T>({ch}, T(0)), false);
    running_var = reg.add(prefix + ".running_var", Tensor<T>({ch}, T(1)), false);
  }

  Var<T> operator()(const Var<T>& x, bool training) const {
    return batch_norm2d(x, gamma, beta, &running_mean.node()->value, &running_var.node()->value,
                        training);
  }
};

template <typename T>
struct LinearLayer {
  Var<T> weight, bias;

  LinearLayer() = default;
  LinearLayer(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in,
              std::size_t out, Rng& rng) {
    weight = reg.add(prefix + ".weight", kaiming_uniform<T>({out, in}, in, rng));
    bias = reg.add(prefix + ".bias", Tensor<T>({out}, T(0)));
  }

  Var<T> operator()(const Var<T>& x) const { return linear(x, weight, bias); }
};

// ResNet basic block: conv-bn-relu-conv-bn + shortcut, then relu. A
// downsampling block halves the spatial dims with stride 2 and projects the
// shortcut with a 1x1 conv + bn.
template <typename T>
struct BasicBlock {
  Conv2dLayer<T> conv1, conv2;
  BatchNorm2dLayer<T> bn1, bn2;
  bool downsample = false;
  Conv2dLayer<T> conv_sc;
  BatchNorm2dLayer<T> bn_sc;

  BasicBlock() = default;
  BasicBlock(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_c,
             std::size_t out_c, bool downsample_, Rng& rng) {
    downsample = downsample_;
    std::size_t s = downsample ? 2 : 1;
    conv1 = Conv2dLayer<T>(reg, prefix + ".conv1", in_c, out_c, 3, s, 1, rng, false);
    bn1 = BatchNorm2dLayer<T>(reg, prefix + ".bn1", out_c);
    conv2 = Conv2dLayer<T>(reg, prefix + ".conv2", out_c, out_c, 3, 1, 1, rng, false);
    bn2 = BatchNorm2dLayer<T>(reg, prefix + ".bn2", out_c);
    if (downsample || in_c != out_c) {
      downsample = true;
      conv_sc = Conv2dLayer<T>(reg, prefix + ".shortcut.conv", in_c, out_c, 1, s, 0, rng, false);
      bn_sc = BatchNorm2dLayer<T>(reg, prefix + ".shortcut.bn", out_c);
    }
  }

  Var<T> operator()(const Var<T>& x, bool training) const {
    Var<T> y = relu(bn1(conv1(x), training));
    y = bn2(conv2(y), training);
    Var<T> sc = downsample ? bn_sc(conv_sc(x), training) : x;
    return relu(add(y, sc));
  }
};

// Standard LSTM cell; gate order (i, f, g, o) along the 4H axis.
template <typename T>
struct LSTMCellLayer {
  Var<T> w_ih, w_hh, b_ih, b_hh;
  std::size_t hidden = 0;

  LSTMCellLayer() = default;
  LSTMCellLayer(ParamRegistry<T>& reg, const std::string& prefix, std::size_t input,
                std::size_t hidden_, Rng& rng) {
    hidden = hidden_;
    double bound = 1.0 / std::sqrt(double(hidden));
    w_ih = reg.add(prefix + ".w_ih", uniform_init<T>({4 * hidden, input}, bound, rng));
    w_hh = reg.add(prefix + ".w_hh", uniform_init<T>({4 * hidden, hidden}, bound, rng));
    b_ih = reg.add(prefix + ".b_ih", Tensor<T>({4 * hidden}, T(0)));
    b_hh = reg.add(prefix + ".b_hh", Tensor<T>({4 * hidden}, T(0)));
  }

  // (x: B x I, h: B x H, c: B x H) -> (h', c')
  std::pair<Var<T>, Var<T>> operator()(const Var<T>& x, const Var<T>& h, const Var<T>& c) const {
    Var<T> gates = add(linear(x, w_ih, b_ih), linear(h, w_hh, b_hh));  // B x 4H
    Var<T> i = sigmoid(narrow_cols(gates, 0, hidden));
    Var<T> f = sigmoid(narrow_cols(gates, hidden, hidden));
    Var<T> g = tanh_op(narrow_cols(gates, 2 * hidden, hidden));
    Var<T> o = sigmoid(narrow_cols(gates, 3 * hidden, hidden));
    Var<T> c_next = add(mul(f, c), mul(i, g));
    Var<T> h_next = mul(o, tanh_op(c_next));
    return {h_next, c_next};
  }
};

}  // namespace mmpn::nn
