#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "mmpn/errors.hpp"

namespace mmpn::nn {

// Dense row-major tensor. T is float or double; the whole nn stack is
// instantiated for both so tests can run 64-bit while training may run
// 32-bit.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(count(shape)) {}
  Tensor(std::vector<std::size_t> s, T fill)
      : shape(std::move(s)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }

  // 2-D / 4-D accessors for the shapes the layers use.
  T& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  T at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  T at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.data) {
    if (!std::isfinite(double(v))) {
      throw NumericError(op, "produced a non-finite value");
    }
  }
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mmpn::nn
