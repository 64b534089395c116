#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmpn/autodiff.hpp"

namespace mmpn::nn {

namespace detail {

// C (MxN) += A (MxK) * B (KxN)
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      T av = ai[l];
      const T* bl = b + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

// C (MxN) += A^T * B with A stored (KxM), B (KxN)
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t l = 0; l < k; ++l) {
    const T* al = a + l * m;
    const T* bl = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      T av = al[i];
      T* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

// C (MxN) += A * B^T with A (MxK), B (NxK)
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] += acc;
    }
  }
}

struct ConvDims {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, kh, kw;
  std::size_t stride, pad;
  std::size_t out_h, out_w;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t pad) {
  if (x.rank() != 4 || w.rank() != 4) throw ValidationError("conv2d: inputs must be 4-D");
  if (x.shape[1] != w.shape[1]) {
    throw ValidationError("conv2d: channel mismatch " + x.shape_str() + " vs " + w.shape_str());
  }
  ConvDims d{};
  d.batch = x.shape[0];
  d.in_c = x.shape[1];
  d.in_h = x.shape[2];
  d.in_w = x.shape[3];
  d.out_c = w.shape[0];
  d.kh = w.shape[2];
  d.kw = w.shape[3];
  d.stride = stride;
  d.pad = pad;
  if (stride == 0) throw ValidationError("conv2d: stride must be >= 1");
  if (d.in_h + 2 * pad < d.kh || d.in_w + 2 * pad < d.kw) {
    throw ValidationError("conv2d: kernel larger than padded input");
  }
  d.out_h = (d.in_h + 2 * pad - d.kh) / stride + 1;
  d.out_w = (d.in_w + 2 * pad - d.kw) / stride + 1;
  return d;
}

// col is (in_c*kh*kw) x (out_h*out_w) for one sample.
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
  std::size_t out_hw = d.out_h * d.out_w;
  for (std::size_t c = 0; c < d.in_c; ++c) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        T* row = col + ((c * d.kh + ky) * d.kw + kx) * out_hw;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          std::ptrdiff_t iy = std::ptrdiff_t(oy * d.stride + ky) - std::ptrdiff_t(d.pad);
          bool y_ok = iy >= 0 && iy < std::ptrdiff_t(d.in_h);
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            std::ptrdiff_t ix = std::ptrdiff_t(ox * d.stride + kx) - std::ptrdiff_t(d.pad);
            row[oy * d.out_w + ox] =
                (y_ok && ix >= 0 && ix < std::ptrdiff_t(d.in_w))
                    ? x[(c * d.in_h + std::size_t(iy)) * d.in_w + std::size_t(ix)]
                    : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, T* x) {
  std::size_t out_hw = d.out_h * d.out_w;
  for (std::size_t c = 0; c < d.in_c; ++c) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        const T* row = col + ((c * d.kh + ky) * d.kw + kx) * out_hw;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          std::ptrdiff_t iy = std::ptrdiff_t(oy * d.stride + ky) - std::ptrdiff_t(d.pad);
          if (iy < 0 || iy >= std::ptrdiff_t(d.in_h)) continue;
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            std::ptrdiff_t ix = std::ptrdiff_t(ox * d.stride + kx) - std::ptrdiff_t(d.pad);
            if (ix < 0 || ix >= std::ptrdiff_t(d.in_w)) continue;
            x[(c * d.in_h + std::size_t(iy)) * d.in_w + std::size_t(ix)] += row[oy * d.out_w + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
  }
}

}  // namespace detail

// ---- elementwise and structural ops ----

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op<T>("add", std::move(out), {a, b}, [](Node<T>& n) {
    for (int p = 0; p < 2; ++p) {
      if (!n.parents[p]->requires_grad) continue;
      Tensor<T>& g = ensure_grad(*n.parents[p]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op<T>("sub", std::move(out), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = ensure_grad(*n.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = ensure_grad(*n.parents[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op<T>("mul", std::move(out), {a, b}, [](Node<T>& n) {
    const Tensor<T>& av = n.parents[0]->value;
    const Tensor<T>& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = ensure_grad(*n.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = ensure_grad(*n.parents[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

// out = a * scale + shift (compile-time constants in the graph).
template <typename T>
Var<T> affine(const Var<T>& a, T scale, T shift) {
  Tensor<T> out = a.value();
  for (auto& v : out.data) v = v * scale + shift;
  return make_op<T>("affine", std::move(out), {a}, [scale](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return affine(a, factor, T(0));
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return make_op<T>("relu", std::move(out), {a}, [](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    bool guided = guided_backprop_flag();
    for (std::size_t i = 0; i < g.size(); ++i) {
      bool open = n.value[i] > T(0);
      if (guided) open = open && n.grad[i] > T(0);
      if (open) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return make_op<T>("sigmoid", std::move(out), {a}, [](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      T y = n.value[i];
      g[i] += n.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data) v = std::tanh(v);
  return make_op<T>("tanh", std::move(out), {a}, [](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      T y = n.value[i];
      g[i] += n.grad[i] * (T(1) - y * y);
    }
  });
}

// Concatenate 2-D tensors along columns.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  std::size_t rows = parts[0].value().shape.at(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.value().rank() != 2 || p.value().shape[0] != rows) {
      throw ValidationError("concat_cols: inputs must be 2-D with equal rows");
    }
    cols += p.value().shape[1];
  }
  Tensor<T> out({rows, cols});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::size_t w = p.value().shape[1];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) out.at2(r, off + c) = p.value().at2(r, c);
    }
    off += w;
  }
  return make_op<T>("concat_cols", std::move(out), parts, [](Node<T>& n) {
    std::size_t rows = n.value.shape[0];
    std::size_t off = 0;
    for (auto& parent : n.parents) {
      std::size_t w = parent->value.shape[1];
      if (parent->requires_grad) {
        Tensor<T>& g = ensure_grad(*parent);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < w; ++c) g.at2(r, c) += n.grad.at2(r, off + c);
        }
      }
      off += w;
    }
  });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  return concat_cols<T>(std::vector<Var<T>>{a, b});
}

template <typename T>
Var<T> narrow_cols(const Var<T>& a, std::size_t start, std::size_t len) {
  if (a.value().rank() != 2 || start + len > a.value().shape[1]) {
    throw ValidationError("narrow_cols: bad range for " + a.value().shape_str());
  }
  std::size_t rows = a.value().shape[0];
  Tensor<T> out({rows, len});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < len; ++c) out.at2(r, c) = a.value().at2(r, start + c);
  }
  return make_op<T>("narrow_cols", std::move(out), {a}, [start, len](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    std::size_t rows = n.value.shape[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < len; ++c) g.at2(r, start + c) += n.grad.at2(r, c);
    }
  });
}

// Slice along the leading dimension; works for any rank (contiguous slab).
template <typename T>
Var<T> narrow0(const Var<T>& a, std::size_t start, std::size_t len) {
  if (a.value().rank() < 1 || start + len > a.value().shape[0]) {
    throw ValidationError("narrow0: bad range for " + a.value().shape_str());
  }
  std::size_t stride = a.value().size() / a.value().shape[0];
  std::vector<std::size_t> shape = a.value().shape;
  shape[0] = len;
  Tensor<T> out(shape);
  std::copy_n(a.value().data.begin() + start * stride, len * stride, out.data.begin());
  return make_op<T>("narrow0", std::move(out), {a}, [start, stride, len](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < len * stride; ++i) g[start * stride + i] += n.grad[i];
  });
}

// ---- neural network ops ----

// y = x * W^T + b with x (B x I), w (O x I), b (O).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const Tensor<T>& bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.shape[1] != wv.shape[1] ||
      wv.shape[0] != bv.shape[0]) {
    throw ValidationError("linear: incompatible shapes " + xv.shape_str() + ", " +
                          wv.shape_str() + ", " + bv.shape_str());
  }
  std::size_t rows = xv.shape[0], in = xv.shape[1], out_dim = wv.shape[0];
  Tensor<T> out({rows, out_dim});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out_dim; ++o) out.at2(r, o) = bv[o];
  }
  detail::gemm_nt(xv.data.data(), wv.data.data(), out.data.data(), rows, in, out_dim);
  return make_op<T>("linear", std::move(out), {x, w, b}, [rows, in, out_dim](Node<T>& n) {
    const Tensor<T>& xv = n.parents[0]->value;
    const Tensor<T>& wv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor<T>& gx = ensure_grad(*n.parents[0]);
      detail::gemm_nn(n.grad.data.data(), wv.data.data(), gx.data.data(), rows, out_dim, in);
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& gw = ensure_grad(*n.parents[1]);
      detail::gemm_tn(n.grad.data.data(), xv.data.data(), gw.data.data(), out_dim, rows, in);
    }
    if (n.parents[2]->requires_grad) {
      Tensor<T>& gb = ensure_grad(*n.parents[2]);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += n.grad.at2(r, o);
      }
    }
  });
}

// Cross-correlation with zero padding. x (N,C,H,W), w (K,C,kh,kw), b (K).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::size_t stride,
              std::size_t pad) {
  detail::ConvDims d = detail::conv_dims(x.value(), w.value(), stride, pad);
  if (b.value().rank() != 1 || b.value().shape[0] != d.out_c) {
    throw ValidationError("conv2d: bias shape mismatch");
  }
  std::size_t col_rows = d.in_c * d.kh * d.kw;
  std::size_t out_hw = d.out_h * d.out_w;
  std::size_t in_sz = d.in_c * d.in_h * d.in_w;
  std::size_t out_sz = d.out_c * out_hw;

  Tensor<T> out({d.batch, d.out_c, d.out_h, d.out_w});
  std::vector<T> col(col_rows * out_hw);
  for (std::size_t nidx = 0; nidx < d.batch; ++nidx) {
    detail::im2col(x.value().data.data() + nidx * in_sz, d, col.data());
    T* o = out.data.data() + nidx * out_sz;
    for (std::size_t k = 0; k < d.out_c; ++k) {
      T bias = b.value()[k];
      for (std::size_t i = 0; i < out_hw; ++i) o[k * out_hw + i] = bias;
    }
    detail::gemm_nn(w.value().data.data(), col.data(), o, d.out_c, col_rows, out_hw);
  }

  return make_op<T>("conv2d", std::move(out), {x, w, b}, [d, col_rows, out_hw, in_sz,
                                                          out_sz](Node<T>& n) {
    const Tensor<T>& xv = n.parents[0]->value;
    const Tensor<T>& wv = n.parents[1]->value;
    bool need_x = n.parents[0]->requires_grad;
    bool need_w = n.parents[1]->requires_grad;
    bool need_b = n.parents[2]->requires_grad;
    std::vector<T> col(col_rows * out_hw);
    std::vector<T> dcol(need_x ? col_rows * out_hw : 0);
    for (std::size_t nidx = 0; nidx < d.batch; ++nidx) {
      const T* gout = n.grad.data.data() + nidx * out_sz;
      if (need_w) {
        // The col buffer is recomputed rather than cached: it is the
        // largest intermediate in the network by far.
        detail::im2col(xv.data.data() + nidx * in_sz, d, col.data());
        Tensor<T>& gw = ensure_grad(*n.parents[1]);
        detail::gemm_nt(gout, col.data(), gw.data.data(), d.out_c, out_hw, col_rows);
      }
      if (need_x) {
        std::fill(dcol.begin(), dcol.end(), T(0));
        detail::gemm_tn(wv.data.data(), gout, dcol.data(), col_rows, d.out_c, out_hw);
        Tensor<T>& gx = ensure_grad(*n.parents[0]);
        detail::col2im_add(dcol.data(), d, gx.data.data() + nidx * in_sz);
      }
      if (need_b) {
        Tensor<T>& gb = ensure_grad(*n.parents[2]);
        for (std::size_t k = 0; k < d.out_c; ++k) {
          T acc = 0;
          for (std::size_t i = 0; i < out_hw; ++i) acc += gout[k * out_hw + i];
          gb[k] += acc;
        }
      }
    }
  });
}

// Max pooling with optional -inf padding; records argmax for the backward.
template <typename T>
Var<T> max_pool2d(const Var<T>& x, std::size_t k, std::size_t stride, std::size_t pad = 0) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw ValidationError("max_pool2d: input must be 4-D");
  if (k == 0 || stride == 0) throw ValidationError("max_pool2d: bad kernel/stride");
  std::size_t batch = xv.shape[0], ch = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
  if (h + 2 * pad < k || w + 2 * pad < k) throw ValidationError("max_pool2d: kernel too large");
  std::size_t oh = (h + 2 * pad - k) / stride + 1;
  std::size_t ow = (w + 2 * pad - k) / stride + 1;

  Tensor<T> out({batch, ch, oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t idx = 0;
  for (std::size_t nidx = 0; nidx < batch; ++nidx) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox, ++idx) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = 0;
          for (std::size_t ky = 0; ky < k; ++ky) {
            std::ptrdiff_t iy = std::ptrdiff_t(oy * stride + ky) - std::ptrdiff_t(pad);
            if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              std::ptrdiff_t ix = std::ptrdiff_t(ox * stride + kx) - std::ptrdiff_t(pad);
              if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
              std::size_t flat = ((nidx * ch + c) * h + std::size_t(iy)) * w + std::size_t(ix);
              if (xv[flat] > best) {
                best = xv[flat];
                best_i = flat;
              }
            }
          }
          out[idx] = best;
          (*argmax)[idx] = best_i;
        }
      }
    }
  }
  return make_op<T>("max_pool2d", std::move(out), {x}, [argmax](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[(*argmax)[i]] += n.grad[i];
  });
}

// (N,C,H,W) -> (N,C): mean over the spatial dimensions.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw ValidationError("global_avg_pool: input must be 4-D");
  std::size_t batch = xv.shape[0], ch = xv.shape[1], hw = xv.shape[2] * xv.shape[3];
  if (hw == 0) throw ValidationError("global_avg_pool: empty spatial dims");
  Tensor<T> out({batch, ch});
  for (std::size_t nidx = 0; nidx < batch; ++nidx) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* p = xv.data.data() + (nidx * ch + c) * hw;
      T acc = 0;
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      out.at2(nidx, c) = acc / T(hw);
    }
  }
  return make_op<T>("global_avg_pool", std::move(out), {x}, [batch, ch, hw](Node<T>& n) {
    Tensor<T>& g = ensure_grad(*n.parents[0]);
    for (std::size_t nidx = 0; nidx < batch; ++nidx) {
      for (std::size_t c = 0; c < ch; ++c) {
        T share = n.grad.at2(nidx, c) / T(hw);
        T* p = g.data.data() + (nidx * ch + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) p[i] += share;
      }
    }
  });
}

// Per-channel batch normalization over (N,C,H,W). In training mode the batch
// statistics normalize and the running stats (plain tensors owned by the
// layer) are updated in place; in eval mode the running stats normalize.
template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    Tensor<T>* running_mean, Tensor<T>* running_var, bool training,
                    T momentum = T(0.1), T eps = T(1e-5)) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw ValidationError("batch_norm: input must be 4-D");
  std::size_t batch = xv.shape[0], ch = xv.shape[1], hw = xv.shape[2] * xv.shape[3];
  if (gamma.value().size() != ch || beta.value().size() != ch ||
      running_mean->size() != ch || running_var->size() != ch) {
    throw ValidationError("batch_norm: parameter size mismatch");
  }
  std::size_t count = batch * hw;
  if (training && count < 2) {
    throw ValidationError("batch_norm: training needs at least 2 values per channel");
  }
  if (count == 0) throw ValidationError("batch_norm: empty batch");

  auto mean = std::make_shared<std::vector<T>>(ch, T(0));
  auto inv_std = std::make_shared<std::vector<T>>(ch, T(0));
  auto xhat = std::make_shared<Tensor<T>>(xv.shape);

  if (training) {
    for (std::size_t c = 0; c < ch; ++c) {
      T acc = 0;
      for (std::size_t nidx = 0; nidx < batch; ++nidx) {
        const T* p = xv.data.data() + (nidx * ch + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      }
      T mu = acc / T(count);
      T vacc = 0;
      for (std::size_t nidx = 0; nidx < batch; ++nidx) {
        const T* p = xv.data.data() + (nidx * ch + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) vacc += (p[i] - mu) * (p[i] - mu);
      }
      T var = vacc / T(count);  // biased, used for normalization
      (*mean)[c] = mu;
      (*inv_std)[c] = T(1) / std::sqrt(var + eps);
      T unbiased = vacc / T(count - 1);
      (*running_mean)[c] = (T(1) - momentum) * (*running_mean)[c] + momentum * mu;
      (*running_var)[c] = (T(1) - momentum) * (*running_var)[c] + momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      (*mean)[c] = (*running_mean)[c];
      (*inv_std)[c] = T(1) / std::sqrt((*running_var)[c] + eps);
    }
  }

  Tensor<T> out(xv.shape);
  for (std::size_t nidx = 0; nidx < batch; ++nidx) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* p = xv.data.data() + (nidx * ch + c) * hw;
      T* xh = xhat->data.data() + (nidx * ch + c) * hw;
      T* o = out.data.data() + (nidx * ch + c) * hw;
      T g = gamma.value()[c], bta = beta.value()[c];
      T mu = (*mean)[c], is = (*inv_std)[c];
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = (p[i] - mu) * is;
        o[i] = g * xh[i] + bta;
      }
    }
  }

  return make_op<T>("batch_norm", std::move(out), {x, gamma, beta},
                    [batch, ch, hw, count, training, inv_std, xhat](Node<T>& n) {
    const Tensor<T>& gv = n.parents[1]->value;
    // dgamma/dbeta
    std::vector<T> sum_g(ch, T(0)), sum_gx(ch, T(0));
    for (std::size_t nidx = 0; nidx < batch; ++nidx) {
      for (std::size_t c = 0; c < ch; ++c) {
        const T* go = n.grad.data.data() + (nidx * ch + c) * hw;
        const T* xh = xhat->data.data() + (nidx * ch + c) * hw;
        T a = 0, b2 = 0;
        for (std::size_t i = 0; i < hw; ++i) {
          a += go[i];
          b2 += go[i] * xh[i];
        }
        sum_g[c] += a;
        sum_gx[c] += b2;
      }
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& gg = ensure_grad(*n.parents[1]);
      for (std::size_t c = 0; c < ch; ++c) gg[c] += sum_gx[c];
    }
    if (n.parents[2]->requires_grad) {
      Tensor<T>& gb = ensure_grad(*n.parents[2]);
      for (std::size_t c = 0; c < ch; ++c) gb[c] += sum_g[c];
    }
    if (n.parents[0]->requires_grad) {
      Tensor<T>& gx = ensure_grad(*n.parents[0]);
      for (std::size_t nidx = 0; nidx < batch; ++nidx) {
        for (std::size_t c = 0; c < ch; ++c) {
          const T* go = n.grad.data.data() + (nidx * ch + c) * hw;
          const T* xh = xhat->data.data() + (nidx * ch + c) * hw;
          T* g = gx.data.data() + (nidx * ch + c) * hw;
          T coef = gv[c] * (*inv_std)[c];
          if (training) {
            T mg = sum_g[c] / T(count);
            T mgx = sum_gx[c] / T(count);
            for (std::size_t i = 0; i < hw; ++i) {
              g[i] += coef * (go[i] - mg - xh[i] * mgx);
            }
          } else {
            for (std::size_t i = 0; i < hw; ++i) g[i] += coef * go[i];
          }
        }
      }
    }
  });
}

// ---- losses ----

// Mean squared error against a constant target.
template <typename T>
Var<T> mse_loss(const Var<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape(pred.value(), target, "mse_loss");
  std::size_t n = pred.value().size();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    T d = pred.value()[i] - target[i];
    acc += d * d;
  }
  Tensor<T> out({std::size_t(1)});
  out[0] = acc / T(n);
  auto tgt = std::make_shared<Tensor<T>>(target);
  return make_op<T>("mse_loss", std::move(out), {pred}, [tgt, n](Node<T>& n_) {
    Tensor<T>& g = ensure_grad(*n_.parents[0]);
    T g0 = n_.grad[0];
    const Tensor<T>& pv = n_.parents[0]->value;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] += g0 * T(2) * (pv[i] - (*tgt)[i]) / T(n);
    }
  });
}

// Mean binary cross-entropy of probabilities against 0/1 targets.
// Probabilities are clamped to [eps, 1-eps]; the gradient is zero where the
// clamp is active.
template <typename T>
Var<T> bce_loss(const Var<T>& prob, const Tensor<T>& target, T eps = T(1e-7)) {
  detail::require_same_shape(prob.value(), target, "bce_loss");
  std::size_t n = prob.value().size();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    T p = std::clamp(prob.value()[i], eps, T(1) - eps);
    T y = target[i];
    acc -= y * std::log(p) + (T(1) - y) * std::log(T(1) - p);
  }
  Tensor<T> out({std::size_t(1)});
  out[0] = acc / T(n);
  auto tgt = std::make_shared<Tensor<T>>(target);
  return make_op<T>("bce_loss", std::move(out), {prob}, [tgt, n, eps](Node<T>& n_) {
    Tensor<T>& g = ensure_grad(*n_.parents[0]);
    T g0 = n_.grad[0];
    const Tensor<T>& pv = n_.parents[0]->value;
    for (std::size_t i = 0; i < n; ++i) {
      T raw = pv[i];
      if (raw <= eps || raw >= T(1) - eps) continue;  // clamp region
      g[i] += g0 * (raw - (*tgt)[i]) / (raw * (T(1) - raw)) / T(n);
    }
  });
}

// Constant leaf (no gradient tracking).
template <typename T>
Var<T> constant(Tensor<T> value) {
  return Var<T>(std::move(value), false);
}

}  // namespace mmpn::nn
