#include <doctest.h>

#include <cmath>

#include "mmpn/layers.hpp"
#include "mmpn/ops.hpp"
#include "mmpn/rng.hpp"

using namespace mmpn;
using namespace mmpn::nn;

namespace {

TensorD random_tensor(std::vector<std::size_t> shape, Rng& rng, double sd = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, sd);
  return t;
}

// Naive quadruple-loop cross-correlation, independent of the im2col path.
TensorD conv_reference(const TensorD& x, const TensorD& w, const TensorD& b, std::size_t stride,
                       std::size_t pad) {
  std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  std::size_t K = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  std::size_t oh = (H + 2 * pad - kh) / stride + 1;
  std::size_t ow = (W + 2 * pad - kw) / stride + 1;
  TensorD out({N, K, oh, ow});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = b[k];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                std::ptrdiff_t iy = std::ptrdiff_t(oy * stride + ky) - std::ptrdiff_t(pad);
                std::ptrdiff_t ix = std::ptrdiff_t(ox * stride + kx) - std::ptrdiff_t(pad);
                if (iy < 0 || iy >= std::ptrdiff_t(H) || ix < 0 || ix >= std::ptrdiff_t(W)) continue;
                acc += x.at4(n, c, std::size_t(iy), std::size_t(ix)) * w.at4(k, c, ky, kx);
              }
          out.at4(n, k, oy, ox) = acc;
        }
  return out;
}

// Scalar-loop LSTM cell reference with gate order (i, f, g, o).
void lstm_reference(const TensorD& x, const TensorD& h, const TensorD& c, const TensorD& w_ih,
                    const TensorD& w_hh, const TensorD& b_ih, const TensorD& b_hh, TensorD& h_out,
                    TensorD& c_out) {
  std::size_t B = x.shape[0], I = x.shape[1], H = h.shape[1];
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  h_out = TensorD({B, H});
  c_out = TensorD({B, H});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t u = 0; u < H; ++u) {
      double pre[4];
      for (int gate = 0; gate < 4; ++gate) {
        std::size_t row = std::size_t(gate) * H + u;
        double acc = b_ih[row] + b_hh[row];
        for (std::size_t i = 0; i < I; ++i) acc += w_ih.at2(row, i) * x.at2(b, i);
        for (std::size_t j = 0; j < H; ++j) acc += w_hh.at2(row, j) * h.at2(b, j);
        pre[gate] = acc;
      }
      double ig = sig(pre[0]), fg = sig(pre[1]), gg = std::tanh(pre[2]), og = sig(pre[3]);
      double cn = fg * c.at2(b, u) + ig * gg;
      c_out.at2(b, u) = cn;
      h_out.at2(b, u) = og * std::tanh(cn);
    }
  }
}

}  // namespace

TEST_CASE("conv2d worked examples") {
  // 3x3 all-ones against 3x3 all-ones kernel: a single 9.
  Var<double> x(TensorD({1, 1, 3, 3}, 1.0));
  Var<double> w(TensorD({1, 1, 3, 3}, 1.0));
  Var<double> b(TensorD({1}, 0.0));
  Var<double> y = conv2d(x, w, b, 1, 0);
  CHECK(y.value().shape == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(y.value()[0] == doctest::Approx(9.0));

  // Identity 1x1 kernel.
  Rng rng(5);
  TensorD xr = random_tensor({2, 1, 4, 4}, rng);
  Var<double> xi(xr);
  Var<double> wi(TensorD({1, 1, 1, 1}, 1.0));
  Var<double> yi = conv2d(xi, wi, b, 1, 0);
  CHECK(yi.value().data == xr.data);

  // Output height rule.
  Var<double> xs(random_tensor({1, 2, 9, 9}, rng));
  Var<double> ws(random_tensor({3, 2, 3, 3}, rng));
  Var<double> bs(TensorD({3}, 0.0));
  CHECK(conv2d(xs, ws, bs, 2, 1).value().shape == std::vector<std::size_t>{1, 3, 5, 5});

  CHECK_THROWS_AS(conv2d(xs, Var<double>(random_tensor({3, 1, 3, 3}, rng)), bs, 1, 1),
                  ValidationError);
}

TEST_CASE("conv2d matches the naive reference on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t N = std::size_t(rng.uniform_int(1, 3));
    std::size_t C = std::size_t(rng.uniform_int(1, 4));
    std::size_t K = std::size_t(rng.uniform_int(1, 4));
    std::size_t H = std::size_t(rng.uniform_int(4, 9));
    std::size_t W = std::size_t(rng.uniform_int(4, 9));
    std::size_t k = std::size_t(rng.uniform_int(1, 3));
    std::size_t stride = std::size_t(rng.uniform_int(1, 2));
    std::size_t pad = std::size_t(rng.uniform_int(0, 1));
    TensorD x = random_tensor({N, C, H, W}, rng);
    TensorD w = random_tensor({K, C, k, k}, rng);
    TensorD b = random_tensor({K}, rng);
    TensorD ref = conv_reference(x, w, b, stride, pad);
    Var<double> y = conv2d(Var<double>(x), Var<double>(w), Var<double>(b), stride, pad);
    REQUIRE(y.value().shape == ref.shape);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      REQUIRE(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("batch norm train and eval modes") {
  Rng rng(9);
  std::size_t C = 3;
  TensorD gamma({C}, 1.0), beta({C}, 0.0);
  TensorD rm({C}, 0.0), rv({C}, 1.0);

  // Zero-mean unit-variance input stays (nearly) itself in train mode.
  TensorD x({4, C, 5, 5});
  for (std::size_t c = 0; c < C; ++c) {
    // fill one channel with a symmetric +-1 pattern: mean 0, var 1
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) x.data[(n * C + c) * 25 + i] = (i % 2 == 0) ? 1.0 : -1.0;
  }
  // 25 odd: counts 13 vs 12 per plane; recenter exactly
  double mean = (13.0 - 12.0) / 25.0;
  for (auto& v : x.data) v -= mean;
  // Every plane carries the same pattern, so the per-channel variance equals
  // the variance over the whole tensor.
  double var = 0.0;
  for (double v : x.data) var += v * v;
  var /= double(x.size());
  Var<double> vx(x);
  Var<double> vg(gamma), vb(beta);
  Var<double> y = batch_norm2d(vx, vg, vb, &rm, &rv, true);
  for (std::size_t i = 0; i < y.value().size(); ++i) {
    REQUIRE(y.value()[i] == doctest::Approx(x.data[i] / std::sqrt(var + 1e-5)).epsilon(1e-6));
  }
  // Running stats moved toward the batch stats with momentum 0.1.
  CHECK(rm[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rv[0] == doctest::Approx(0.9 * 1.0 + 0.1 * var * 100.0 / 99.0).epsilon(1e-9));

  // gamma = 0 collapses the output to beta.
  TensorD gz({C}, 0.0), bz({C}, 2.5);
  TensorD rm2({C}, 0.0), rv2({C}, 1.0);
  Var<double> y2 = batch_norm2d(Var<double>(random_tensor({2, C, 4, 4}, rng)), Var<double>(gz),
                                Var<double>(bz), &rm2, &rv2, true);
  for (double v : y2.value().data) REQUIRE(v == doctest::Approx(2.5));

  // Eval mode: hand-computed from stored statistics.
  TensorD rm3({C}), rv3({C});
  for (std::size_t c = 0; c < C; ++c) {
    rm3[c] = 0.5 * double(c);
    rv3[c] = 1.0 + double(c);
  }
  TensorD g3({C}), b3({C});
  for (std::size_t c = 0; c < C; ++c) {
    g3[c] = 2.0;
    b3[c] = -1.0;
  }
  TensorD x3 = random_tensor({2, C, 2, 2}, rng);
  Var<double> y3 = batch_norm2d(Var<double>(x3), Var<double>(g3), Var<double>(b3), &rm3, &rv3,
                                false);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < 4; ++i) {
        double expect =
            2.0 * (x3.data[(n * C + c) * 4 + i] - rm3[c]) / std::sqrt(rv3[c] + 1e-5) - 1.0;
        REQUIRE(y3.value().data[(n * C + c) * 4 + i] == doctest::Approx(expect).epsilon(1e-12));
      }

  // Batch of one value per channel cannot be normalized in train mode.
  TensorD tiny({1, C, 1, 1}, 1.0);
  CHECK_THROWS_AS(batch_norm2d(Var<double>(tiny), vg, vb, &rm, &rv, true), ValidationError);
}

TEST_CASE("relu, pooling, gap, linear, sigmoid basics") {
  CHECK(relu(Var<double>(TensorD({1}, -1.0))).value()[0] == 0.0);
  CHECK(relu(Var<double>(TensorD({1}, 2.0))).value()[0] == 2.0);

  // GAP of a constant channel is that constant.
  TensorD xc({2, 3, 4, 4});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 16; ++i) xc.data[(n * 3 + c) * 16 + i] = double(c) + 0.5;
  Var<double> g = global_avg_pool(Var<double>(xc));
  CHECK(g.value().shape == std::vector<std::size_t>{2, 3});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c) REQUIRE(g.value().at2(n, c) == doctest::Approx(c + 0.5));

  // Identity-weight linear.
  TensorD w({3, 3}, 0.0);
  for (int i = 0; i < 3; ++i) w.at2(std::size_t(i), std::size_t(i)) = 1.0;
  Rng rng(11);
  TensorD x = random_tensor({4, 3}, rng);
  Var<double> y = linear(Var<double>(x), Var<double>(w), Var<double>(TensorD({3}, 0.0)));
  CHECK(y.value().data == x.data);

  CHECK(sigmoid(Var<double>(TensorD({1}, 0.0))).value()[0] == doctest::Approx(0.5));

  // Max pool 2x2/2 picks window maxima.
  TensorD mp({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) mp[i] = double(i);
  Var<double> pooled = max_pool2d(Var<double>(mp), 2, 2);
  CHECK(pooled.value().shape == std::vector<std::size_t>{1, 1, 2, 2});
  CHECK(pooled.value()[0] == 5.0);
  CHECK(pooled.value()[3] == 15.0);

  // 3x3 stride-2 pad-1 (the ResNet stem pool) keeps the shape rule.
  TensorD mp2 = random_tensor({2, 3, 8, 8}, rng);
  CHECK(max_pool2d(Var<double>(mp2), 3, 2, 1).value().shape ==
        std::vector<std::size_t>{2, 3, 4, 4});
}

TEST_CASE("losses: worked values and formula checks") {
  Rng rng(13);
  TensorD p = random_tensor({3, 4}, rng);
  Var<double> vp(p);
  CHECK(mse_loss(vp, p).value()[0] == doctest::Approx(0.0));

  TensorD t = random_tensor({3, 4}, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < 12; ++i) expect += (p[i] - t[i]) * (p[i] - t[i]);
  expect /= 12.0;
  CHECK(mse_loss(vp, t).value()[0] == doctest::Approx(expect).epsilon(1e-12));

  // BCE of probability 0.5 is ln 2 for either label.
  TensorD half({2, 1}, 0.5);
  TensorD labels({2, 1});
  labels[0] = 0.0;
  labels[1] = 1.0;
  CHECK(bce_loss(Var<double>(half), labels).value()[0] == doctest::Approx(std::log(2.0)));

  // Random case against the direct formula.
  TensorD probs({5, 1}), ls({5, 1});
  for (int i = 0; i < 5; ++i) {
    probs[std::size_t(i)] = rng.uniform(0.05, 0.95);
    ls[std::size_t(i)] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  double bce = 0.0;
  for (int i = 0; i < 5; ++i) {
    double pv = probs[std::size_t(i)], y = ls[std::size_t(i)];
    bce -= y * std::log(pv) + (1 - y) * std::log(1 - pv);
  }
  bce /= 5.0;
  CHECK(bce_loss(Var<double>(probs), ls).value()[0] == doctest::Approx(bce).epsilon(1e-12));
}

TEST_CASE("lstm cell closed forms and reference agreement") {
  Rng rng(17);
  std::size_t B = 2, I = 3, H = 4;

  // Zero weights and biases: i = f = o = 0.5, g = 0.
  ParamRegistry<double> reg;
  LSTMCellLayer<double> cell(reg, "cell", I, H, rng);
  for (auto& e : reg.entries()) std::fill(e.var.value().data.begin(), e.var.value().data.end(), 0.0);

  TensorD x = random_tensor({B, I}, rng);
  TensorD h0 = random_tensor({B, H}, rng);
  TensorD c0 = random_tensor({B, H}, rng);
  auto [h1, c1] = cell(Var<double>(x), Var<double>(h0), Var<double>(c0));
  for (std::size_t i = 0; i < B * H; ++i) {
    REQUIRE(c1.value()[i] == doctest::Approx(0.5 * c0[i]).epsilon(1e-12));
    REQUIRE(h1.value()[i] == doctest::Approx(0.5 * std::tanh(0.5 * c0[i])).epsilon(1e-12));
  }

  // Zero state and zero input give h' = 0.
  TensorD zx({B, I}, 0.0), zh({B, H}, 0.0), zc({B, H}, 0.0);
  auto [h2, c2] = cell(Var<double>(zx), Var<double>(zh), Var<double>(zc));
  for (double v : h2.value().data) REQUIRE(v == doctest::Approx(0.0));

  // Random instances match the scalar-loop reference within 1e-12.
  for (int trial = 0; trial < 20; ++trial) {
    ParamRegistry<double> r2;
    LSTMCellLayer<double> c2l(r2, "cell", I, H, rng);
    TensorD xr = random_tensor({B, I}, rng);
    TensorD hr = random_tensor({B, H}, rng);
    TensorD cr = random_tensor({B, H}, rng);
    auto [hn, cn] = c2l(Var<double>(xr), Var<double>(hr), Var<double>(cr));
    TensorD h_ref, c_ref;
    lstm_reference(xr, hr, cr, c2l.w_ih.value(), c2l.w_hh.value(), c2l.b_ih.value(),
                   c2l.b_hh.value(), h_ref, c_ref);
    for (std::size_t i = 0; i < B * H; ++i) {
      REQUIRE(hn.value()[i] == doctest::Approx(h_ref[i]).epsilon(1e-12));
      REQUIRE(cn.value()[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("residual block zero-weight and shape behavior") {
  Rng rng(19);
  ParamRegistry<double> reg;
  BasicBlock<double> block(reg, "block", 4, 4, false, rng);
  // Zero both conv kernels: the block reduces to relu of the identity path.
  for (const char* name : {"block.conv1.weight", "block.conv2.weight"}) {
    auto* e = reg.find(name);
    REQUIRE(e != nullptr);
    std::fill(e->var.value().data.begin(), e->var.value().data.end(), 0.0);
  }
  TensorD x = random_tensor({2, 4, 6, 6}, rng);
  Var<double> y = block(Var<double>(x), true);
  for (std::size_t i = 0; i < x.size(); ++i) {
    REQUIRE(y.value()[i] == doctest::Approx(std::max(x[i], 0.0)).epsilon(1e-12));
  }

  // Downsampling halves the spatial extent and doubles the channels.
  ParamRegistry<double> reg2;
  BasicBlock<double> down(reg2, "down", 4, 8, true, rng);
  Var<double> yd = down(Var<double>(random_tensor({2, 4, 6, 6}, rng)), true);
  CHECK(yd.value().shape == std::vector<std::size_t>{2, 8, 3, 3});
}

TEST_CASE("parameter registry rejects duplicates and counts trainables") {
  ParamRegistry<double> reg;
  reg.add("a", TensorD({2, 2}, 0.0));
  reg.add("b", TensorD({3}, 0.0), false);
  CHECK_THROWS_AS(reg.add("a", TensorD({1}, 0.0)), ValidationError);
  CHECK(reg.parameter_count() == 4);
  CHECK(reg.entries().size() == 2);
}
