#include "mmpn/enhance.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mmpn/colorspace.hpp"

namespace mmpn::img {

std::string to_string(QualityFailure f) {
  switch (f) {
    case QualityFailure::F1_bright: return "F1_bright";
    case QualityFailure::F2_dark: return "F2_dark";
    case QualityFailure::F3_color: return "F3_color";
  }
  return "?";
}

std::string failures_to_string(const QualityVerdict& v) {
  std::string out;
  for (const auto& f : v.failures) {
    if (!out.empty()) out += ';';
    out += to_string(f);
  }
  return out;
}

ImageU8 crop_scale(const ImageU8& im, int side) {
  check_raw(im, "crop_scale");
  if (side < 16) throw ValidationError("crop_scale: side must be >= 16");

  int d = std::min(im.width, im.height);
  int x0 = (im.width - d) / 2;
  int y0 = (im.height - d) / 2;

  ImageU8 out = make_u8(side, side);
  double scale = double(d) / double(side);
  for (int y = 0; y < side; ++y) {
    double sy = (y + 0.5) * scale - 0.5;
    double cy = std::clamp(sy, 0.0, double(d - 1));
    int iy = std::min(int(cy), d - 2 >= 0 ? d - 2 : 0);
    double fy = cy - iy;
    if (d == 1) { iy = 0; fy = 0.0; }
    for (int x = 0; x < side; ++x) {
      double sx = (x + 0.5) * scale - 0.5;
      double cx = std::clamp(sx, 0.0, double(d - 1));
      int ix = std::min(int(cx), d - 2 >= 0 ? d - 2 : 0);
      double fx = cx - ix;
      if (d == 1) { ix = 0; fx = 0.0; }
      for (int c = 0; c < 3; ++c) {
        double v00 = im.at(x0 + ix, y0 + iy, c);
        double v10 = im.at(x0 + std::min(ix + 1, d - 1), y0 + iy, c);
        double v01 = im.at(x0 + ix, y0 + std::min(iy + 1, d - 1), c);
        double v11 = im.at(x0 + std::min(ix + 1, d - 1), y0 + std::min(iy + 1, d - 1), c);
        double v = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
        out.at(x, y, c) = std::uint8_t(std::clamp(v, 0.0, 255.0) + 0.5);
      }
    }
  }
  return out;
}

std::vector<double> grey(const ImageU8& im) {
  std::size_t n = std::size_t(im.width) * im.height;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = 0.299 * im.data[i * 3] + 0.587 * im.data[i * 3 + 1] + 0.114 * im.data[i * 3 + 2];
  }
  return g;
}

QualityMetrics quality_metrics(const ImageU8& im) {
  check_raw(im, "quality_metrics");
  std::vector<double> g = grey(im);
  std::size_t n = g.size();
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  var /= double(n);  // population variance
  double sd = std::sqrt(var);

  // Bright cut: strictly above mean + 3*sd up to the representable maximum.
  // When the statistical threshold exceeds 255 the comparison becomes
  // inclusive at 255 so saturated pixels still count as over-exposed (a
  // strict compare against the cap could never fire).
  double hp_cut = mean + 3.0 * sd;
  bool hp_capped = hp_cut > 255.0;
  if (hp_capped) hp_cut = 255.0;
  double lp_cut = std::max(mean - sd, 5.0);
  std::size_t hp = 0, lp = 0;
  for (double v : g) {
    if (hp_capped ? v >= hp_cut : v > hp_cut) ++hp;
    if (v < lp_cut) ++lp;
  }

  double rsum = 0.0, bsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rsum += im.data[i * 3];
    bsum += im.data[i * 3 + 2];
  }

  QualityMetrics m;
  m.hp_fraction = double(hp) / double(n);
  m.lp_fraction = double(lp) / double(n);
  m.rb_difference = rsum - bsum;
  return m;
}

QualityVerdict quality_filter(const QualityMetrics& m, const QualityThresholds& t) {
  QualityVerdict v;
  if (m.hp_fraction > t.hp_max) v.failures.push_back(QualityFailure::F1_bright);
  if (m.lp_fraction > t.lp_max) v.failures.push_back(QualityFailure::F2_dark);
  if (m.rb_difference < t.ys_min) v.failures.push_back(QualityFailure::F3_color);
  v.pass = v.failures.empty();
  return v;
}

namespace {

// Symmetric reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
    k[std::size_t(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

ImageF gaussian_blur(const ImageF& im, double sigma) {
  if (sigma <= 0.0) throw ValidationError("gaussian_blur: sigma must be positive");
  std::vector<double> k = gaussian_kernel(sigma);
  int radius = int(k.size() / 2);

  ImageF tmp = make_f(im.width, im.height);
  ImageF out = make_f(im.width, im.height);

  // Symmetric taps are paired (x[i-t] + x[i+t]) so the accumulation order is
  // mirror-invariant and blur commutes with flips bitwise.
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = k[std::size_t(radius)] * im.at(x, y, c);
        for (int t = 1; t <= radius; ++t) {
          acc += k[std::size_t(radius + t)] *
                 (im.at(reflect(x - t, im.width), y, c) + im.at(reflect(x + t, im.width), y, c));
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = k[std::size_t(radius)] * tmp.at(x, y, c);
        for (int t = 1; t <= radius; ++t) {
          acc += k[std::size_t(radius + t)] *
                 (tmp.at(x, reflect(y - t, im.height), c) + tmp.at(x, reflect(y + t, im.height), c));
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

ImageF high_boost(const ImageF& im, double sigma, double gain) {
  ImageF blurred = gaussian_blur(im, sigma);
  ImageF out = make_f(im.width, im.height);
  for (std::size_t i = 0; i < im.data.size(); ++i) {
    double mask = im.data[i] - blurred.data[i];
    out.data[i] = im.data[i] + gain * mask;
  }
  double lo = out.data[0], hi = out.data[0];
  for (double v : out.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) {
    std::fill(out.data.begin(), out.data.end(), 0.5);
  } else {
    double inv = 1.0 / (hi - lo);
    for (double& v : out.data) v = (v - lo) * inv;
  }
  return out;
}

std::vector<double> clahe_plane(const std::vector<double>& plane, int width, int height,
                                double lo, double hi, double clip, int tiles) {
  constexpr int kBins = 256;
  if (tiles < 2) throw ValidationError("clahe_plane: need at least a 2x2 tile grid");
  if (clip < 1.0) throw ValidationError("clahe_plane: clip limit must be >= 1");
  if (width < tiles || height < tiles) {
    throw ValidationError("clahe_plane: image smaller than the tile grid");
  }

  auto bin_of = [&](double v) {
    double t = (v - lo) / (hi - lo);
    int b = int(t * kBins);
    return std::clamp(b, 0, kBins - 1);
  };

  // Per-tile clipped, equalized lookup tables. Tile t covers
  // [t*dim/tiles, (t+1)*dim/tiles).
  std::vector<std::array<double, kBins>> luts(std::size_t(tiles) * tiles);
  auto tile_lo = [](int t, int dim, int tiles_) { return t * dim / tiles_; };

  for (int ty = 0; ty < tiles; ++ty) {
    for (int tx = 0; tx < tiles; ++tx) {
      int x0 = tile_lo(tx, width, tiles), x1 = tile_lo(tx + 1, width, tiles);
      int y0 = tile_lo(ty, height, tiles), y1 = tile_lo(ty + 1, height, tiles);
      std::size_t area = std::size_t(x1 - x0) * (y1 - y0);

      std::array<double, kBins> hist{};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          hist[std::size_t(bin_of(plane[std::size_t(y) * width + x]))] += 1.0;
        }
      }

      double limit = clip * double(area) / kBins;
      double excess = 0.0;
      for (double& h : hist) {
        if (h > limit) {
          excess += h - limit;
          h = limit;
        }
      }
      double add = excess / kBins;
      for (double& h : hist) h += add;

      // Scaled CDF as output level in [lo, hi].
      auto& lut = luts[std::size_t(ty) * tiles + tx];
      double cdf = 0.0;
      for (int b = 0; b < kBins; ++b) {
        cdf += hist[std::size_t(b)];
        lut[std::size_t(b)] = lo + (hi - lo) * (cdf / double(area));
      }
    }
  }

  // Bilinear interpolation between the four surrounding tile centers.
  std::vector<double> out(plane.size());
  auto center = [&](int t, int dim) {
    return 0.5 * (tile_lo(t, dim, tiles) + tile_lo(t + 1, dim, tiles));
  };
  for (int y = 0; y < height; ++y) {
    double cy = y;
    int ty0 = tiles - 1, ty1 = tiles - 1;
    double fy = 0.0;
    if (cy <= center(0, height)) {
      ty0 = ty1 = 0;
    } else if (cy < center(tiles - 1, height)) {
      for (int t = 0; t < tiles - 1; ++t) {
        if (cy >= center(t, height) && cy < center(t + 1, height)) {
          ty0 = t;
          ty1 = t + 1;
          fy = (cy - center(t, height)) / (center(t + 1, height) - center(t, height));
          break;
        }
      }
    }
    for (int x = 0; x < width; ++x) {
      double cx = x;
      int tx0 = tiles - 1, tx1 = tiles - 1;
      double fx = 0.0;
      if (cx <= center(0, width)) {
        tx0 = tx1 = 0;
      } else if (cx < center(tiles - 1, width)) {
        for (int t = 0; t < tiles - 1; ++t) {
          if (cx >= center(t, width) && cx < center(t + 1, width)) {
            tx0 = t;
            tx1 = t + 1;
            fx = (cx - center(t, width)) / (center(t + 1, width) - center(t, width));
            break;
          }
        }
      }
      int b = bin_of(plane[std::size_t(y) * width + x]);
      double v00 = luts[std::size_t(ty0) * tiles + tx0][std::size_t(b)];
      double v10 = luts[std::size_t(ty0) * tiles + tx1][std::size_t(b)];
      double v01 = luts[std::size_t(ty1) * tiles + tx0][std::size_t(b)];
      double v11 = luts[std::size_t(ty1) * tiles + tx1][std::size_t(b)];
      out[std::size_t(y) * width + x] =
          (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
    }
  }
  return out;
}

ImageU8 clahe_l(const ImageU8& im, double clip, int tiles) {
  check_raw(im, "clahe_l");
  LabPlanes planes = rgb_to_lab(im);
  planes.l = clahe_plane(planes.l, im.width, im.height, 0.0, 100.0, clip, tiles);
  return lab_to_rgb(planes);
}

ImageF flip_horizontal(const ImageF& im) {
  ImageF out = make_f(im.width, im.height);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = im.at(im.width - 1 - x, y, c);
  return out;
}

ImageF flip_vertical(const ImageF& im) {
  ImageF out = make_f(im.width, im.height);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = im.at(x, im.height - 1 - y, c);
  return out;
}

ImageF augment_flip(const ImageF& im, Rng& rng) {
  bool h = rng.bernoulli(0.5);
  bool v = rng.bernoulli(0.5);
  ImageF out = im;
  if (h) out = flip_horizontal(out);
  if (v) out = flip_vertical(out);
  return out;
}

PreprocessResult preprocess(const ImageU8& im, const EnhanceConfig& cfg) {
  PreprocessResult res;
  ImageU8 cropped = crop_scale(im, cfg.side);
  res.metrics = quality_metrics(cropped);
  res.verdict = quality_filter(res.metrics, cfg.thresholds);
  if (!res.verdict.pass) return res;

  ImageU8 equalized = clahe_l(cropped, cfg.clahe_clip, cfg.clahe_tiles);
  double sigma = cfg.sigma > 0.0 ? cfg.sigma : double(cfg.side) / 32.0;
  ImageF boosted = high_boost(to_f(equalized), sigma, cfg.boost_gain);

  if (cfg.subtract_variant) {
    // Alternate reading of the boost step: original minus the normalized
    // boosted image, rescaled back to [0, 1].
    ImageF diff = make_f(cfg.side, cfg.side);
    for (std::size_t i = 0; i < boosted.data.size(); ++i) {
      diff.data[i] = double(equalized.data[i]) / 255.0 - boosted.data[i];
    }
    double lo = diff.data[0], hi = diff.data[0];
    for (double v : diff.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi == lo) {
      std::fill(diff.data.begin(), diff.data.end(), 0.5);
    } else {
      for (double& v : diff.data) v = (v - lo) / (hi - lo);
    }
    res.image = std::move(diff);
  } else {
    res.image = std::move(boosted);
  }
  return res;
}

}  // namespace mmpn::img
