#include "mmpn/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "mmpn/errors.hpp"

namespace mmpn::explain {

Heatmap cam_from_activation(const std::vector<double>& activation,
                            const std::vector<double>& gradient, int channels, int height,
                            int width, int side) {
  std::size_t plane = std::size_t(height) * width;
  if (activation.size() != std::size_t(channels) * plane || activation.size() != gradient.size()) {
    throw ValidationError("cam_from_activation: size mismatch");
  }

  Heatmap h;
  h.grid_h = height;
  h.grid_w = width;
  h.side = side;
  h.grid.assign(plane, 0.0);

  bool any_grad = false;
  for (int c = 0; c < channels; ++c) {
    const double* g = gradient.data() + std::size_t(c) * plane;
    double alpha = 0.0;
    for (std::size_t i = 0; i < plane; ++i) alpha += g[i];
    alpha /= double(plane);
    if (alpha != 0.0) any_grad = true;
    const double* a = activation.data() + std::size_t(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) h.grid[i] += alpha * a[i];
  }
  for (double& v : h.grid) v = v > 0.0 ? v : 0.0;

  h.upsampled = bilinear_upsample(h.grid, height, width, side);
  double peak = 0.0;
  for (double v : h.upsampled) peak = std::max(peak, v);
  if (peak > 0.0) {
    for (double& v : h.upsampled) v /= peak;
  } else {
    h.zero_gradient = !any_grad;
    std::fill(h.upsampled.begin(), h.upsampled.end(), 0.0);
  }
  return h;
}

std::vector<double> bilinear_upsample(const std::vector<double>& grid, int h, int w, int side) {
  if (grid.size() != std::size_t(h) * w) throw ValidationError("bilinear_upsample: size mismatch");
  std::vector<double> out(std::size_t(side) * side);
  double sy = double(h) / double(side);
  double sx = double(w) / double(side);
  for (int y = 0; y < side; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(h - 1));
    int y0 = std::min(int(fy), h > 1 ? h - 2 : 0);
    double wy = h > 1 ? fy - y0 : 0.0;
    for (int x = 0; x < side; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(w - 1));
      int x0 = std::min(int(fx), w > 1 ? w - 2 : 0);
      double wx = w > 1 ? fx - x0 : 0.0;
      double v00 = grid[std::size_t(y0) * w + x0];
      double v10 = grid[std::size_t(y0) * w + std::min(x0 + 1, w - 1)];
      double v01 = grid[std::size_t(std::min(y0 + 1, h - 1)) * w + x0];
      double v11 = grid[std::size_t(std::min(y0 + 1, h - 1)) * w + std::min(x0 + 1, w - 1)];
      out[std::size_t(y) * side + x] =
          (1 - wy) * ((1 - wx) * v00 + wx * v10) + wy * ((1 - wx) * v01 + wx * v11);
    }
  }
  return out;
}

const std::array<std::array<std::uint8_t, 3>, 256>& heat_colormap() {
  static const auto table = [] {
    std::array<std::array<std::uint8_t, 3>, 256> t{};
    for (int i = 0; i < 256; ++i) {
      double u = double(i) / 255.0;
      // Blue through cyan-ish midtones to red.
      double r = std::clamp(1.5 * u - 0.25, 0.0, 1.0);
      double g = std::clamp(1.0 - std::fabs(2.0 * u - 1.0), 0.0, 1.0) * 0.85;
      double b = std::clamp(1.25 - 1.5 * u, 0.0, 1.0);
      t[std::size_t(i)] = {std::uint8_t(r * 255.0 + 0.5), std::uint8_t(g * 255.0 + 0.5),
                           std::uint8_t(b * 255.0 + 0.5)};
    }
    return t;
  }();
  return table;
}

img::ImageU8 overlay(const Heatmap& heat, const img::ImageF& image, double alpha) {
  if (image.width != heat.side || image.height != heat.side) {
    throw ValidationError("overlay: heatmap side does not match image");
  }
  const auto& cmap = heat_colormap();
  img::ImageU8 out = img::make_u8(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double v = heat.upsampled[std::size_t(y) * heat.side + x];
      int idx = std::clamp(int(v * 255.0 + 0.5), 0, 255);
      for (int c = 0; c < 3; ++c) {
        double blended = (1.0 - alpha) * image.at(x, y, c) * 255.0 + alpha * double(cmap[std::size_t(idx)][std::size_t(c)]);
        out.at(x, y, c) = std::uint8_t(std::clamp(blended, 0.0, 255.0) + 0.5);
      }
    }
  }
  return out;
}

}  // namespace mmpn::explain
