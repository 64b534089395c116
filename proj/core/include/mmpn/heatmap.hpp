#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mmpn/image.hpp"

namespace mmpn::explain {

// Grad-CAM output: the coarse grid at last-conv resolution plus its bilinear
// upsampling to the input side, max-normalized to [0, 1]. An all-zero
// gradient yields an all-zero map with the flag set.
struct Heatmap {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<double> grid;       // nonnegative
  int side = 0;
  std::vector<double> upsampled;  // side x side in [0, 1]
  bool zero_gradient = false;
};

// relu(sum_k alpha_k * A_k) with alpha_k the spatial mean of the gradient on
// channel k. `activation` and `gradient` are C x H x W, row-major.
Heatmap cam_from_activation(const std::vector<double>& activation,
                            const std::vector<double>& gradient, int channels, int height,
                            int width, int side);

std::vector<double> bilinear_upsample(const std::vector<double>& grid, int h, int w, int side);

// Fixed 256-entry blue-to-red colormap (values 0..255 per channel).
const std::array<std::array<std::uint8_t, 3>, 256>& heat_colormap();

// Colormapped heatmap alpha-blended over an image with values in [0, 1].
img::ImageU8 overlay(const Heatmap& heat, const img::ImageF& image, double alpha = 0.4);

}  // namespace mmpn::explain
