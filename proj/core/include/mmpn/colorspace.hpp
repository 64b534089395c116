#pragma once

#include "mmpn/image.hpp"

namespace mmpn::img {

struct Lab {
  double l;  // 0..100
  double a;
  double b;
};

// sRGB (0..255 per channel) <-> CIELAB under the D65 white point.
Lab rgb_to_lab(double r, double g, double b);
void lab_to_rgb(const Lab& lab, double& r, double& g, double& b);

// Planar L/a/b arrays for a whole image.
struct LabPlanes {
  int width = 0;
  int height = 0;
  std::vector<double> l, a, b;
};

LabPlanes rgb_to_lab(const ImageU8& im);
ImageU8 lab_to_rgb(const LabPlanes& planes);

}  // namespace mmpn::img
