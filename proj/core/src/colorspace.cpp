#include "mmpn/colorspace.hpp"

#include <cmath>

namespace mmpn::img {

namespace {

constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

// sRGB linear -> XYZ (D65). The XYZ -> linear matrix is the exact inverse of
// this one so the round trip is limited only by rounding noise.
constexpr double kFwd[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                               {0.2126729, 0.7151522, 0.0721750},
                               {0.0193339, 0.1191920, 0.9503041}};

struct Inverse3 {
  double m[3][3];
  Inverse3() {
    const auto& a = kFwd;
    double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                 a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                 a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  }
};

const Inverse3& inv_matrix() {
  static const Inverse3 inv;
  return inv;
}

double srgb_to_linear(double v) {
  double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double lin) {
  double c = lin <= 0.0031308 ? 12.92 * lin : 1.055 * std::pow(lin, 1.0 / 2.4) - 0.055;
  return c * 255.0;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

}  // namespace

Lab rgb_to_lab(double r, double g, double b) {
  double rl = srgb_to_linear(r);
  double gl = srgb_to_linear(g);
  double bl = srgb_to_linear(b);
  double x = kFwd[0][0] * rl + kFwd[0][1] * gl + kFwd[0][2] * bl;
  double y = kFwd[1][0] * rl + kFwd[1][1] * gl + kFwd[1][2] * bl;
  double z = kFwd[2][0] * rl + kFwd[2][1] * gl + kFwd[2][2] * bl;
  double fx = lab_f(x / kXn);
  double fy = lab_f(y / kYn);
  double fz = lab_f(z / kZn);
  return Lab{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void lab_to_rgb(const Lab& lab, double& r, double& g, double& b) {
  double fy = (lab.l + 16.0) / 116.0;
  double fx = fy + lab.a / 500.0;
  double fz = fy - lab.b / 200.0;
  double x = kXn * lab_f_inv(fx);
  double y = kYn * lab_f_inv(fy);
  double z = kZn * lab_f_inv(fz);
  const auto& inv = inv_matrix().m;
  double rl = inv[0][0] * x + inv[0][1] * y + inv[0][2] * z;
  double gl = inv[1][0] * x + inv[1][1] * y + inv[1][2] * z;
  double bl = inv[2][0] * x + inv[2][1] * y + inv[2][2] * z;
  r = linear_to_srgb(rl);
  g = linear_to_srgb(gl);
  b = linear_to_srgb(bl);
}

LabPlanes rgb_to_lab(const ImageU8& im) {
  LabPlanes p;
  p.width = im.width;
  p.height = im.height;
  std::size_t n = std::size_t(im.width) * im.height;
  p.l.resize(n);
  p.a.resize(n);
  p.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Lab lab = rgb_to_lab(im.data[i * 3], im.data[i * 3 + 1], im.data[i * 3 + 2]);
    p.l[i] = lab.l;
    p.a[i] = lab.a;
    p.b[i] = lab.b;
  }
  return p;
}

ImageU8 lab_to_rgb(const LabPlanes& planes) {
  ImageU8 out;
  out.width = planes.width;
  out.height = planes.height;
  std::size_t n = std::size_t(planes.width) * planes.height;
  out.data.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    double r, g, b;
    lab_to_rgb(Lab{planes.l[i], planes.a[i], planes.b[i]}, r, g, b);
    auto clamp8 = [](double v) {
      v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
      return std::uint8_t(v + 0.5);
    };
    out.data[i * 3] = clamp8(r);
    out.data[i * 3 + 1] = clamp8(g);
    out.data[i * 3 + 2] = clamp8(b);
  }
  return out;
}

}  // namespace mmpn::img
