#pragma once

#include <cstdint>
#include <vector>

#include "mmpn/errors.hpp"

namespace mmpn::img {

// 8-bit RGB, interleaved rows. The raw-capture format.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // size = width * height * 3

  std::uint8_t& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
};

// Real-valued RGB, interleaved. Enhanced images are square with values in
// [0, 1]; intermediates may hold any finite range.
struct ImageF {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // size = width * height * 3

  double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
};

inline ImageU8 make_u8(int w, int h, std::uint8_t fill = 0) {
  if (w <= 0 || h <= 0) throw ValidationError("make_u8: non-positive size");
  return ImageU8{w, h, std::vector<std::uint8_t>(std::size_t(w) * h * 3, fill)};
}

inline ImageF make_f(int w, int h, double fill = 0.0) {
  if (w <= 0 || h <= 0) throw ValidationError("make_f: non-positive size");
  return ImageF{w, h, std::vector<double>(std::size_t(w) * h * 3, fill)};
}

inline ImageF to_f(const ImageU8& u) {
  ImageF f{u.width, u.height, std::vector<double>(u.data.size())};
  for (std::size_t i = 0; i < u.data.size(); ++i) f.data[i] = double(u.data[i]);
  return f;
}

// Rounds to nearest and clamps to [0, 255].
inline ImageU8 to_u8(const ImageF& f, double scale = 1.0) {
  ImageU8 u{f.width, f.height, std::vector<std::uint8_t>(f.data.size())};
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    double v = f.data[i] * scale;
    v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
    u.data[i] = std::uint8_t(v + 0.5);
  }
  return u;
}

inline void check_raw(const ImageU8& im, const char* who) {
  if (im.width < 16 || im.height < 16) {
    throw ValidationError(std::string(who) + ": image smaller than 16x16");
  }
  if (im.data.size() != std::size_t(im.width) * im.height * 3) {
    throw ValidationError(std::string(who) + ": pixel buffer does not match dimensions");
  }
}

}  // namespace mmpn::img
