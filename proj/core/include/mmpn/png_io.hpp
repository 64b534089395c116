#pragma once

#include <string>

#include "mmpn/image.hpp"

namespace mmpn::img {

// 8-bit RGB PNG. Reading converts palette/grey/alpha/16-bit inputs to RGB8;
// writing always emits color type 2, bit depth 8.
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& image);

}  // namespace mmpn::img
