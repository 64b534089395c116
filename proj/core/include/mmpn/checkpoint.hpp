#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmpn/layers.hpp"

namespace mmpn::nn {

// Checkpoint file layout (all integers little-endian):
//   magic   "MMPN" (4 bytes)
//   version u32 (currently 1)
//   then per tensor, until EOF:
//     name_len u32, name bytes (UTF-8)
//     dtype    u8  (0 = float32, 1 = float64)
//     rank     u32
//     dims     rank x u64
//     values   little-endian IEEE-754, row-major
struct RawTensorRecord {
  std::string name;
  std::uint8_t dtype = 1;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;  // widened on read; narrowed on f32 write
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint_raw(const std::string& path, const std::vector<RawTensorRecord>& records);
std::vector<RawTensorRecord> read_checkpoint_raw(const std::string& path);

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 0 : 1;
}

// Saves every registry entry (trainable parameters and buffers alike).
template <typename T>
void save_checkpoint(const std::string& path, const ParamRegistry<T>& params) {
  std::vector<RawTensorRecord> records;
  for (const auto& e : params.entries()) {
    RawTensorRecord r;
    r.name = e.name;
    r.dtype = dtype_tag<T>();
    for (std::size_t d : e.var.value().shape) r.dims.push_back(d);
    r.values.assign(e.var.value().data.begin(), e.var.value().data.end());
    records.push_back(std::move(r));
  }
  write_checkpoint_raw(path, records);
}

// Fills an existing registry. Every file record must match a registry entry
// by name, shape and dtype, and every entry must be filled exactly once.
template <typename T>
void load_checkpoint(const std::string& path, ParamRegistry<T>& params) {
  auto records = read_checkpoint_raw(path);
  std::vector<bool> filled(params.entries().size(), false);
  for (const auto& r : records) {
    bool matched = false;
    for (std::size_t i = 0; i < params.entries().size(); ++i) {
      auto& e = params.entries()[i];
      if (e.name != r.name) continue;
      if (filled[i]) throw ValidationError(path + ": duplicate tensor '" + r.name + "'");
      if (r.dtype != dtype_tag<T>()) {
        throw ValidationError(path + ": tensor '" + r.name + "' has dtype tag " +
                              std::to_string(int(r.dtype)) + ", model expects " +
                              std::to_string(int(dtype_tag<T>())));
      }
      const auto& shape = e.var.value().shape;
      bool shape_ok = shape.size() == r.dims.size();
      for (std::size_t d = 0; shape_ok && d < shape.size(); ++d) {
        shape_ok = shape[d] == r.dims[d];
      }
      if (!shape_ok) throw ValidationError(path + ": tensor '" + r.name + "' shape mismatch");
      auto& dst = e.var.node()->value.data;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = T(r.values[k]);
      filled[i] = true;
      matched = true;
      break;
    }
    if (!matched) throw ValidationError(path + ": unknown tensor '" + r.name + "'");
  }
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!filled[i]) {
      throw ValidationError(path + ": missing tensor '" + params.entries()[i].name + "'");
    }
  }
}

}  // namespace mmpn::nn
