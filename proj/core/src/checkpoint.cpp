#include "mmpn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mmpn/errors.hpp"

namespace mmpn::nn {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += char((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += char((v >> (8 * i)) & 0xff);
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  bool eof() const { return pos_ == data_.size(); }

  std::uint8_t u8() {
    need(1);
    return std::uint8_t(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(data_[pos_++])) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw ValidationError(path_ + ": truncated checkpoint");
    }
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint_raw(const std::string& path, const std::vector<RawTensorRecord>& records) {
  std::string out = "MMPN";
  put_u32(out, kCheckpointVersion);
  for (const auto& r : records) {
    put_u32(out, std::uint32_t(r.name.size()));
    out += r.name;
    out += char(r.dtype);
    put_u32(out, std::uint32_t(r.dims.size()));
    std::uint64_t count = 1;
    for (std::uint64_t d : r.dims) {
      put_u64(out, d);
      count *= d;
    }
    if (count != r.values.size()) {
      throw ValidationError("checkpoint: dims of '" + r.name + "' do not match value count");
    }
    if (r.dtype == 0) {
      for (double v : r.values) put_u32(out, std::bit_cast<std::uint32_t>(float(v)));
    } else if (r.dtype == 1) {
      for (double v : r.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else {
      throw ValidationError("checkpoint: unknown dtype tag for '" + r.name + "'");
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw ValidationError("write failed: " + path);
}

std::vector<RawTensorRecord> read_checkpoint_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(std::move(data), path);
  if (r.bytes(4) != "MMPN") throw ValidationError(path + ": bad magic, not a checkpoint");
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ValidationError(path + ": unsupported checkpoint version " + std::to_string(version));
  }

  std::vector<RawTensorRecord> records;
  while (!r.eof()) {
    RawTensorRecord rec;
    std::uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > 4096) {
      throw ValidationError(path + ": implausible tensor name length");
    }
    rec.name = r.bytes(name_len);
    rec.dtype = r.u8();
    if (rec.dtype > 1) throw ValidationError(path + ": unknown dtype tag in '" + rec.name + "'");
    std::uint32_t rank = r.u32();
    if (rank > 8) throw ValidationError(path + ": implausible rank in '" + rec.name + "'");
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint64_t d = r.u64();
      if (d == 0 || count > (1ull << 32) / std::max<std::uint64_t>(d, 1)) {
        throw ValidationError(path + ": implausible dims in '" + rec.name + "'");
      }
      rec.dims.push_back(d);
      count *= d;
    }
    rec.values.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      if (rec.dtype == 0) {
        rec.values.push_back(double(std::bit_cast<float>(r.u32())));
      } else {
        rec.values.push_back(std::bit_cast<double>(r.u64()));
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace mmpn::nn
