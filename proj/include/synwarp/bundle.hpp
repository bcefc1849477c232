#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "synwarp/tensor.hpp"

// Tensor-bundle binary format shared by checkpoints, dataset metadata, and
// dumped intermediates:
//   magic "SWNB", u32 version=1, u32 entry count;
//   per entry: u16 name length, name bytes, u8 dtype (0=f32, 1=f64),
//              u8 ndim, u32 dims[ndim], raw little-endian values.

namespace synwarp {

static_assert(std::endian::native == std::endian::little,
              "bundle I/O assumes a little-endian host");

class Bundle {
 public:
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, Tensor> f32;
  std::map<std::string, TensorD> f64;

  bool has(const std::string& name) const {
    return f32.count(name) > 0 || f64.count(name) > 0;
  }

  const Tensor& get_f32(const std::string& name) const {
    auto it = f32.find(name);
    if (it == f32.end()) throw IoError("bundle entry missing: " + name);
    return it->second;
  }

  const TensorD& get_f64(const std::string& name) const {
    auto it = f64.find(name);
    if (it == f64.end()) throw IoError("bundle entry missing: " + name);
    return it->second;
  }

  double scalar(const std::string& name) const {
    if (auto it = f64.find(name); it != f64.end()) {
      check_arg(it->second.numel() == 1, "bundle entry not scalar: " + name);
      return it->second[0];
    }
    const Tensor& t = get_f32(name);
    check_arg(t.numel() == 1, "bundle entry not scalar: " + name);
    return t[0];
  }

  void put_scalar(const std::string& name, double v) { f64[name] = TensorD::full({1}, v); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write("SWNB", 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(f32.size() + f64.size()));
    for (const auto& [name, t] : f32) write_entry(out, name, 0, t);
    for (const auto& [name, t] : f64) write_entry(out, name, 1, t);
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
  }

  static Bundle load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SWNB", 4) != 0)
      throw IoError("bad bundle magic: " + path.string());
    if (read_u32(in) != kVersion) throw IoError("unsupported bundle version: " + path.string());
    const std::uint32_t count = read_u32(in);
    Bundle b;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint16_t nlen;
      read_raw(in, &nlen, sizeof nlen);
      std::string name(nlen, '\0');
      read_raw(in, name.data(), nlen);
      std::uint8_t dtype, ndim;
      read_raw(in, &dtype, 1);
      read_raw(in, &ndim, 1);
      if (dtype > 1) throw IoError("unknown dtype code in bundle: " + path.string());
      if (ndim < 1 || ndim > Shape::kMaxRank) throw IoError("bad rank in bundle: " + path.string());
      std::vector<int> dims(ndim);
      for (auto& d : dims) {
        const std::uint32_t v = read_u32(in);
        if (v == 0 || v > (1u << 28)) throw IoError("bad extent in bundle: " + path.string());
        d = static_cast<int>(v);
      }
      const Shape shape(dims);
      if (dtype == 0) {
        Tensor t(shape);
        read_raw(in, t.data(), sizeof(float) * static_cast<size_t>(t.numel()));
        b.f32[name] = std::move(t);
      } else {
        TensorD t(shape);
        read_raw(in, t.data(), sizeof(double) * static_cast<size_t>(t.numel()));
        b.f64[name] = std::move(t);
      }
    }
    if (!in) throw IoError("truncated bundle: " + path.string());
    return b;
  }

 private:
  static void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    read_raw(in, &v, sizeof v);
    return v;
  }
  static void read_raw(std::istream& in, void* dst, size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in) throw IoError("truncated bundle");
  }
  template <typename T>
  static void write_entry(std::ostream& out, const std::string& name, std::uint8_t dtype,
                          const TensorT<T>& t) {
    check_arg(name.size() <= 0xffff, "bundle name too long: " + name);
    const std::uint16_t nlen = static_cast<std::uint16_t>(name.size());
    out.write(reinterpret_cast<const char*>(&nlen), sizeof nlen);
    out.write(name.data(), nlen);
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t.numel())));
  }
};

}  // namespace synwarp
