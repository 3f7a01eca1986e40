#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "dcmn/params.hpp"

// Little-endian primitives shared by the checkpoint and encoding formats.
namespace dcmn::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  out.write(reinterpret_cast<const char*>(&f), sizeof f);
}

inline void write_bytes(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError(std::string("truncated file while reading ") + what);
  return v;
}

inline double read_f32(std::istream& in) {
  float f = 0;
  if (!in.read(reinterpret_cast<char*>(&f), sizeof f))
    throw FormatError("truncated file while reading float data");
  return static_cast<double>(f);
}

inline std::string read_bytes(std::istream& in, const char* what, std::uint32_t limit = 1u << 20) {
  const std::uint32_t n = read_u32(in, what);
  if (n > limit) throw FormatError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError(std::string("truncated ") + what);
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4] = {};
  if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
}

}  // namespace dcmn::io
