#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "voxhand/common.hpp"

namespace voxhand::binio {

// Little-endian primitives for the binary container formats. Multi-byte
// values are assembled bytewise so the code is endian-agnostic.

inline void write_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline std::uint16_t read_u16(std::istream& is, const std::string& what) {
  const long long off = static_cast<long long>(is.tellg());
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2))
    throw FormatError("unexpected end of file at offset " + std::to_string(off) + " reading " +
                      what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  const long long off = static_cast<long long>(is.tellg());
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("unexpected end of file at offset " + std::to_string(off) + " reading " +
                      what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& is, const std::string& what) {
  const std::uint32_t bits = read_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& format) {
  char got[4];
  if (!is.read(got, 4)) throw FormatError(format + ": file too short for magic");
  if (std::memcmp(got, magic, 4) != 0)
    throw FormatError(format + ": bad magic at offset 0, not a " + format + " file");
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const std::string& what,
                               std::uint32_t max_len = 1 << 20) {
  const std::uint32_t n = read_u32(is, what + " length");
  if (n > max_len) throw FormatError(what + " length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw FormatError("unexpected end of file reading " + what);
  return s;
}

}  // namespace voxhand::binio
