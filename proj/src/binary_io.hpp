#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "crossloc/errors.hpp"

// Little-endian stream helpers shared by the binary file formats.
namespace crossloc::io {

template <typename T>
void put_le(std::ofstream& f, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  }
  f.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& f, const std::string& path) {
  unsigned char b[sizeof(T)];
  f.read(reinterpret_cast<char*>(b), sizeof(T));
  if (f.gcount() != sizeof(T)) throw DataError("truncated file: " + path);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(b[i]) << (8 * i);
  }
  return v;
}

inline void put_f32(std::ofstream& f, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_le<std::uint32_t>(f, bits);
}

inline float get_f32(std::ifstream& f, const std::string& path) {
  const std::uint32_t bits = get_le<std::uint32_t>(f, path);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline void put_f64(std::ofstream& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_le<std::uint64_t>(f, bits);
}

inline double get_f64(std::ifstream& f, const std::string& path) {
  const std::uint64_t bits = get_le<std::uint64_t>(f, path);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace crossloc::io
