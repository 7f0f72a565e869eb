#pragma once

// Binary NetPBM emission (P5 grayscale, P6 RGB), maxval 255. The byte layout
// is the plain header followed by raw samples, so identical inputs produce
// identical files on every platform.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace did {

inline std::string encode_pgm(std::size_t width, std::size_t height,
                              const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height)
    throw std::invalid_argument("encode_pgm: pixel count does not match dimensions");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

inline std::string encode_ppm(std::size_t width, std::size_t height,
                              const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != width * height * 3)
    throw std::invalid_argument("encode_ppm: pixel count does not match dimensions");
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

inline void write_pgm(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint8_t>& pixels) {
  write_file_bytes(path, encode_pgm(width, height, pixels));
}

inline void write_ppm(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint8_t>& rgb) {
  write_file_bytes(path, encode_ppm(width, height, rgb));
}

}  // namespace did
