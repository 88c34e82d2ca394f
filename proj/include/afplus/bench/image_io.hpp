#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "afplus/core/array2d.hpp"
#include "afplus/core/binary_io.hpp"
#include "afplus/core/complex_image.hpp"

namespace afp {

/// pgm16: binary PGM, maxval 65535, [0, 1] quantized (lossy).
/// f32: raw little-endian float32, row-major (lossless for float data).
enum class PixelFormat { Pgm16, F32 };

inline std::string to_string(PixelFormat f) { return f == PixelFormat::Pgm16 ? "pgm16" : "f32"; }

inline PixelFormat parse_pixel_format(const std::string& s) {
  if (s == "pgm16") return PixelFormat::Pgm16;
  if (s == "f32") return PixelFormat::F32;
  throw ContractViolation("unknown pixel format '" + s + "' (expected pgm16 or f32)");
}

inline std::string file_extension(PixelFormat f) { return f == PixelFormat::Pgm16 ? ".pgm" : ".f32"; }

inline void write_image(const std::filesystem::path& path, const RealImage& img, PixelFormat fmt) {
  ByteWriter w;
  if (fmt == PixelFormat::Pgm16) {
    const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
    w.raw(header.data(), header.size());
    for (double v : img.values()) {
      const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
      const std::uint8_t be[2] = {static_cast<std::uint8_t>(q >> 8), static_cast<std::uint8_t>(q & 0xff)};
      w.raw(be, 2);
    }
  } else {
    for (double v : img.values()) w.f32(static_cast<float>(v));
  }
  w.save(path);
}

namespace detail {

inline std::string pgm_token(ByteReader& r) {
  std::string tok;
  char c = 0;
  for (;;) {  // skip whitespace and comments
    r.raw(&c, 1);
    if (c == '#') {
      while (c != '\n') r.raw(&c, 1);
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      break;
    }
  }
  while (!std::isspace(static_cast<unsigned char>(c))) {
    tok += c;
    r.raw(&c, 1);
  }
  return tok;
}

inline int pgm_int(ByteReader& r) {
  const auto t = pgm_token(r);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw LoadError(r.what() + ": malformed PGM header field '" + t + "'");
}

}  // namespace detail

/// Reads an image and checks it against the declared shape.
inline RealImage read_image(const std::filesystem::path& path, PixelFormat fmt, int height, int width) {
  ByteReader r = ByteReader::open(path);
  RealImage img(height, width);
  if (fmt == PixelFormat::Pgm16) {
    if (detail::pgm_token(r) != "P5") throw LoadError(path.string() + ": not a binary PGM");
    const int w = detail::pgm_int(r), h = detail::pgm_int(r), maxval = detail::pgm_int(r);
    if (w != width || h != height)
      throw LoadError(path.string() + ": PGM is " + std::to_string(h) + "x" + std::to_string(w) + ", manifest says " +
                      std::to_string(height) + "x" + std::to_string(width));
    if (maxval != 65535) throw LoadError(path.string() + ": expected 16-bit PGM (maxval 65535)");
    for (auto& v : img.values()) {
      std::uint8_t be[2];
      r.raw(be, 2);
      v = ((be[0] << 8) | be[1]) / 65535.0;
    }
  } else {
    const std::size_t expect = img.size() * 4;
    if (r.remaining() != expect)
      throw LoadError(path.string() + ": f32 file has " + std::to_string(r.remaining()) + " bytes, shape " +
                      std::to_string(height) + "x" + std::to_string(width) + " needs " + std::to_string(expect));
    for (auto& v : img.values()) v = r.f32();
  }
  if (!r.at_end()) throw LoadError(path.string() + ": trailing bytes after image data");
  return img;
}

/// Complex k-space as raw little-endian float64 (re, im) pairs; bit-exact.
inline void write_kspace(const std::filesystem::path& path, const ComplexImage& ksp) {
  ByteWriter w;
  for (const auto& v : ksp.values()) {
    w.f64(v.real());
    w.f64(v.imag());
  }
  w.save(path);
}

inline ComplexImage read_kspace(const std::filesystem::path& path, int height, int width) {
  ByteReader r = ByteReader::open(path);
  ComplexImage out(height, width, Domain::KSpace);
  if (r.remaining() != out.values().size() * 16)
    throw LoadError(path.string() + ": k-space file size does not match " + std::to_string(height) + "x" +
                    std::to_string(width));
  for (auto& v : out.values()) {
    const double re = r.f64();
    v = {re, r.f64()};
  }
  return out;
}

}  // namespace afp
