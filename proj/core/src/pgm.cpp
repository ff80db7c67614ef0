// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "egsf/errors.hpp"

namespace egsf {

std::uint16_t quantize16(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * kPgmMax));
}

void write_pgm16(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) {
    throw DimensionError("write_pgm16: expected [H, W], got " + shape_string(image.shape()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << '\n' << kPgmMax << '\n';
  std::string buf;
  buf.reserve(image.numel() * 2);
  for (double v : image.data()) {
    const std::uint16_t q = quantize16(v);
    buf.push_back(static_cast<char>(q >> 8));
    buf.push_back(static_cast<char>(q & 0xff));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  return std::stoul(tok);
}

}  // namespace

Tensor read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (header_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const std::size_t w = header_number(in, path);
  const std::size_t h = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > kPgmMax) {
    throw FormatError(path.string() + ": unsupported PGM extents or maxval");
  }
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::string raw(w * h * bytes_per, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw FormatError(path.string() + ": truncated PGM raster");
  }
  Tensor img({h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    std::uint32_t q = static_cast<unsigned char>(raw[i * bytes_per]);
    if (bytes_per == 2) q = (q << 8) | static_cast<unsigned char>(raw[i * 2 + 1]);
    img[i] = maxval == kPgmMax ? dequantize16(static_cast<std::uint16_t>(q))
                               : static_cast<double>(q) / static_cast<double>(maxval);
  }
  return img;
}

}  // namespace egsf
