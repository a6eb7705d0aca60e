#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dragdrop/core/render.hpp"

namespace dragdrop::io {

/// Grayscale raster decoded from PNG; samples hold 8- or 16-bit values.
struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

std::vector<std::uint8_t> encode_png(const Image8& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);

/// Accepts 1/2/4/8/16-bit grayscale PNGs only. `origin` names the source in error messages.
GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin);

GrayImage read_png(const std::string& path);
void write_png(const std::string& path, const GrayImage& img);

}  // namespace dragdrop::io
