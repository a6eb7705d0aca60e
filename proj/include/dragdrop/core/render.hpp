#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dragdrop/core/grid.hpp"

namespace dragdrop {

enum class Axis { x = 0, y = 1, z = 2 };

Axis parse_axis(const std::string& s);
const char* to_string(Axis a);

struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t& at(int u, int v) { return pixels[std::size_t(v) * std::size_t(width) + std::size_t(u)]; }
  std::uint8_t at(int u, int v) const { return pixels[std::size_t(v) * std::size_t(width) + std::size_t(u)]; }
};

/// In-plane axes for a slice normal to `axis`: z -> (x, y), y -> (x, z), x -> (y, z).
std::pair<int, int> slice_axes(Axis axis);

/// Voxel coordinate of pixel (u, v) on slice `index`.
Index3 slice_voxel(Axis axis, int index, int u, int v);

/// Linear window: round-half-up of 255 · (value − lo) / (hi − lo), clamped to [0, 255].
std::uint8_t window_value(float value, double lo, double hi);

Image8 render_slice(const Volume& vol, Axis axis, int index, double lo, double hi);

}  // namespace dragdrop
