#include "dragdrop/core/render.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dragdrop {

Axis parse_axis(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw std::invalid_argument("axis must be one of x, y, z (got '" + s + "')");
}

const char* to_string(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

std::pair<int, int> slice_axes(Axis axis) {
  switch (axis) {
    case Axis::z: return {0, 1};
    case Axis::y: return {0, 2};
    case Axis::x: return {1, 2};
  }
  return {0, 1};
}

Index3 slice_voxel(Axis axis, int index, int u, int v) {
  Index3 p;
  const auto [ua, va] = slice_axes(axis);
  p[int(axis)] = index;
  p[ua] = u;
  p[va] = v;
  return p;
}

std::uint8_t window_value(float value, double lo, double hi) {
  const double t = (double(value) - lo) / (hi - lo) * 255.0;
  const double r = std::floor(t + 0.5);
  if (!(r > 0.0)) return 0;
  if (r >= 255.0) return 255;
  return std::uint8_t(r);
}

Image8 render_slice(const Volume& vol, Axis axis, int index, double lo, double hi) {
  const int a = int(axis);
  if (index < 0 || index >= vol.dims()[a])
    throw std::out_of_range("slice index " + std::to_string(index) + " out of range for axis " + to_string(axis) +
                            " (size " + std::to_string(vol.dims()[a]) + ")");
  if (!(lo < hi)) throw std::invalid_argument("window requires lo < hi");
  const auto [ua, va] = slice_axes(axis);
  Image8 img;
  img.width = vol.dims()[ua];
  img.height = vol.dims()[va];
  img.pixels.resize(std::size_t(img.width) * std::size_t(img.height));
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) img.at(u, v) = window_value(vol(slice_voxel(axis, index, u, v)), lo, hi);
  return img;
}

}  // namespace dragdrop
