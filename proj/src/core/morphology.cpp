#include "dragdrop/core/morphology.hpp"

#include <cmath>
#include <stdexcept>

namespace dragdrop {

namespace {

std::vector<Index3> make_six() {
  return {Index3(-1, 0, 0), Index3(1, 0, 0), Index3(0, -1, 0),
          Index3(0, 1, 0),  Index3(0, 0, -1), Index3(0, 0, 1)};
}

std::vector<Index3> make_twenty_six() {
  std::vector<Index3> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx || dy || dz) out.emplace_back(dx, dy, dz);
  return out;
}

bool lex_less(const Index3& a, const Index3& b) {
  if (a.z() != b.z()) return a.z() < b.z();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.x() < b.x();
}

}  // namespace

const std::vector<Index3>& neighbor_offsets(Connectivity c) {
  static const std::vector<Index3> six = make_six();
  static const std::vector<Index3> twenty_six = make_twenty_six();
  return c == Connectivity::six ? six : twenty_six;
}

StructuringElement::StructuringElement(Shape s, std::vector<Index3> o) : shape_(s), offsets_(std::move(o)) {
  std::sort(offsets_.begin(), offsets_.end(), lex_less);
}

StructuringElement StructuringElement::cross6() {
  auto o = make_six();
  o.push_back(Index3::Zero());
  return StructuringElement(Shape::cross6, std::move(o));
}

StructuringElement StructuringElement::cube26() {
  auto o = make_twenty_six();
  o.push_back(Index3::Zero());
  return StructuringElement(Shape::cube26, std::move(o));
}

StructuringElement StructuringElement::ball(const Vec3& radii) {
  if (!(radii.array() >= 0.0).all()) throw std::invalid_argument("ball radii must be >= 0");
  std::vector<Index3> o;
  const Index3 r = radii.array().floor().cast<int>().matrix();
  for (int z = -r.z(); z <= r.z(); ++z)
    for (int y = -r.y(); y <= r.y(); ++y)
      for (int x = -r.x(); x <= r.x(); ++x) {
        double s = 0.0;
        const Index3 v(x, y, z);
        for (int a = 0; a < 3; ++a)
          if (v[a] != 0) s += (v[a] / radii[a]) * (v[a] / radii[a]);
        if (s <= 1.0 + 1e-9) o.push_back(v);
      }
  return StructuringElement(Shape::ball, std::move(o));
}

StructuringElement StructuringElement::ball_physical(double radius_mm, const Vec3& spacing) {
  if (!(radius_mm >= 0.0)) throw std::invalid_argument("ball radius must be >= 0");
  return ball(Vec3::Constant(radius_mm).cwiseQuotient(spacing));
}

StructuringElement StructuringElement::from_offsets(std::vector<Index3> offsets) {
  std::sort(offsets.begin(), offsets.end(), lex_less);
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  auto has = [&](const Index3& v) { return std::binary_search(offsets.begin(), offsets.end(), v, lex_less); };
  if (!has(Index3::Zero())) throw std::invalid_argument("structuring element must contain the zero offset");
  for (const Index3& o : offsets)
    if (!has(-o)) throw std::invalid_argument("structuring element must be symmetric under negation");
  return StructuringElement(Shape::custom, std::move(offsets));
}

Index3 StructuringElement::reach() const {
  Index3 r = Index3::Zero();
  for (const Index3& o : offsets_) r = r.cwiseMax(o.cwiseAbs());
  return r;
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
  BinaryMask out = BinaryMask::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 v = mask.coord(i);
    for (const Index3& o : se.offsets()) {
      const Index3 q = v + o;
      if (mask.contains(q)) out(q) = 1;
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
  BinaryMask out = BinaryMask::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 v = mask.coord(i);
    bool keep = true;
    for (const Index3& o : se.offsets()) {
      const Index3 q = v + o;
      if (mask.contains(q) && !mask(q)) {
        keep = false;
        break;
      }
    }
    out[i] = keep ? 1 : 0;
  }
  return out;
}

BinaryMask complement(const BinaryMask& mask) {
  BinaryMask out = BinaryMask::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 0 : 1;
  return out;
}

}  // namespace dragdrop
