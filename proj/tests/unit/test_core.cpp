#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dragdrop/core/components.hpp"
#include "dragdrop/core/morphology.hpp"
#include "dragdrop/core/render.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace dragdrop;

TEST_CASE("grid index and coord are inverse") {
  Volume v(Index3(3, 4, 5));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index(v.coord(i)) == i);
  CHECK(v.index(1, 0, 0) == 1);
  CHECK(v.index(0, 1, 0) == 3);
  CHECK(v.index(0, 0, 1) == 12);
}

TEST_CASE("grid rejects bad geometry") {
  CHECK_THROWS_AS(Volume(Index3(0, 1, 1)), std::invalid_argument);
  CHECK_THROWS_AS(Volume(Index3(1, 1, 1), Vec3(1, 0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(Volume(Index3(2, 1, 1), Vec3::Ones(), std::vector<float>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("connected components: spec examples") {
  BinaryMask m(Index3(3, 2, 2));
  m(0, 0, 0) = 1;
  m(2, 0, 0) = 1;
  CHECK(connected_components(m, Connectivity::six).components.size() == 2);

  BinaryMask d(Index3(2, 2, 2));
  d(0, 0, 0) = 1;
  d(1, 1, 1) = 1;
  CHECK(connected_components(d, Connectivity::six).components.size() == 2);
  CHECK(connected_components(d, Connectivity::twenty_six).components.size() == 1);

  BinaryMask empty(Index3(4, 4, 4));
  CHECK(connected_components(empty, Connectivity::six).components.empty());
}

TEST_CASE("connected components equal the union-find oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryMask m = testutil::random_mask(testutil::random_dims(1, 8, rng), 0.35, rng);
    for (auto conn : {Connectivity::six, Connectivity::twenty_six}) {
      const auto got = connected_components(m, conn);
      const auto want = oracle::components(m, conn == Connectivity::six ? oracle::offsets6() : oracle::offsets26());
      REQUIRE(got.labels.data() == want);
      REQUIRE(got.components.size() == oracle::component_count(want));
      for (const Component& c : got.components) {
        std::size_t n = 0;
        Vec3 sum = Vec3::Zero();
        Box box{Index3::Constant(1 << 20), Index3::Constant(-1)};
        for (std::size_t i = 0; i < m.size(); ++i)
          if (want[i] == c.label) {
            ++n;
            sum += m.coord(i).cast<double>();
            box.lo = box.lo.cwiseMin(m.coord(i));
            box.hi = box.hi.cwiseMax(m.coord(i) + Index3::Ones());
          }
        CHECK(c.voxel_count == n);
        CHECK((c.centroid - sum / double(n)).norm() < 1e-12);
        CHECK(c.bbox == box);
      }
    }
  }
}

TEST_CASE("distinct components are never adjacent") {
  std::mt19937_64 rng(12);
  const BinaryMask m = testutil::random_mask(Index3(8, 8, 8), 0.3, rng);
  for (auto conn : {Connectivity::six, Connectivity::twenty_six}) {
    const auto cc = connected_components(m, conn);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      for (const Index3& o : neighbor_offsets(conn)) {
        const Index3 q = m.coord(i) + o;
        if (m.contains(q) && m(q)) CHECK(cc.labels(q) == cc.labels[i]);
      }
    }
  }
}

TEST_CASE("structuring elements") {
  CHECK(StructuringElement::cross6().size() == 7);
  CHECK(StructuringElement::cube26().size() == 27);
  CHECK(StructuringElement::ball(1.0).size() == 7);
  CHECK(StructuringElement::ball(0.0).size() == 1);
  CHECK(StructuringElement::ball(std::sqrt(2.0)).size() == 19);
  // Physical radius 2 mm on (1, 1, 2.5) spacing reaches no neighbour in z.
  CHECK(StructuringElement::ball_physical(2.0, Vec3(1, 1, 2.5)).size() == oracle::ball_offsets(2.0, Vec3(1, 1, 2.5)).size());
  CHECK_THROWS_AS(StructuringElement::from_offsets({Index3(1, 0, 0), Index3(-1, 0, 0)}), std::invalid_argument);
  CHECK_THROWS_AS(StructuringElement::from_offsets({Index3(0, 0, 0), Index3(1, 0, 0)}), std::invalid_argument);
  CHECK(StructuringElement::from_offsets({Index3(0, 0, 0), Index3(0, 2, 0), Index3(0, -2, 0)}).size() == 3);
}

TEST_CASE("dilate and erode: spec examples") {
  BinaryMask one(Index3(5, 5, 5));
  one(2, 2, 2) = 1;
  CHECK(count(dilate(one, StructuringElement::ball(1.0))) == 7);

  const BinaryMask empty(Index3(4, 3, 2));
  CHECK(count(dilate(empty, StructuringElement::cube26())) == 0);
  const BinaryMask full(Index3(4, 3, 2), Vec3::Ones(), 1);
  CHECK(count(erode(full, StructuringElement::ball(2.0))) == full.size());
}

TEST_CASE("morphology equals naive definitions on random inputs") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const BinaryMask m = testutil::random_mask(testutil::random_dims(1, 7, rng), 0.5, rng);
    const auto se = trial % 2 ? StructuringElement::cube26() : StructuringElement::ball(Vec3(1.5, 2.0, 1.0));
    CHECK(dilate(m, se) == oracle::dilate(m, se.offsets()));
    CHECK(erode(m, se) == oracle::erode(m, se.offsets()));
  }
}

TEST_CASE("morphological gradient: spec examples") {
  const Volume flat(Index3(4, 4, 4), Vec3::Ones(), 3.5f);
  const Volume g0 = morphological_gradient(flat, StructuringElement::cross6());
  CHECK(std::all_of(g0.data().begin(), g0.data().end(), [](float v) { return v == 0.0f; }));

  const Volume line(Index3(1, 1, 3), Vec3::Ones(), std::vector<float>{0, 10, 0});
  CHECK(morphological_gradient(line, StructuringElement::cross6()).data() == std::vector<float>{10, 10, 10});
}

TEST_CASE("gradient is zero exactly where the neighbourhood is constant") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> level(0, 2);
  Volume v(Index3(6, 6, 6));
  for (auto& x : v.data()) x = float(level(rng) == 0 ? 1 : 0);
  const auto se = StructuringElement::cross6();
  const Volume g = morphological_gradient(v, se);
  for (std::size_t i = 0; i < v.size(); ++i) {
    bool constant = true;
    for (const Index3& o : se.offsets()) {
      const Index3 q = v.coord(i) + o;
      if (v.contains(q)) constant = constant && v(q) == v[i];
    }
    CHECK(g[i] >= 0.0f);
    CHECK((g[i] == 0.0f) == constant);
  }
}

TEST_CASE("crop and paste round-trip") {
  std::mt19937_64 rng(15);
  LabelVolume v(Index3(7, 6, 5));
  for (auto& x : v.data()) x = std::uint32_t(rng() % 9);
  CHECK(crop_roi(v, v.bounds()) == v);

  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> c(-2, 8);
    Box b{Index3(c(rng), c(rng), c(rng)), Index3(c(rng), c(rng), c(rng))};
    if (b.clipped(v.dims()).empty()) {
      CHECK_THROWS_AS(crop_roi(v, b), std::invalid_argument);
      continue;
    }
    const LabelVolume patch = crop_roi(v, b);
    CHECK(patch.dims() == b.clipped(v.dims()).extent());
    LabelVolume target = LabelVolume::like(v);
    target.data() = v.data();
    for (auto& x : target.data()) x += 100;
    paste_roi(target, patch, b);
    const Box cb = b.clipped(v.dims());
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(target[i] == (cb.contains(v.coord(i)) ? v[i] : v[i] + 100));
  }
}

TEST_CASE("window_value and render_slice") {
  CHECK(window_value(5.0f, 0.0, 10.0) == 128);  // 127.5 rounds up
  CHECK(window_value(-3.0f, 0.0, 10.0) == 0);
  CHECK(window_value(0.0f, 0.0, 10.0) == 0);
  CHECK(window_value(10.0f, 0.0, 10.0) == 255);
  CHECK(window_value(99.0f, 0.0, 10.0) == 255);

  const Volume flat(Index3(4, 5, 6), Vec3::Ones(), 50.0f);
  const Image8 img = render_slice(flat, Axis::z, 2, 0.0, 100.0);
  CHECK(img.width == 4);
  CHECK(img.height == 5);
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](std::uint8_t p) { return p == 128; }));

  std::mt19937_64 rng(16);
  Volume v(Index3(5, 6, 7));
  std::uniform_real_distribution<float> val(-20.0f, 120.0f);
  for (auto& x : v.data()) x = val(rng);
  for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
    const Image8 s = render_slice(v, axis, 3, 0.0, 100.0);
    for (int r = 0; r < s.height; ++r)
      for (int u = 0; u < s.width; ++u) {
        const double t = (double(v(slice_voxel(axis, 3, u, r))) - 0.0) / 100.0 * 255.0;
        const int want = int(std::clamp(std::floor(t + 0.5), 0.0, 255.0));
        CHECK(int(s.at(u, r)) == want);
      }
  }
  CHECK_THROWS_AS(render_slice(v, Axis::z, 7, 0.0, 1.0), std::out_of_range);
  CHECK_THROWS_AS(render_slice(v, Axis::z, 0, 1.0, 1.0), std::invalid_argument);
  CHECK(parse_axis("y") == Axis::y);
  CHECK_THROWS(parse_axis("w"));
}
