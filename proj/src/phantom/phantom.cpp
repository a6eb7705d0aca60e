#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Geometry>

#include "dragdrop/core/error.hpp"
#include "dragdrop/io/volume_io.hpp"
#include "dragdrop/phantom/phantom.hpp"

namespace dragdrop {

using nlohmann::json;

namespace {

Eigen::Matrix3d rotation_matrix(const Vec3& angles) {
  return (Eigen::AngleAxisd(angles.x(), Vec3::UnitZ()) * Eigen::AngleAxisd(angles.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(angles.z(), Vec3::UnitX()))
      .toRotationMatrix();
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const std::string& ptr) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(ptr, "expected an array of 3 numbers");
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw SchemaError(ptr + "/" + std::to_string(a), "expected a number");
    v[a] = j[a].get<double>();
  }
  return v;
}

template <typename T>
T field(const json& j, const char* key, const std::string& ptr, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw SchemaError(ptr + "/" + key, "wrong type");
  }
}

}  // namespace

bool PhantomLesion::contains(const Vec3& p) const {
  const Vec3 d = p - center_mm;
  if (shape == Shape::sphere) return d.squaredNorm() <= size_mm.x() * size_mm.x();
  const Vec3 q = rotation_matrix(rotation).transpose() * d;
  return q.cwiseQuotient(size_mm).squaredNorm() <= 1.0;
}

void PhantomSpec::validate() const {
  if ((dims.array() < 1).any()) throw std::invalid_argument("phantom dims must be >= 1");
  if (!(spacing.array() > 0.0).all()) throw std::invalid_argument("phantom spacing must be > 0");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("phantom noise sigma must be >= 0");
  if (negative_case && !lesions.empty()) throw std::invalid_argument("negative phantom case cannot hold lesions");
  const Vec3 extent = (dims.cast<double>() - Vec3::Ones()).cwiseProduct(spacing);
  for (std::size_t k = 0; k < lesions.size(); ++k) {
    const auto& l = lesions[k];
    const std::string id = "phantom lesion " + std::to_string(k);
    if (l.delta == 0.0) throw std::invalid_argument(id + ": intensity offset must be non-zero");
    if (!(l.size_mm.array() > 0.0).all()) throw std::invalid_argument(id + ": size must be > 0");
    const double r = l.bounding_radius();
    if ((l.center_mm.array() - r < 0.0).any() || (l.center_mm.array() + r > extent.array()).any())
      throw std::invalid_argument(id + ": lesion extends outside the grid");
  }
}

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  spec.validate();
  Phantom p{Volume(spec.dims, spec.spacing), LabelVolume(spec.dims, spec.spacing)};
  for (std::size_t k = 0; k < spec.lesions.size(); ++k) {
    const auto& l = spec.lesions[k];
    const Box b = physical_box(l.center_mm, l.bounding_radius(), spec.spacing, spec.dims);
    for (int z = b.lo.z(); z < b.hi.z(); ++z)
      for (int y = b.lo.y(); y < b.hi.y(); ++y)
        for (int x = b.lo.x(); x < b.hi.x(); ++x) {
          const Index3 v(x, y, z);
          if (!l.contains(p.gt.physical(v))) continue;
          if (p.gt(v) != 0)
            throw std::invalid_argument("phantom lesions " + std::to_string(p.gt(v) - 1) + " and " + std::to_string(k) +
                                        " overlap");
          p.gt(v) = std::uint32_t(k + 1);
        }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  for (std::size_t i = 0; i < p.volume.size(); ++i) {
    const Vec3 pos = p.volume.physical(p.volume.coord(i));
    double v = spec.base_intensity + spec.ramp.dot(pos);
    if (p.gt[i]) v += spec.lesions[p.gt[i] - 1].delta;
    if (spec.noise_sigma > 0.0) v += noise(rng);
    p.volume[i] = float(v);
  }
  return p;
}

std::uint64_t suite_case_seed(std::uint64_t seed, std::size_t k) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(k), 0x70686eu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

std::vector<PhantomSpec> phantom_suite_specs(std::uint64_t seed) {
  using Shape = PhantomLesion::Shape;
  struct Row {
    Shape shape;
    Vec3 size;
    double delta;
    double sigma;
    bool ramp;
    bool aniso;
  };
  const Row rows[] = {
      {Shape::sphere, {5, 5, 5}, 200, 5, false, false},       {Shape::sphere, {3, 3, 3}, 100, 0, false, false},
      {Shape::sphere, {8, 8, 8}, -100, 10, true, false},      {Shape::sphere, {4, 4, 4}, -200, 5, true, false},
      {Shape::sphere, {6, 6, 6}, 100, 10, false, false},      {Shape::sphere, {3.5, 3.5, 3.5}, 200, 10, true, false},
      {Shape::ellipsoid, {6, 4, 3}, 200, 5, false, false},    {Shape::ellipsoid, {7.5, 4, 3}, -100, 0, true, false},
      {Shape::ellipsoid, {8, 5, 4}, 100, 10, false, false},   {Shape::ellipsoid, {6, 3, 3}, -200, 5, false, false},
      {Shape::sphere, {}, 0, 5, false, false},                {Shape::sphere, {}, 0, 10, true, false},
      {Shape::sphere, {7, 7, 7}, 200, 0, true, false},        {Shape::ellipsoid, {7, 5, 3.5}, -200, 10, false, false},
      {Shape::sphere, {6, 6, 6}, 200, 5, false, true},        {Shape::sphere, {8, 8, 8}, -100, 10, true, true},
      {Shape::ellipsoid, {8, 6, 5}, 100, 5, false, true},     {Shape::ellipsoid, {9, 6, 6}, -200, 0, false, true},
      {Shape::sphere, {5, 5, 5}, 200, 10, false, true},       {Shape::ellipsoid, {7, 5, 5}, 100, 5, true, true},
  };
  const Vec3 ramp(0.8, -0.5, 0.3);
  const Vec3 aniso(1.0, 1.0, 2.5);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-3.0, 3.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::vector<PhantomSpec> out;
  for (std::size_t k = 0; k < kSuitePositiveCases; ++k) {
    const Row& r = rows[k];
    PhantomSpec s;
    s.spacing = r.aniso ? aniso : Vec3::Ones();
    s.noise_sigma = r.sigma;
    s.ramp = r.ramp ? ramp : Vec3::Zero();
    const Vec3 mid = (s.dims.cast<double>() - Vec3::Ones()).cwiseProduct(s.spacing) / 2.0;
    const Vec3 shift(jitter(rng), jitter(rng), jitter(rng));
    if (k == 10) {
      s.lesions.push_back({Shape::sphere, mid + Vec3(-10, 0, 0) + shift, Vec3::Constant(4), Vec3::Zero(), 200});
      s.lesions.push_back({Shape::ellipsoid, mid + Vec3(10, 0, 0) + shift, Vec3(6, 4, 4),
                           Vec3(angle(rng), angle(rng), angle(rng)), -100});
    } else if (k == 11) {
      s.lesions.push_back({Shape::sphere, mid + Vec3(-9, -4, 0) + shift, Vec3::Constant(5), Vec3::Zero(), 100});
      s.lesions.push_back({Shape::sphere, mid + Vec3(9, 6, 0) + shift, Vec3::Constant(3), Vec3::Zero(), 200});
    } else {
      const Vec3 rot = r.shape == Shape::ellipsoid ? Vec3(angle(rng), angle(rng), angle(rng)) : Vec3::Zero();
      s.lesions.push_back({r.shape, mid + shift, r.size, rot, r.delta});
    }
    out.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < kSuiteNegativeCases; ++k) {
    PhantomSpec s;
    s.negative_case = true;
    s.noise_sigma = double(5 * (k % 3));
    s.ramp = k % 2 ? ramp : Vec3::Zero();
    if (k >= 8) s.spacing = aniso;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PhantomCase> phantom_suite(std::uint64_t seed) {
  std::vector<PhantomCase> out;
  const auto specs = phantom_suite_specs(seed);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto s = suite_case_seed(seed, k);
    out.push_back(PhantomCase{k, specs[k], s, generate_phantom(specs[k], s)});
  }
  return out;
}

json to_json(const PhantomSpec& s) {
  json lesions = json::array();
  for (const auto& l : s.lesions)
    lesions.push_back({{"shape", l.shape == PhantomLesion::Shape::sphere ? "sphere" : "ellipsoid"},
                       {"center_mm", vec_json(l.center_mm)},
                       {"size_mm", vec_json(l.size_mm)},
                       {"rotation", vec_json(l.rotation)},
                       {"delta", l.delta}});
  return {{"dims", json::array({s.dims.x(), s.dims.y(), s.dims.z()})},
          {"spacing", vec_json(s.spacing)},
          {"lesions", lesions},
          {"base_intensity", s.base_intensity},
          {"ramp", vec_json(s.ramp)},
          {"noise_sigma", s.noise_sigma},
          {"negative_case", s.negative_case}};
}

PhantomSpec phantom_spec_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "phantom spec must be a JSON object");
  PhantomSpec s;
  if (j.contains("dims")) {
    const Vec3 d = vec_from(j["dims"], "/dims");
    if ((d.array() != d.array().round()).any() || (d.array() < 1).any()) throw SchemaError("/dims", "expected positive integers");
    s.dims = d.cast<int>();
  }
  if (j.contains("spacing")) s.spacing = vec_from(j["spacing"], "/spacing");
  if (j.contains("ramp")) s.ramp = vec_from(j["ramp"], "/ramp");
  s.base_intensity = field(j, "base_intensity", "", s.base_intensity);
  s.noise_sigma = field(j, "noise_sigma", "", s.noise_sigma);
  s.negative_case = field(j, "negative_case", "", s.negative_case);
  if (j.contains("lesions")) {
    if (!j["lesions"].is_array()) throw SchemaError("/lesions", "expected an array");
    for (std::size_t k = 0; k < j["lesions"].size(); ++k) {
      const json& lj = j["lesions"][k];
      const std::string ptr = "/lesions/" + std::to_string(k);
      if (!lj.is_object()) throw SchemaError(ptr, "expected an object");
      PhantomLesion l;
      const auto shape = field<std::string>(lj, "shape", ptr, "sphere");
      if (shape == "sphere") l.shape = PhantomLesion::Shape::sphere;
      else if (shape == "ellipsoid") l.shape = PhantomLesion::Shape::ellipsoid;
      else throw SchemaError(ptr + "/shape", "expected \"sphere\" or \"ellipsoid\"");
      if (!lj.contains("center_mm")) throw SchemaError(ptr, "missing center_mm");
      l.center_mm = vec_from(lj["center_mm"], ptr + "/center_mm");
      if (!lj.contains("size_mm")) throw SchemaError(ptr, "missing size_mm");
      if (lj["size_mm"].is_number()) l.size_mm = Vec3::Constant(lj["size_mm"].get<double>());
      else l.size_mm = vec_from(lj["size_mm"], ptr + "/size_mm");
      if (lj.contains("rotation")) l.rotation = vec_from(lj["rotation"], ptr + "/rotation");
      l.delta = field(lj, "delta", ptr, l.delta);
      s.lesions.push_back(l);
    }
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError("", e.what());
  }
  return s;
}

void write_phantom_case(const std::string& dir, const PhantomSpec& spec, std::uint64_t seed, const Phantom& p) {
  std::filesystem::create_directories(dir);
  io::save_volume(p.volume, dir + "/volume.f32", io::VolumeFormat::raw_json);
  io::save_label(p.gt, dir + "/gt.f32", io::VolumeFormat::raw_json);
  json j = {{"seed", seed}, {"spec", to_json(spec)}};
  io::write_text(dir + "/spec.json", j.dump(2) + "\n");
}

}  // namespace dragdrop
