#include "dragdrop/io/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include <nlohmann/json.hpp>

#include "dragdrop/core/error.hpp"
#include "dragdrop/io/png.hpp"

namespace fs = std::filesystem;

namespace dragdrop::io {

static_assert(std::endian::native == std::endian::little, "raw_json and NIfTI writers assume a little-endian host");

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), s.end() - std::ptrdiff_t(suffix.size()),
                    [](char a, char b) { return std::tolower((unsigned char)a) == std::tolower((unsigned char)b); });
}

/// Widens a header float through its shortest decimal form, so 0.8f reads back as 0.8.
double widen(float f) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, f);
  double d = f;
  std::from_chars(buf, res.ptr, d);
  return d;
}

// ---------------------------------------------------------------------------
// NIfTI-1

constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

struct HeaderReader {
  const std::uint8_t* base;
  bool swap;

  template <typename T>
  T get(std::size_t off) const {
    std::array<std::uint8_t, sizeof(T)> b;
    std::memcpy(b.data(), base + off, sizeof(T));
    if (swap) std::reverse(b.begin(), b.end());
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }
};

struct HeaderWriter {
  std::array<std::uint8_t, kDataOffset> bytes{};

  template <typename T>
  void put(std::size_t off, T v) {
    std::memcpy(bytes.data() + off, &v, sizeof(T));
  }
};

struct NiftiRaw {
  Index3 dims;
  Vec3 spacing;
  Vec3 origin;
  std::int16_t datatype = 0;
  double slope = 1.0;
  double inter = 0.0;
  bool swap = false;
  const std::uint8_t* data = nullptr;
  std::size_t count = 0;
};

std::size_t type_size(std::int16_t t) {
  switch (t) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

NiftiRaw parse_nifti(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < std::size_t(kHeaderSize)) throw IoError(origin, "file too small for a NIfTI-1 header");
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  HeaderReader h{bytes.data(), false};
  if (sizeof_hdr != kHeaderSize) {
    h.swap = true;
    if (h.get<std::int32_t>(0) != kHeaderSize) throw IoError(origin, "not a NIfTI-1 file (sizeof_hdr != 348)");
  }
  const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
  if (std::memcmp(magic, "ni1\0", 4) == 0) throw IoError(origin, "two-file (.hdr/.img) NIfTI is not supported");
  if (std::memcmp(magic, "n+1\0", 4) != 0) throw IoError(origin, "missing NIfTI-1 magic 'n+1'");

  NiftiRaw r;
  r.swap = h.swap;
  const int ndim = h.get<std::int16_t>(40);
  if (ndim < 1 || ndim > 7) throw IoError(origin, "invalid dim[0] = " + std::to_string(ndim));
  r.dims = Index3::Ones();
  for (int i = 1; i <= ndim; ++i) {
    const int d = h.get<std::int16_t>(std::size_t(40 + 2 * i));
    if (i <= 3) {
      if (d < 1) throw IoError(origin, "invalid dim[" + std::to_string(i) + "] = " + std::to_string(d));
      r.dims[i - 1] = d;
    } else if (d > 1) {
      throw IoError(origin, "only 3D single-channel volumes are supported (dim[" + std::to_string(i) +
                                "] = " + std::to_string(d) + ")");
    }
  }
  r.datatype = h.get<std::int16_t>(70);
  const std::size_t ts = type_size(r.datatype);
  if (!ts) throw IoError(origin, "unsupported NIfTI datatype " + std::to_string(r.datatype));

  float pixdim[4];
  for (int i = 0; i < 4; ++i) pixdim[i] = h.get<float>(std::size_t(76 + 4 * i));
  for (int i = 0; i < 3; ++i) {
    const double s = std::fabs(widen(pixdim[i + 1]));
    if (!(s > 0.0) || !std::isfinite(s)) throw IoError(origin, "non-positive voxel spacing in pixdim");
    r.spacing[i] = s;
  }

  const float slope = h.get<float>(112);
  const float inter = h.get<float>(116);
  if (slope != 0.0f && std::isfinite(slope)) {
    r.slope = slope;
    r.inter = std::isfinite(inter) ? inter : 0.0;
  }

  const int qform = h.get<std::int16_t>(252);
  const int sform = h.get<std::int16_t>(254);
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  r.origin.setZero();
  if (sform > 0) {
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) m(row, col) = h.get<float>(std::size_t(280 + 16 * row + 4 * col));
      r.origin[row] = widen(h.get<float>(std::size_t(280 + 16 * row + 12)));
    }
  } else if (qform > 0) {
    const double b = h.get<float>(256), c = h.get<float>(260), d = h.get<float>(264);
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    m << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
        2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
        2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
    for (int i = 0; i < 3; ++i) r.origin[i] = widen(h.get<float>(std::size_t(268 + 4 * i)));
  }
  const double scale = m.cwiseAbs().maxCoeff();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      if (row != col && std::fabs(m(row, col)) > 1e-6 * scale)
        throw IoError(origin, "oblique affine (rotation/shear) is not supported");

  const float vox_offset = h.get<float>(108);
  const std::size_t offset = std::size_t(std::max(float(kDataOffset), vox_offset));
  r.count = std::size_t(r.dims.x()) * std::size_t(r.dims.y()) * std::size_t(r.dims.z());
  if (bytes.size() < offset + r.count * ts)
    throw IoError(origin, "data length mismatch: header declares " + std::to_string(r.count * ts) +
                              " bytes, file holds " + std::to_string(bytes.size() - std::min(bytes.size(), offset)));
  r.data = bytes.data() + offset;
  return r;
}

template <typename T>
T read_elem(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> b;
  std::memcpy(b.data(), p, sizeof(T));
  if (swap) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

double raw_value(const NiftiRaw& r, std::size_t i) {
  const std::uint8_t* p = r.data + i * type_size(r.datatype);
  switch (r.datatype) {
    case kUint8: return *p;
    case kInt8: return double(std::int8_t(*p));
    case kInt16: return read_elem<std::int16_t>(p, r.swap);
    case kUint16: return read_elem<std::uint16_t>(p, r.swap);
    case kInt32: return read_elem<std::int32_t>(p, r.swap);
    case kUint32: return read_elem<std::uint32_t>(p, r.swap);
    case kFloat32: return read_elem<float>(p, r.swap);
    case kFloat64: return read_elem<double>(p, r.swap);
    default: return 0.0;
  }
}

template <typename Scalar>
std::vector<std::uint8_t> encode_nifti_impl(const Grid<Scalar>& g, std::int16_t datatype, bool gzip) {
  HeaderWriter h;
  h.put<std::int32_t>(0, kHeaderSize);
  h.put<char>(38, 'r');
  h.put<std::int16_t>(40, 3);
  for (int i = 0; i < 3; ++i) h.put<std::int16_t>(std::size_t(42 + 2 * i), std::int16_t(g.dims()[i]));
  for (int i = 3; i < 7; ++i) h.put<std::int16_t>(std::size_t(42 + 2 * i), 1);
  h.put<std::int16_t>(70, datatype);
  h.put<std::int16_t>(72, std::int16_t(8 * sizeof(Scalar)));
  h.put<float>(76, 1.0f);
  for (int i = 0; i < 3; ++i) h.put<float>(std::size_t(80 + 4 * i), float(g.spacing()[i]));
  h.put<float>(108, float(kDataOffset));
  h.put<float>(112, 1.0f);
  h.put<float>(116, 0.0f);
  h.put<std::uint8_t>(123, 2);  // mm
  const char descrip[] = "dragdrop";
  std::memcpy(h.bytes.data() + 148, descrip, sizeof(descrip));
  h.put<std::int16_t>(252, 1);
  h.put<std::int16_t>(254, 1);
  for (int i = 0; i < 3; ++i) h.put<float>(std::size_t(268 + 4 * i), float(g.origin()[i]));
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col)
      h.put<float>(std::size_t(280 + 16 * row + 4 * col), row == col ? float(g.spacing()[row]) : 0.0f);
    h.put<float>(std::size_t(280 + 16 * row + 12), float(g.origin()[row]));
  }
  std::memcpy(h.bytes.data() + 344, "n+1\0", 4);

  std::vector<std::uint8_t> out(h.bytes.begin(), h.bytes.end());
  const auto* p = reinterpret_cast<const std::uint8_t*>(g.data().data());
  out.insert(out.end(), p, p + g.size() * sizeof(Scalar));
  return gzip ? gzip_compress(out) : out;
}

// ---------------------------------------------------------------------------
// raw_json

struct RawHeader {
  Index3 dims;
  Vec3 spacing;
};

RawHeader read_raw_header(const std::string& json_path) {
  const auto bytes = read_file(json_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(json_path, std::string("invalid JSON: ") + e.what());
  }
  auto vec3 = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3 || !j[key][0].is_number() ||
        !j[key][1].is_number() || !j[key][2].is_number())
      throw IoError(json_path, std::string("field '") + key + "' must be an array of 3 numbers");
    return Vec3(j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>());
  };
  RawHeader h;
  const Vec3 d = vec3("dims");
  for (int i = 0; i < 3; ++i) {
    if (d[i] < 1 || d[i] != std::floor(d[i])) throw IoError(json_path, "dims must be positive integers");
    h.dims[i] = int(d[i]);
  }
  h.spacing = vec3("spacing");
  if (!(h.spacing.array() > 0.0).all()) throw IoError(json_path, "spacing must be > 0");
  if (j.contains("order") && j["order"] != "x-fastest") throw IoError(json_path, "only order \"x-fastest\" is supported");
  return h;
}

std::vector<float> read_f32(const std::string& path, std::size_t count) {
  const auto bytes = read_file(path);
  if (bytes.size() != count * 4)
    throw IoError(path, "byte count " + std::to_string(bytes.size()) + " does not match dims (" +
                            std::to_string(count * 4) + " expected)");
  std::vector<float> out(count);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

void write_raw(const std::string& stem, const Index3& dims, const Vec3& spacing, const std::vector<float>& data) {
  nlohmann::json j;
  j["dims"] = {dims.x(), dims.y(), dims.z()};
  j["spacing"] = {spacing.x(), spacing.y(), spacing.z()};
  j["order"] = "x-fastest";
  const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
  write_file(stem + ".f32", std::vector<std::uint8_t>(p, p + data.size() * 4));
  write_text(stem + ".json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// frame directories

Volume load_frames(const std::string& dir) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".png") files.push_back(e.path().string());
  }
  if (ec) throw IoError(dir, "cannot list directory: " + ec.message());
  if (files.empty()) throw IoError(dir, "no PNG frames found");
  std::sort(files.begin(), files.end());

  Volume vol;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const GrayImage img = read_png(files[k]);
    if (k == 0) {
      vol = Volume(Index3(img.width, img.height, int(files.size())), Vec3::Ones());
    } else if (img.width != vol.dims().x() || img.height != vol.dims().y()) {
      throw IoError(files[k], "frame size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  " differs from first frame " + std::to_string(vol.dims().x()) + "x" +
                                  std::to_string(vol.dims().y()));
    }
    for (int v = 0; v < img.height; ++v)
      for (int u = 0; u < img.width; ++u)
        vol(u, v, int(k)) = float(img.samples[std::size_t(v) * std::size_t(img.width) + std::size_t(u)]);
  }
  return vol;
}

LabelVolume labels_from_floats(const Volume& v, const std::string& origin) {
  LabelVolume out = LabelVolume::like(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float f = v[i];
    if (!(f >= 0.0f) || f != std::floor(f) || f > 4294967295.0f)
      throw IoError(origin, "label values must be non-negative integers (voxel " + std::to_string(i) + " = " +
                                std::to_string(f) + ")");
    out[i] = std::uint32_t(f);
  }
  return out;
}

void check_finite(const Volume& v, const std::string& origin) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw IoError(origin, "non-finite intensity at voxel " + std::to_string(i));
}

}  // namespace

// ---------------------------------------------------------------------------

VolumeFormat parse_format(const std::string& name) {
  if (name == "nifti1" || name == "nifti") return VolumeFormat::nifti1;
  if (name == "frame_dir") return VolumeFormat::frame_dir;
  if (name == "raw_json") return VolumeFormat::raw_json;
  throw std::invalid_argument("unknown volume format '" + name + "' (expected nifti1, frame_dir, raw_json)");
}

const char* to_string(VolumeFormat f) {
  switch (f) {
    case VolumeFormat::nifti1: return "nifti1";
    case VolumeFormat::frame_dir: return "frame_dir";
    case VolumeFormat::raw_json: return "raw_json";
  }
  return "?";
}

VolumeFormat detect_format(const std::string& path) {
  if (fs::is_directory(path)) return VolumeFormat::frame_dir;
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) return VolumeFormat::nifti1;
  if (ends_with(path, ".json") || ends_with(path, ".f32") || fs::exists(path + ".json")) return VolumeFormat::raw_json;
  throw IoError(path, "cannot infer volume format from path (use .nii, .nii.gz, .json/.f32 or a frame directory)");
}

std::string raw_json_stem(const std::string& path) {
  if (ends_with(path, ".json")) return path.substr(0, path.size() - 5);
  if (ends_with(path, ".f32")) return path.substr(0, path.size() - 4);
  return path;
}

Volume load_volume(const std::string& path, VolumeFormat format) {
  Volume v;
  switch (format) {
    case VolumeFormat::nifti1:
      v = decode_nifti_volume(read_file(path), path);
      break;
    case VolumeFormat::frame_dir:
      v = load_frames(path);
      break;
    case VolumeFormat::raw_json: {
      const std::string stem = raw_json_stem(path);
      const RawHeader h = read_raw_header(stem + ".json");
      auto data = read_f32(stem + ".f32", std::size_t(h.dims.x()) * std::size_t(h.dims.y()) * std::size_t(h.dims.z()));
      v = Volume(h.dims, h.spacing, std::move(data));
      check_finite(v, stem + ".f32");
      break;
    }
  }
  return v;
}

Volume load_volume(const std::string& path) { return load_volume(path, detect_format(path)); }

void save_volume(const Volume& vol, const std::string& path, VolumeFormat format) {
  switch (format) {
    case VolumeFormat::nifti1:
      write_file(path, encode_nifti(vol, ends_with(path, ".gz")));
      break;
    case VolumeFormat::raw_json:
      write_raw(raw_json_stem(path), vol.dims(), vol.spacing(), vol.data());
      break;
    case VolumeFormat::frame_dir:
      throw std::invalid_argument("saving volumes as frame directories is not supported");
  }
}

void save_volume(const Volume& vol, const std::string& path) {
  save_volume(vol, path, (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) ? VolumeFormat::nifti1 : VolumeFormat::raw_json);
}

LabelVolume load_label(const std::string& path, VolumeFormat format) {
  if (format == VolumeFormat::nifti1) return decode_nifti_label(read_file(path), path);
  return labels_from_floats(load_volume(path, format), path);
}

LabelVolume load_label(const std::string& path) { return load_label(path, detect_format(path)); }

void save_label(const LabelVolume& label, const std::string& path, VolumeFormat format) {
  switch (format) {
    case VolumeFormat::nifti1:
      write_file(path, encode_nifti(label, ends_with(path, ".gz")));
      break;
    case VolumeFormat::raw_json: {
      std::vector<float> data(label.size());
      for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i] > (1u << 24)) throw std::invalid_argument("raw_json labels must be <= 2^24 to stay exact in float32");
        data[i] = float(label[i]);
      }
      write_raw(raw_json_stem(path), label.dims(), label.spacing(), data);
      break;
    }
    case VolumeFormat::frame_dir:
      throw std::invalid_argument("saving labels as frame directories is not supported");
  }
}

void save_label(const LabelVolume& label, const std::string& path) {
  save_label(label, path, (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) ? VolumeFormat::nifti1 : VolumeFormat::raw_json);
}

std::vector<std::uint8_t> encode_nifti(const Volume& vol, bool gzip) { return encode_nifti_impl(vol, kFloat32, gzip); }

std::vector<std::uint8_t> encode_nifti(const LabelVolume& label, bool gzip) {
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i] > std::uint32_t(std::numeric_limits<std::int32_t>::max()))
      throw std::invalid_argument("label id exceeds int32 range");
  return encode_nifti_impl(label, kInt32, gzip);
}

Volume decode_nifti_volume(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const auto raw = maybe_gunzip(bytes, origin);
  const NiftiRaw r = parse_nifti(raw, origin);
  Volume v(r.dims, r.spacing);
  v.set_origin(r.origin);
  const bool scaled = !(r.slope == 1.0 && r.inter == 0.0);
  for (std::size_t i = 0; i < r.count; ++i) {
    double x = raw_value(r, i);
    if (scaled) x = x * r.slope + r.inter;
    v[i] = float(x);
  }
  check_finite(v, origin);
  return v;
}

LabelVolume decode_nifti_label(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const auto raw = maybe_gunzip(bytes, origin);
  const NiftiRaw r = parse_nifti(raw, origin);
  LabelVolume out(r.dims, r.spacing);
  out.set_origin(r.origin);
  for (std::size_t i = 0; i < r.count; ++i) {
    const double x = raw_value(r, i) * r.slope + r.inter;
    if (!(x >= 0.0) || x != std::floor(x) || x > 4294967295.0)
      throw IoError(origin, "label values must be non-negative integers (voxel " + std::to_string(i) + ")");
    out[i] = std::uint32_t(x);
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, uLong(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = uInt(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = uInt(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

std::vector<std::uint8_t> maybe_gunzip(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b) return bytes;
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw std::runtime_error("inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk;
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = uInt(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = uInt(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError(origin, "corrupt gzip stream");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw IoError(origin, "truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace dragdrop::io
