#include "dragdrop/io/png.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "dragdrop/core/error.hpp"

namespace dragdrop::io {

namespace {

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->bytes->data() + cur->pos, n);
  cur->pos += n;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

[[noreturn]] void on_error(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode_rows(int width, int height, int bit_depth,
                                      const std::vector<std::vector<std::uint8_t>>& rows) {
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, write_to_memory, flush_noop);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& img) {
  std::vector<std::vector<std::uint8_t>> rows(std::size_t(img.height));
  for (int v = 0; v < img.height; ++v)
    rows[std::size_t(v)].assign(img.pixels.begin() + std::ptrdiff_t(v) * img.width,
                                img.pixels.begin() + std::ptrdiff_t(v + 1) * img.width);
  return encode_rows(img.width, img.height, 8, rows);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16) throw std::invalid_argument("PNG bit depth must be 8 or 16");
  const int bpp = img.bit_depth / 8;
  std::vector<std::vector<std::uint8_t>> rows(std::size_t(img.height));
  for (int v = 0; v < img.height; ++v) {
    auto& row = rows[std::size_t(v)];
    row.resize(std::size_t(img.width * bpp));
    for (int u = 0; u < img.width; ++u) {
      const std::uint16_t s = img.samples[std::size_t(v) * std::size_t(img.width) + std::size_t(u)];
      if (bpp == 1) {
        row[std::size_t(u)] = std::uint8_t(s);
      } else {  // PNG stores 16-bit samples big-endian
        row[std::size_t(2 * u)] = std::uint8_t(s >> 8);
        row[std::size_t(2 * u + 1)] = std::uint8_t(s & 0xff);
      }
    }
  }
  return encode_rows(img.width, img.height, img.bit_depth, rows);
}

GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError(origin, "not a PNG file");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  GrayImage img;
  ReadCursor cur{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(origin, "PNG decode failed: " + err);
  }
  png_set_read_fn(png, &cur, read_from_memory);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(origin, "only single-channel grayscale PNG frames are supported");
  }
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);
  img.width = int(png_get_image_width(png, info));
  img.height = int(png_get_image_height(png, info));
  img.bit_depth = depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> row(rowbytes);
  img.samples.resize(std::size_t(img.width) * std::size_t(img.height));
  for (int v = 0; v < img.height; ++v) {
    png_read_row(png, row.data(), nullptr);
    for (int u = 0; u < img.width; ++u) {
      std::uint16_t s = depth == 16 ? std::uint16_t((row[std::size_t(2 * u)] << 8) | row[std::size_t(2 * u + 1)])
                                    : row[std::size_t(u)];
      img.samples[std::size_t(v) * std::size_t(img.width) + std::size_t(u)] = s;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

GrayImage read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes, path);
}

void write_png(const std::string& path, const GrayImage& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

}  // namespace dragdrop::io
