#include "conceptor/png.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <png.h>

namespace conceptor {

RgbRaster to_raster(const Image& image) {
  require(image.size() == kImageDim, "to_raster: image has wrong size");
  RgbRaster r{kImageSize, kImageSize, std::vector<std::uint8_t>(static_cast<std::size_t>(kImageDim))};
  for (Eigen::Index i = 0; i < image.size(); ++i) r.data[static_cast<std::size_t>(i)] = quantize_pixel(image[i]);
  return r;
}

RgbRaster tile(const std::vector<Image>& images, int columns) {
  require(!images.empty() && columns >= 1, "tile: nothing to tile");
  const int n = static_cast<int>(images.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  RgbRaster out;
  out.width = cols * (kImageSize + 1) - 1;
  out.height = rows * (kImageSize + 1) - 1;
  out.data.assign(static_cast<std::size_t>(out.width) * out.height * 3, 255);
  for (int i = 0; i < n; ++i) {
    const auto r = to_raster(images[static_cast<std::size_t>(i)]);
    const int ox = (i % cols) * (kImageSize + 1), oy = (i / cols) * (kImageSize + 1);
    for (int y = 0; y < kImageSize; ++y)
      std::memcpy(&out.data[(static_cast<std::size_t>(oy + y) * out.width + ox) * 3],
                  &r.data[static_cast<std::size_t>(y) * kImageSize * 3], kImageSize * 3);
  }
  return out;
}

namespace {

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

struct ReadState {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void read_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (st->offset + length > st->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, st->bytes->data() + st->offset, length);
  st->offset += length;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbRaster& raster) {
  require(raster.width > 0 && raster.height > 0 &&
              raster.data.size() == static_cast<std::size_t>(raster.width) * raster.height * 3,
          "encode_png: bad raster");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("encode_png: libpng init failed");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("encode_png: libpng error");
  }
  png_set_write_fn(png, &out, write_callback, flush_callback);
  png_set_compression_level(png, 9);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < raster.height; ++y)
    png_write_row(png, const_cast<png_bytep>(&raster.data[static_cast<std::size_t>(y) * raster.width * 3]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

RgbRaster decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IntegrityError("decode_png: not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("decode_png: libpng init failed");
  }
  RgbRaster r;
  ReadState st{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IntegrityError("decode_png: malformed PNG");
  }
  png_set_read_fn(png, &st, read_callback);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(r.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IntegrityError("decode_png: unsupported pixel layout");
  }
  r.data.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  for (int y = 0; y < r.height; ++y) png_read_row(png, &r.data[static_cast<std::size_t>(y) * r.width * 3], nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace conceptor
