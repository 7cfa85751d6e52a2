#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "conceptor/synthetic.hpp"

namespace conceptor {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

/// Quantizes an image with round((v + 1) * 127.5).
RgbRaster to_raster(const Image& image);
/// Lays images out left to right, top to bottom with a 1-pixel gap.
RgbRaster tile(const std::vector<Image>& images, int columns);

/// Deterministic PNG encoding (no timestamps, fixed compression level).
std::vector<std::uint8_t> encode_png(const RgbRaster& raster);
RgbRaster decode_png(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace conceptor
