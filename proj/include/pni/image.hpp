#pragma once

#include <filesystem>

#include "pni/tensor.hpp"

namespace pni {

// Binary PGM (P5, gray) and PPM (P6, RGB), maxval 255. Values are mapped to
// [0,1] on read and quantized with round-half-up on write.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

// 8-bit quantization used by every writer: clamp to [0,1], then
// floor(v * 255 + 0.5).
std::uint8_t quantize_unit(float v);

enum class MapStyle { kGray, kColorRamp };

// Render a scalar map: values are clamped to [lo, hi] and linearly mapped to
// 0..255. kGray writes PGM, kColorRamp writes a PPM heatmap.
void write_map_image(const std::filesystem::path& path, const Map2D& map, float lo, float hi,
                     MapStyle style = MapStyle::kGray);

// Quantized gray levels write_map_image would emit, exposed for tests.
std::vector<std::uint8_t> map_to_gray_levels(const Map2D& map, float lo, float hi);

}  // namespace pni
