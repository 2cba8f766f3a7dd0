#include "pni/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "pni/tensorio.hpp"

namespace pni {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

// Heat ramp: black -> red -> yellow -> white.
void ramp(float t, std::uint8_t rgb[3]) {
  const float r = std::clamp(3.0f * t, 0.0f, 1.0f);
  const float g = std::clamp(3.0f * t - 1.0f, 0.0f, 1.0f);
  const float b = std::clamp(3.0f * t - 2.0f, 0.0f, 1.0f);
  rgb[0] = quantize_unit(r);
  rgb[1] = quantize_unit(g);
  rgb[2] = quantize_unit(b);
}

}  // namespace

std::uint8_t quantize_unit(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::floor(c * 255.0f + 0.5f));
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TensorIoError(TensorIoError::Kind::kIo, "cannot open " + path.string());
  }
  const std::string magic = next_token(in);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw TensorIoError(TensorIoError::Kind::kBadMagic, path.string() + ": not a binary PGM/PPM");
  }
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(next_token(in));
    height = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw TensorIoError(TensorIoError::Kind::kCorruptHeader, path.string() + ": bad PNM header");
  }
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw TensorIoError(TensorIoError::Kind::kCorruptHeader, path.string() + ": unsupported PNM geometry");
  }
  std::vector<unsigned char> raw(width * height * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw TensorIoError(TensorIoError::Kind::kPayloadMismatch, path.string() + ": truncated PNM payload");
  }
  Image image(height, width, channels);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    image.values()[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
  }
  return image;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw TensorIoError(TensorIoError::Kind::kIo, "cannot open " + path.string() + " for writing");
  }
  out << (image.channels() == 1 ? "P5" : "P6") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw(image.values().size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize_unit(image.values()[i]);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) {
    throw TensorIoError(TensorIoError::Kind::kIo, "write failure on " + path.string());
  }
}

std::vector<std::uint8_t> map_to_gray_levels(const Map2D& map, float lo, float hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("map range requires min < max");
  }
  std::vector<std::uint8_t> levels(map.size());
  const float span = hi - lo;
  for (std::size_t i = 0; i < map.size(); ++i) {
    levels[i] = quantize_unit((std::clamp(map.values()[i], lo, hi) - lo) / span);
  }
  return levels;
}

void write_map_image(const std::filesystem::path& path, const Map2D& map, float lo, float hi,
                     MapStyle style) {
  const auto levels = map_to_gray_levels(map, lo, hi);
  if (style == MapStyle::kGray) {
    Image gray(map.height(), map.width(), 1);
    for (std::size_t i = 0; i < levels.size(); ++i) gray.values()[i] = levels[i] / 255.0f;
    write_pnm(path, gray);
    return;
  }
  Image color(map.height(), map.width(), 3);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::uint8_t rgb[3];
    ramp(levels[i] / 255.0f, rgb);
    for (int c = 0; c < 3; ++c) color.values()[3 * i + c] = rgb[c] / 255.0f;
  }
  write_pnm(path, color);
}

}  // namespace pni
