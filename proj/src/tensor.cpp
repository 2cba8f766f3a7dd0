#include "pni/tensor.hpp"

#include <algorithm>

namespace pni {

void Matrix::append_row(std::span<const float> v) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = v.size();
  }
  if (v.size() != cols_) {
    throw std::invalid_argument("dimension mismatch: row of width " + std::to_string(v.size()) +
                                " appended to matrix of width " + std::to_string(cols_));
  }
  data_.insert(data_.end(), v.begin(), v.end());
  ++rows_;
}

Tensor to_tensor(const FeatureMap& map) {
  Tensor t({static_cast<std::uint32_t>(map.channels()), static_cast<std::uint32_t>(map.height()),
            static_cast<std::uint32_t>(map.width())});
  const std::size_t plane = map.height() * map.width();
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      const float* v = map.at(y, x);
      for (std::size_t c = 0; c < map.channels(); ++c) {
        t.data[c * plane + y * map.width() + x] = v[c];
      }
    }
  }
  return t;
}

FeatureMap feature_map_from_tensor(const Tensor& t) {
  // Accept (C,H,W) or a leading batch dimension of 1.
  std::vector<std::uint32_t> dims = t.dims;
  if (dims.size() == 4 && dims[0] == 1) dims.erase(dims.begin());
  if (dims.size() != 3) {
    throw std::invalid_argument("feature map tensor must be (C,H,W), got rank " + std::to_string(t.dims.size()));
  }
  FeatureMap map(dims[0], dims[1], dims[2]);
  const std::size_t plane = std::size_t(dims[1]) * dims[2];
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      float* v = map.at(y, x);
      for (std::size_t c = 0; c < map.channels(); ++c) {
        v[c] = t.data[c * plane + y * map.width() + x];
      }
    }
  }
  return map;
}

Tensor to_tensor(const Map2D& map) {
  Tensor t({static_cast<std::uint32_t>(map.height()), static_cast<std::uint32_t>(map.width())});
  t.data = map.values();
  return t;
}

Map2D map_from_tensor(const Tensor& t) {
  std::vector<std::uint32_t> dims = t.dims;
  while (dims.size() > 2 && dims.front() == 1) dims.erase(dims.begin());
  if (dims.size() != 2) {
    throw std::invalid_argument("map tensor must be (H,W), got rank " + std::to_string(t.dims.size()));
  }
  Map2D map(dims[0], dims[1]);
  map.values() = t.data;
  return map;
}

Image::Image(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("image must have 1 or 3 channels");
  }
}

Tensor to_tensor(const Image& image) {
  Tensor t({static_cast<std::uint32_t>(image.channels()), static_cast<std::uint32_t>(image.height()),
            static_cast<std::uint32_t>(image.width())});
  const std::size_t plane = image.height() * image.width();
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      for (std::size_t c = 0; c < image.channels(); ++c) {
        t.data[c * plane + y * image.width() + x] = image(y, x, c);
      }
    }
  }
  return t;
}

Image image_from_tensor(const Tensor& t) {
  if (t.dims.size() != 3 || (t.dims[0] != 1 && t.dims[0] != 3)) {
    throw std::invalid_argument("image tensor must be (1|3,H,W)");
  }
  Image image(t.dims[1], t.dims[2], t.dims[0]);
  const std::size_t plane = image.height() * image.width();
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      for (std::size_t c = 0; c < image.channels(); ++c) {
        image(y, x, c) = std::clamp(t.data[c * plane + y * image.width() + x], 0.0f, 1.0f);
      }
    }
  }
  return image;
}

}  // namespace pni
