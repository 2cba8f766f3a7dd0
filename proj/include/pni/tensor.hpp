#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pni {

// Generic dense float tensor, row-major. This is what the PNIT file format
// carries; the pipeline's typed containers convert to and from it.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint32_t> shape, float fill = 0.0f);

  std::size_t numel() const;
};

std::size_t shape_numel(std::span<const std::uint32_t> dims);

// Row-major float matrix. Rows are feature vectors throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  float* row(std::size_t r) { return data_.data() + r * cols_; }
  const float* row(std::size_t r) const { return data_.data() + r * cols_; }
  std::span<const float> row_span(std::size_t r) const { return {row(r), cols_}; }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  void append_row(std::span<const float> v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Dense feature map. Stored position-major (height, width, channels) so that
// the feature vector at each position is contiguous; the PNIT representation
// is channel-major (channels, height, width) as exported by CNN frameworks.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t positions() const { return height_ * width_; }

  float* at(std::size_t y, std::size_t x) { return data_.data() + (y * width_ + x) * channels_; }
  const float* at(std::size_t y, std::size_t x) const {
    return data_.data() + (y * width_ + x) * channels_;
  }
  std::span<const float> vector_at(std::size_t y, std::size_t x) const { return {at(y, x), channels_}; }

  float& operator()(std::size_t c, std::size_t y, std::size_t x) { return at(y, x)[c]; }
  float operator()(std::size_t c, std::size_t y, std::size_t x) const { return at(y, x)[c]; }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

Tensor to_tensor(const FeatureMap& map);
FeatureMap feature_map_from_tensor(const Tensor& t);

// Single-channel scalar field: anomaly maps, masks, score grids.
class Map2D {
 public:
  Map2D() = default;
  Map2D(std::size_t height, std::size_t width, float fill = 0.0f)
      : height_(height), width_(width), data_(height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  float& operator()(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
  float operator()(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool same_shape(const Map2D& o) const { return height_ == o.height_ && width_ == o.width_; }
  bool operator==(const Map2D&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

Tensor to_tensor(const Map2D& map);
Map2D map_from_tensor(const Tensor& t);

// Interleaved image with 1 (gray) or 3 (RGB) channels, values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }

  float& operator()(std::size_t y, std::size_t x, std::size_t c = 0) {
    return data_[(y * width_ + x) * channels_ + c];
  }
  float operator()(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return data_[(y * width_ + x) * channels_ + c];
  }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
};

// (channels, height, width) tensor, matching the bridge's image layout.
Tensor to_tensor(const Image& image);
Image image_from_tensor(const Tensor& t);

}  // namespace pni
