#pragma once

#include <cstddef>
#include <vector>

namespace pni {

// Half-pixel-center bilinear resampling of an interleaved (h, w, channels)
// buffer. Source coordinates are clamped to the valid range, so same-size
// resampling reproduces the input exactly.
std::vector<float> resize_bilinear(const float* src, std::size_t in_h, std::size_t in_w, std::size_t channels,
                                   std::size_t out_h, std::size_t out_w);

}  // namespace pni
