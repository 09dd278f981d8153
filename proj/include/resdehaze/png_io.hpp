#pragma once

#include <string>

#include "resdehaze/tensor.hpp"

namespace resdehaze {

// 8-bit RGB PNG <-> (3,H,W) float image in [0,1] (divide by 255 on load,
// round(v*255) on store). 16-bit grayscale PNG <-> (1,H,W) map in [0,1].
// Writers use fixed encoder settings so identical tensors produce identical
// bytes. All functions throw std::runtime_error on I/O or format problems.

Tensor<float> read_png_rgb8(const std::string& path);
void write_png_rgb8(const std::string& path, const Tensor<float>& img);

Tensor<float> read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const Tensor<float>& map);

}  // namespace resdehaze
