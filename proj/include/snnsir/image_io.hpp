#pragma once

#include <string>

#include "snnsir/tensor.hpp"

namespace snnsir {

/// Reads an 8-bit non-interlaced PNG into [3,H,W] doubles in [0,1].
/// Grayscale is promoted to RGB by channel copy; RGBA drops alpha.
/// Malformed files raise DecodeError.
Tensor load_png(const std::string& path);

/// Writes [3,H,W] (or [1,H,W]) in [0,1] as 8-bit RGB; values are clipped and
/// rounded half-up to bytes.
void save_png(const std::string& path, const Tensor& image);

/// Heatmap of values in [0,1] on a blue-white-red ramp.
void save_heatmap_png(const std::string& path, const std::vector<double>& values,
                      int64_t height, int64_t width);

}  // namespace snnsir
