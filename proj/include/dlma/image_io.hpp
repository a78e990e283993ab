#pragma once

#include <filesystem>

#include "dlma/raster.hpp"

namespace dlma {

/// Reads 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette) or binary PGM/PPM
/// with maxval 255. Code k becomes k / 255. Alpha is dropped.
///
/// Errors: ErrorCode::io when the file cannot be read, unsupported_format for
/// unknown magic bytes, unsupported_depth for 16-bit data or maxval != 255.
Raster load_image(const std::filesystem::path& path);

/// Quantizes every value with step `q`, then encodes 8-bit codes. The format
/// follows the extension: .png, .pgm (1 channel), .ppm (3 channels) or .pnm.
void save_image(const Raster& r, const std::filesystem::path& path, const QuantSpec& q = {});

/// 8-bit code for a [0,1] value after quantization with step q.
unsigned char encode_code(double value, double q);

}  // namespace dlma
