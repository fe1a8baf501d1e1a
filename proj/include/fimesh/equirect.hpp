// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>

namespace fimesh {

// Equirectangular image; values are f64 in [0,1], one column per pixel in
// row-major pixel order (values(c, y*width + x)). Pixel centers map to
// lon = (x+0.5)/W * 2pi - pi, lat = pi/2 - (y+0.5)/H * pi.
struct EquirectImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  Eigen::MatrixXd values;

  double at(int c, int x, int y) const {
    return values(c, static_cast<std::int64_t>(y) * width + x);
  }
  double& at(int c, int x, int y) {
    return values(c, static_cast<std::int64_t>(y) * width + x);
  }
};

EquirectImage make_image(int width, int height, int channels, double fill = 0.0);

inline double pixel_lon(int x, int width) {
  return (x + 0.5) / width * 2.0 * 3.14159265358979323846 - 3.14159265358979323846;
}
inline double pixel_lat(int y, int height) {
  return 3.14159265358979323846 / 2.0 -
         (y + 0.5) / height * 3.14159265358979323846;
}

// Nearest pixel containing the given direction: x wraps modulo width, y is
// clamped to the valid rows.
int lon_to_pixel_x(double lon, int width);
int lat_to_pixel_y(double lat, int height);

// PNG (any bit depth/color type, flattened to 8-bit gray or RGB) and
// PPM/PGM (P2/P3/P5/P6). Unopenable file -> MissingInputError; undecodable
// content -> DataError.
EquirectImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const EquirectImage& img);

// Box-filter (exact area average) downscale to width x width/2. Requires
// the input to be 2:1, the target width even and not above the input width.
EquirectImage downscale_equirect(const EquirectImage& img, int width);

// BT.601 luma; single-channel images pass through unchanged.
EquirectImage to_luminance(const EquirectImage& img);

}  // namespace fimesh
