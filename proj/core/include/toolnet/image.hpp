#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace toolnet {

/// RGB image with planar channel layout and double pixels, values
/// nominally in [0,1]. Written to disk as binary PPM (P6, 8-bit).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pix;  // [3][height][width]

  Image() = default;
  Image(std::size_t w, std::size_t h) : width(w), height(h), pix(3 * w * h, 0.0) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pix[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pix[(c * height + y) * width + x]; }
};

void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

Image resize_bilinear(const Image& img, std::size_t new_w, std::size_t new_h);
Image crop(const Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h);
Image hflip(const Image& img);
/// Rotation about the image center, bilinear sampling, edge-replicate
/// padding. Angle in degrees, counter-clockwise.
Image rotate(const Image& img, double degrees);

}  // namespace toolnet
