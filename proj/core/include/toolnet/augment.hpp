#pragma once

#include <array>
#include <random>

#include "toolnet/image.hpp"

namespace toolnet {

using Rng = std::mt19937_64;

/// RGB covariance eigenpairs for the PCA color shift. Column k of
/// `eigenvectors` is the eigenvector belonging to `eigenvalues[k]`.
struct ColorPca {
  std::array<double, 3> eigenvalues{0.0, 0.0, 0.0};
  std::array<std::array<double, 3>, 3> eigenvectors{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
};

/// Covariance of RGB values over at most `max_pixels` pixels drawn evenly
/// from the given images, then a symmetric 3x3 eigendecomposition.
ColorPca compute_color_pca(const std::vector<Image>& images, std::size_t max_pixels = 10000);

struct AugmentationParams {
  std::size_t scale_w = 128;
  std::size_t scale_h = 76;
  std::size_t crop_w = 120;
  std::size_t crop_h = 68;
  double max_rotation_deg = 15.0;
  ColorPca color;
};

/// One set of random draws for the 4-stage pipeline; kept separate so
/// tests can pin every stage.
struct AugmentationDraws {
  std::size_t offset_x = 0;
  std::size_t offset_y = 0;
  bool flip = false;
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  double rotation_deg = 0.0;
};

AugmentationDraws sample_draws(const AugmentationParams& params, Rng& rng);

/// Stage order: scale + crop, horizontal flip, PCA color shift, rotation.
/// Output size is always (crop_w, crop_h).
Image augment_with_draws(const Image& img, const AugmentationParams& params, const AugmentationDraws& draws);

inline Image augment(const Image& img, const AugmentationParams& params, Rng& rng) {
  return augment_with_draws(img, params, sample_draws(params, rng));
}

/// Deterministic validation-path preprocessing: scale then center crop.
Image scale_center_crop(const Image& img, const AugmentationParams& params);

}  // namespace toolnet
