#include "toolnet/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace toolnet {

namespace {

// Jacobi eigendecomposition for a symmetric 3x3 matrix.
void jacobi3(std::array<std::array<double, 3>, 3> a, std::array<double, 3>& eigenvalues,
             std::array<std::array<double, 3>, 3>& eigenvectors) {
  std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off < 1e-15) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-18) continue;
        double phi = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
        double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < 3; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (int i = 0; i < 3; ++i) eigenvalues[i] = a[i][i];
  eigenvectors = v;
}

}  // namespace

ColorPca compute_color_pca(const std::vector<Image>& images, std::size_t max_pixels) {
  if (images.empty()) throw std::invalid_argument("compute_color_pca: empty image set");
  std::size_t total = 0;
  for (const auto& img : images) total += img.width * img.height;
  std::size_t step = std::max<std::size_t>(1, total / std::max<std::size_t>(1, max_pixels));

  double mean[3] = {0, 0, 0};
  std::size_t count = 0;
  for (const auto& img : images) {
    std::size_t npix = img.width * img.height;
    for (std::size_t i = 0; i < npix; i += step) {
      for (int c = 0; c < 3; ++c) mean[c] += img.pix[c * npix + i];
      ++count;
    }
  }
  for (int c = 0; c < 3; ++c) mean[c] /= static_cast<double>(count);

  std::array<std::array<double, 3>, 3> cov{};
  for (const auto& img : images) {
    std::size_t npix = img.width * img.height;
    for (std::size_t i = 0; i < npix; i += step) {
      double d[3];
      for (int c = 0; c < 3; ++c) d[c] = img.pix[c * npix + i] - mean[c];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
      }
    }
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cov[r][c] /= static_cast<double>(count);
  }

  ColorPca pca;
  jacobi3(cov, pca.eigenvalues, pca.eigenvectors);
  return pca;
}

AugmentationDraws sample_draws(const AugmentationParams& params, Rng& rng) {
  if (params.crop_w > params.scale_w || params.crop_h > params.scale_h) {
    throw std::invalid_argument("augment: crop larger than scaled image");
  }
  AugmentationDraws d;
  // Integer offsets, both endpoints inclusive.
  std::uniform_int_distribution<std::size_t> ox(0, params.scale_w - params.crop_w);
  std::uniform_int_distribution<std::size_t> oy(0, params.scale_h - params.crop_h);
  d.offset_x = ox(rng);
  d.offset_y = oy(rng);
  d.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& a : d.alpha) a = normal(rng);
  d.rotation_deg =
      std::uniform_real_distribution<double>(-params.max_rotation_deg, params.max_rotation_deg)(rng);
  return d;
}

Image augment_with_draws(const Image& img, const AugmentationParams& params, const AugmentationDraws& draws) {
  if (params.crop_w > params.scale_w || params.crop_h > params.scale_h) {
    throw std::invalid_argument("augment: crop larger than scaled image");
  }
  Image out = resize_bilinear(img, params.scale_w, params.scale_h);
  out = crop(out, draws.offset_x, draws.offset_y, params.crop_w, params.crop_h);
  if (draws.flip) out = hflip(out);
  bool shift = draws.alpha[0] != 0.0 || draws.alpha[1] != 0.0 || draws.alpha[2] != 0.0;
  if (shift) {
    double delta[3];
    for (int c = 0; c < 3; ++c) {
      delta[c] = 0.0;
      for (int k = 0; k < 3; ++k) {
        delta[c] += draws.alpha[k] * params.color.eigenvalues[k] * params.color.eigenvectors[c][k];
      }
    }
    std::size_t npix = out.width * out.height;
    for (int c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < npix; ++i) out.pix[c * npix + i] += delta[c];
    }
  }
  if (draws.rotation_deg != 0.0) out = rotate(out, draws.rotation_deg);
  return out;
}

Image scale_center_crop(const Image& img, const AugmentationParams& params) {
  Image out = resize_bilinear(img, params.scale_w, params.scale_h);
  std::size_t x0 = (params.scale_w - params.crop_w) / 2;
  std::size_t y0 = (params.scale_h - params.crop_h) / 2;
  return crop(out, x0, y0, params.crop_w, params.crop_h);
}

}  // namespace toolnet
