#include "toolnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace toolnet {

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open image for writing: " + path);
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> row(img.width * 3);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        row[x * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write failure on image: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open image: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("unsupported image format in " + path);
  std::size_t w = 0, h = 0, maxval = 0;
  // Skip whitespace and '#' comment lines between header tokens.
  auto next_token = [&]() -> std::size_t {
    while (true) {
      int ch = is.peek();
      if (ch == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(ch)) {
        is.get();
      } else {
        break;
      }
    }
    std::size_t v;
    is >> v;
    return v;
  };
  w = next_token();
  h = next_token();
  maxval = next_token();
  if (maxval != 255) throw std::runtime_error("expected 8-bit PPM in " + path);
  is.get();  // single whitespace before pixel data
  Image img(w, h);
  std::vector<unsigned char> row(w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!is) throw std::runtime_error("truncated image: " + path);
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = row[x * 3 + c] / 255.0;
    }
  }
  return img;
}

namespace {

double sample_clamped(const Image& img, std::size_t c, double y, double x) {
  // Bilinear with edge replication.
  double xc = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  double yc = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  std::size_t x0 = static_cast<std::size_t>(xc);
  std::size_t y0 = static_cast<std::size_t>(yc);
  std::size_t x1 = std::min(x0 + 1, img.width - 1);
  std::size_t y1 = std::min(y0 + 1, img.height - 1);
  double fx = xc - static_cast<double>(x0);
  double fy = yc - static_cast<double>(y0);
  double top = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
  double bot = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

}  // namespace

Image resize_bilinear(const Image& img, std::size_t new_w, std::size_t new_h) {
  if (new_w == 0 || new_h == 0) throw std::invalid_argument("resize_bilinear: zero target size");
  if (new_w == img.width && new_h == img.height) return img;
  Image out(new_w, new_h);
  double sx = static_cast<double>(img.width) / static_cast<double>(new_w);
  double sy = static_cast<double>(img.height) / static_cast<double>(new_h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < new_h; ++y) {
      double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
      for (std::size_t x = 0; x < new_w; ++x) {
        double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
        out.at(c, y, x) = sample_clamped(img, c, src_y, src_x);
      }
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (x0 + w > img.width || y0 + h > img.height) {
    throw std::invalid_argument("crop: window exceeds image bounds");
  }
  Image out(w, h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.width, img.height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  double theta = degrees * M_PI / 180.0;
  double ct = std::cos(theta), st = std::sin(theta);
  double cx = 0.5 * static_cast<double>(img.width - 1);
  double cy = 0.5 * static_cast<double>(img.height - 1);
  Image out(img.width, img.height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      double dy = static_cast<double>(y) - cy;
      for (std::size_t x = 0; x < img.width; ++x) {
        double dx = static_cast<double>(x) - cx;
        // inverse map: rotate output coordinates back into the source
        double sx = cx + ct * dx + st * dy;
        double sy = cy - st * dx + ct * dy;
        out.at(c, y, x) = sample_clamped(img, c, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace toolnet
