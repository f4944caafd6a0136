#include "stcooc/image.hpp"

#include <algorithm>
#include <cmath>

namespace stcooc {

FeatureMap to_grayscale(const FeatureMap& map) {
  if (map.depth() == 1) return map;
  if (map.depth() != 3) throw ShapeError("grayscale conversion needs depth 1 or 3, got " + map.shape_string());
  FeatureMap out(map.frames(), map.height(), map.width(), 1);
  const auto px = map.pixels();
  for (Eigen::Index p = 0; p < px.rows(); ++p)
    out.values()[p] = float(0.299 * px(p, 0) + 0.587 * px(p, 1) + 0.114 * px(p, 2));
  return out;
}

Image channel_image(const FeatureMap& map, int c) {
  if (c < 0 || c >= map.depth()) throw ShapeError("channel index out of range");
  Image img(map.height(), map.width());
  for (int i = 0; i < map.height(); ++i)
    for (int j = 0; j < map.width(); ++j) img(i, j) = map(i, j, c);
  return img;
}

double sample_bilinear(const Image& img, double y, double x) {
  const double ymax = double(img.rows() - 1);
  const double xmax = double(img.cols() - 1);
  y = std::clamp(y, 0.0, ymax);
  x = std::clamp(x, 0.0, xmax);
  const auto y0 = static_cast<Eigen::Index>(std::floor(y));
  const auto x0 = static_cast<Eigen::Index>(std::floor(x));
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, img.rows() - 1);
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, img.cols() - 1);
  const double fy = y - double(y0);
  const double fx = x - double(x0);
  return (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) +
         fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
}

FeatureMap resample_region(const FeatureMap& map, int y0, int x0, int h, int w, int out_h, int out_w) {
  if (map.frames() != 1) throw ShapeError("resampling expects a single-frame map");
  if (h <= 0 || w <= 0 || y0 < 0 || x0 < 0 || y0 + h > map.height() || x0 + w > map.width())
    throw ShapeError("resample region outside map");
  FeatureMap out(out_h, out_w, map.depth());
  const double sy = double(h) / out_h;
  const double sx = double(w) / out_w;
  for (int i = 0; i < out_h; ++i) {
    const double y = std::clamp((i + 0.5) * sy - 0.5, 0.0, double(h - 1)) + y0;
    const int yi = int(std::floor(y));
    const int yj = std::min(yi + 1, y0 + h - 1);
    const double fy = y - yi;
    for (int j = 0; j < out_w; ++j) {
      const double x = std::clamp((j + 0.5) * sx - 0.5, 0.0, double(w - 1)) + x0;
      const int xi = int(std::floor(x));
      const int xj = std::min(xi + 1, x0 + w - 1);
      const double fx = x - xi;
      for (int c = 0; c < map.depth(); ++c) {
        const double v = (1 - fy) * ((1 - fx) * map(yi, xi, c) + fx * map(yi, xj, c)) +
                         fy * ((1 - fx) * map(yj, xi, c) + fx * map(yj, xj, c));
        out(i, j, c) = float(v);
      }
    }
  }
  return out;
}

FeatureMap resize_bilinear(const FeatureMap& map, int out_h, int out_w) {
  if (map.height() == out_h && map.width() == out_w) return map;
  return resample_region(map, 0, 0, map.height(), map.width(), out_h, out_w);
}

}  // namespace stcooc
