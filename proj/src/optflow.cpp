#include "stcooc/optflow.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace stcooc {

namespace {

constexpr double kSorRelaxation = 1.9;
constexpr double kSorTolerance = 1e-7;
constexpr Eigen::Index kMinLevelSide = 16;

}  // namespace

FlowField::FlowField(FlowComponent horizontal, FlowComponent vertical)
    : u(std::move(horizontal)), v(std::move(vertical)) {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw ShapeError("flow components differ in shape");
  if (u.size() == 0) throw ShapeError("empty flow field");
  if (!u.allFinite() || !v.allFinite()) throw InvalidValue("non-finite flow");
}

FlowField::FlowField(int height, int width)
    : u(FlowComponent::Zero(height, width)), v(FlowComponent::Zero(height, width)) {
  if (height <= 0 || width <= 0) throw ShapeError("flow dimensions must be positive");
}

void FlowParams::validate() const {
  if (pyramid_levels < 1) throw InvalidValue("pyramid_levels must be >= 1");
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) throw InvalidValue("scale_factor must lie in (0,1)");
  if (!(smoothness_alpha > 0.0)) throw InvalidValue("smoothness_alpha must be > 0");
  if (solver_iterations < 1) throw InvalidValue("solver_iterations must be >= 1");
  if (warp_steps_per_level < 1) throw InvalidValue("warp_steps_per_level must be >= 1");
}

namespace detail {

Image to_intensity(const FeatureMap& frame) {
  Image img = channel_image(frame, 0);
  return img * 255.0;
}

Image gaussian_smooth(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(std::size_t(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[std::size_t(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[std::size_t(k + radius)];
  }
  for (double& k : kernel) k /= total;

  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  Image tmp(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const Eigen::Index jj = std::clamp<Eigen::Index>(j + k, 0, cols - 1);
        acc += kernel[std::size_t(k + radius)] * img(i, jj);
      }
      tmp(i, j) = acc;
    }
  Image out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const Eigen::Index ii = std::clamp<Eigen::Index>(i + k, 0, rows - 1);
        acc += kernel[std::size_t(k + radius)] * tmp(ii, j);
      }
      out(i, j) = acc;
    }
  return out;
}

Image resize_image(const Image& img, Eigen::Index rows, Eigen::Index cols) {
  Image out(rows, cols);
  const double sy = double(img.rows()) / double(rows);
  const double sx = double(img.cols()) / double(cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = sample_bilinear(img, (double(i) + 0.5) * sy - 0.5, (double(j) + 0.5) * sx - 0.5);
  return out;
}

void centred_gradient(const Image& img, Image& gx, Image& gy) {
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  gx.resize(rows, cols);
  gy.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index up = std::max<Eigen::Index>(i - 1, 0);
    const Eigen::Index down = std::min<Eigen::Index>(i + 1, rows - 1);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Eigen::Index left = std::max<Eigen::Index>(j - 1, 0);
      const Eigen::Index right = std::min<Eigen::Index>(j + 1, cols - 1);
      gx(i, j) = 0.5 * (img(i, right) - img(i, left));
      gy(i, j) = 0.5 * (img(down, j) - img(up, j));
    }
  }
}

Image warp_image(const Image& img, const Image& u, const Image& v) {
  Image out(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < img.rows(); ++i)
    for (Eigen::Index j = 0; j < img.cols(); ++j)
      out(i, j) = sample_bilinear(img, double(i) + v(i, j), double(j) + u(i, j));
  return out;
}

int solve_linearised(const Image& ix, const Image& iy, const Image& it0, double alpha,
                     int max_sweeps, Image& u, Image& v) {
  const Eigen::Index rows = u.rows();
  const Eigen::Index cols = u.cols();
  int sweep = 0;
  while (sweep < max_sweeps) {
    ++sweep;
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        double su = 0.0, sv = 0.0;
        int n = 0;
        if (i > 0) { su += u(i - 1, j); sv += v(i - 1, j); ++n; }
        if (i + 1 < rows) { su += u(i + 1, j); sv += v(i + 1, j); ++n; }
        if (j > 0) { su += u(i, j - 1); sv += v(i, j - 1); ++n; }
        if (j + 1 < cols) { su += u(i, j + 1); sv += v(i, j + 1); ++n; }
        const double gx = ix(i, j), gy = iy(i, j), gt = it0(i, j);
        const double a11 = gx * gx + alpha * n;
        const double a12 = gx * gy;
        const double a22 = gy * gy + alpha * n;
        const double b1 = alpha * su - gx * gt;
        const double b2 = alpha * sv - gy * gt;
        const double det = a11 * a22 - a12 * a12;
        const double u_star = (a22 * b1 - a12 * b2) / det;
        const double v_star = (a11 * b2 - a12 * b1) / det;
        const double du = kSorRelaxation * (u_star - u(i, j));
        const double dv = kSorRelaxation * (v_star - v(i, j));
        u(i, j) += du;
        v(i, j) += dv;
        max_change = std::max({max_change, std::abs(du), std::abs(dv)});
      }
    }
    if (max_change < kSorTolerance) break;
  }
  return sweep;
}

}  // namespace detail

FlowField compute_flow(const FeatureMap& frame_a, const FeatureMap& frame_b, const FlowParams& params) {
  params.validate();
  if (!frame_a.same_shape(frame_b))
    throw ShapeError("frame shapes differ: " + frame_a.shape_string() + " vs " + frame_b.shape_string());
  if (frame_a.frames() != 1 || frame_a.depth() != 1)
    throw ShapeError("flow expects single grayscale frames, got " + frame_a.shape_string());
  if (frame_a.height() < 8 || frame_a.width() < 8)
    throw InputTooSmall("flow needs frames of at least 8x8, got " + frame_a.shape_string());

  // Pyramid, finest first.
  std::vector<Image> first{detail::to_intensity(frame_a)};
  std::vector<Image> second{detail::to_intensity(frame_b)};
  const double sigma = 0.6 * std::sqrt(1.0 / (params.scale_factor * params.scale_factor) - 1.0);
  for (int level = 1; level < params.pyramid_levels; ++level) {
    const Image& a = first.back();
    const auto rows = static_cast<Eigen::Index>(std::lround(double(a.rows()) * params.scale_factor));
    const auto cols = static_cast<Eigen::Index>(std::lround(double(a.cols()) * params.scale_factor));
    if (rows < kMinLevelSide || cols < kMinLevelSide) break;
    first.push_back(detail::resize_image(detail::gaussian_smooth(a, sigma), rows, cols));
    second.push_back(detail::resize_image(detail::gaussian_smooth(second.back(), sigma), rows, cols));
  }

  Image u, v;
  for (auto level = static_cast<std::ptrdiff_t>(first.size()) - 1; level >= 0; --level) {
    const Image& i1 = first[std::size_t(level)];
    const Image& i2 = second[std::size_t(level)];
    if (u.size() == 0) {
      u = Image::Zero(i1.rows(), i1.cols());
      v = Image::Zero(i1.rows(), i1.cols());
    } else {
      const double ry = double(i1.rows()) / double(u.rows());
      const double rx = double(i1.cols()) / double(u.cols());
      u = detail::resize_image(u, i1.rows(), i1.cols()) * rx;
      v = detail::resize_image(v, i1.rows(), i1.cols()) * ry;
    }
    Image gx, gy;
    detail::centred_gradient(i2, gx, gy);
    for (int step = 0; step < params.warp_steps_per_level; ++step) {
      const Image i2w = detail::warp_image(i2, u, v);
      Image ix = detail::warp_image(gx, u, v);
      Image iy = detail::warp_image(gy, u, v);
      Image it0 = i2w - i1 - ix * u - iy * v;
      // Pixels whose match falls outside the second frame carry no data term.
      for (Eigen::Index i = 0; i < i1.rows(); ++i)
        for (Eigen::Index j = 0; j < i1.cols(); ++j) {
          const double y = double(i) + v(i, j), x = double(j) + u(i, j);
          if (y < 0.0 || x < 0.0 || y > double(i1.rows() - 1) || x > double(i1.cols() - 1)) {
            ix(i, j) = 0.0;
            iy(i, j) = 0.0;
            it0(i, j) = 0.0;
          }
        }
      detail::solve_linearised(ix, iy, it0, params.smoothness_alpha, params.solver_iterations, u, v);
    }
  }
  return FlowField(u.cast<float>(), v.cast<float>());
}

FeatureMap flow_to_feature_map(const FlowField& flow) {
  FeatureMap out(flow.height(), flow.width(), 3);
  for (int i = 0; i < flow.height(); ++i)
    for (int j = 0; j < flow.width(); ++j) {
      const double u = flow.u(i, j), v = flow.v(i, j);
      out(i, j, 0) = float(u);
      out(i, j, 1) = float(v);
      out(i, j, 2) = float(std::hypot(u, v));
    }
  return out;
}

FeatureMap mean_subtract(const FeatureMap& map) {
  FeatureMap out = map;
  auto px = out.pixels();
  const Eigen::RowVectorXd mean = px.cast<double>().colwise().mean();
  for (Eigen::Index p = 0; p < px.rows(); ++p)
    for (Eigen::Index c = 0; c < px.cols(); ++c) px(p, c) = float(double(px(p, c)) - mean[c]);
  return out;
}

FeatureMap flow_to_fmap(const FlowField& flow) {
  FeatureMap out(flow.height(), flow.width(), 2);
  for (int i = 0; i < flow.height(); ++i)
    for (int j = 0; j < flow.width(); ++j) {
      out(i, j, 0) = flow.u(i, j);
      out(i, j, 1) = flow.v(i, j);
    }
  return out;
}

FlowField flow_from_fmap(const FeatureMap& map) {
  if (map.frames() != 1 || map.depth() != 2) throw ShapeError("flow maps have depth 2, got " + map.shape_string());
  FlowField flow(map.height(), map.width());
  for (int i = 0; i < map.height(); ++i)
    for (int j = 0; j < map.width(); ++j) {
      flow.u(i, j) = map(i, j, 0);
      flow.v(i, j) = map(i, j, 1);
    }
  return flow;
}

}  // namespace stcooc
