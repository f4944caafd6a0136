#pragma once

#include <Eigen/Core>

#include "stcooc/tensor.hpp"

namespace stcooc {

/// Single-channel working image, row index = y. Used at 64-bit precision by
/// the flow solver and resampling code.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Luma conversion 0.299 R + 0.587 G + 0.114 B; depth-1 maps pass through.
FeatureMap to_grayscale(const FeatureMap& map);

/// Channel c of a one-frame map as an Image.
Image channel_image(const FeatureMap& map, int c);

/// Bilinear lookup with coordinates clamped to the image.
double sample_bilinear(const Image& img, double y, double x);

/// Resamples the rectangle [y0, y0+h) x [x0, x0+w) of every channel onto an
/// out_h x out_w grid. Pixel centres map as src = origin + (dst + 0.5) * scale - 0.5,
/// and lookups are clamped to the rectangle.
FeatureMap resample_region(const FeatureMap& map, int y0, int x0, int h, int w, int out_h, int out_w);

/// Whole-map resize; identity when the size already matches.
FeatureMap resize_bilinear(const FeatureMap& map, int out_h, int out_w);

}  // namespace stcooc
