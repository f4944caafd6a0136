#pragma once

#include <Eigen/Core>

#include "stcooc/image.hpp"
#include "stcooc/tensor.hpp"

namespace stcooc {

using FlowComponent = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense per-pixel displacement from frame A to frame B, in pixels.
struct FlowField {
  FlowComponent u;  // horizontal
  FlowComponent v;  // vertical

  FlowField() = default;
  FlowField(FlowComponent horizontal, FlowComponent vertical);
  FlowField(int height, int width);

  int height() const { return int(u.rows()); }
  int width() const { return int(u.cols()); }
};

struct FlowParams {
  int pyramid_levels = 4;
  double scale_factor = 0.5;
  double smoothness_alpha = 15.0;
  int solver_iterations = 100;
  int warp_steps_per_level = 3;

  void validate() const;
};

/// Coarse-to-fine Horn-Schunck flow with warping.
///
/// Per level and warp step the linearised energy
///   sum_p (Ix (u - u0) + Iy (v - v0) + I2(x + w0) - I1)^2
///     + alpha * sum_{p~q} (|u_p - u_q|^2 + |v_p - v_q|^2)
/// is minimised by block SOR sweeps (2x2 solve per pixel). Intensities are on
/// the 0..255 scale, derivatives are centred differences of the warped second
/// frame, neighbours are the 4-connected in-image pixels. Coarser levels are
/// Gaussian-smoothed before downsampling; the finest level uses raw frames.
/// Levels stop early once a side would drop below 16 pixels.
FlowField compute_flow(const FeatureMap& frame_a, const FeatureMap& frame_b,
                       const FlowParams& params = {});

/// (O_x, O_y, O_mag) packaging of a flow field.
FeatureMap flow_to_feature_map(const FlowField& flow);

/// Per-channel zero-centering over every pixel (and frame) of the map.
FeatureMap mean_subtract(const FeatureMap& map);

/// Depth-2 (u, v) map for persistence, and back.
FeatureMap flow_to_fmap(const FlowField& flow);
FlowField flow_from_fmap(const FeatureMap& map);

namespace detail {

Image to_intensity(const FeatureMap& frame);
Image gaussian_smooth(const Image& img, double sigma);
Image resize_image(const Image& img, Eigen::Index rows, Eigen::Index cols);
void centred_gradient(const Image& img, Image& gx, Image& gy);
Image warp_image(const Image& img, const Image& u, const Image& v);

/// Block-SOR sweeps on one linearised system; updates u, v in place.
/// Returns the number of sweeps performed.
int solve_linearised(const Image& ix, const Image& iy, const Image& it0, double alpha,
                     int max_sweeps, Image& u, Image& v);

}  // namespace detail

}  // namespace stcooc
