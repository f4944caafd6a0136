#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stcooc/pipeline.hpp"

namespace stcooc {

enum class Appearance { texture_A, texture_B };
enum class Motion { left, right, up, down };

std::string_view to_string(Appearance a);
std::string_view to_string(Motion m);
Appearance parse_appearance(const std::string& name);
Motion parse_motion(const std::string& name);

struct SynthClass {
  Appearance appearance = Appearance::texture_A;
  Motion motion = Motion::left;

  bool operator==(const SynthClass&) const = default;
  std::string name() const;  // e.g. "A-left"
};

/// Textured blobs translating over a smooth noisy background. The blob's
/// texture is isoluminant (luma identical for A and B), so appearance is
/// invisible to luma-based flow; its path is symmetric about the clip's
/// centre frame, so single frames carry no direction cue.
struct SynthSpec {
  std::string name = "synthetic";
  int height = 32;
  int width = 32;
  int frame_count = 20;
  double fps = 10.0;
  std::vector<SynthClass> classes = {{Appearance::texture_A, Motion::left},
                                     {Appearance::texture_A, Motion::right},
                                     {Appearance::texture_B, Motion::left},
                                     {Appearance::texture_B, Motion::right}};
  int train_per_class = 20;
  int test_per_class = 10;
  double speed = 1.5;          // px / frame
  double blob_radius = 6.0;
  double noise_sigma = 0.02;
  double camera_motion_fraction = 0.0;
  double drift_speed = 1.5;    // px / frame of the global drift on moving clips
  int clutter = 0;             // distractor blobs per clip
  std::uint64_t seed = 7;

  /// Throws SpecError.
  void validate() const;
};

/// Ground truth of one generated clip, in image coordinates.
struct SynthTrack {
  std::string clip_id;
  int class_index = 0;
  CameraMotion camera = CameraMotion::static_camera;
  double vx = 0.0;        // blob displacement per frame, drift included
  double vy = 0.0;
  double drift_x = 0.0;   // global displacement per frame
  double drift_y = 0.0;
  std::vector<BoundingBox> boxes;  // one per frame
};

/// Writes <out>/clips/<clip>/frame_NNN.ppm, <out>/clips/<clip>/boxes.txt and
/// <out>/manifest.json. Output depends only on `spec` (not on `jobs`).
Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir, int jobs = 1,
                          std::vector<SynthTrack>* tracks = nullptr);

/// Renders one clip in memory (frames and track) without touching disk.
std::vector<FeatureMap> render_clip(const SynthSpec& spec, int class_index, const std::string& clip_id,
                                    CameraMotion camera, SynthTrack* track = nullptr);

}  // namespace stcooc
