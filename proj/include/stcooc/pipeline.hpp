#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcooc/convnet.hpp"
#include "stcooc/fusion.hpp"
#include "stcooc/optflow.hpp"
#include "stcooc/svm.hpp"

namespace stcooc {

enum class CameraMotion { static_camera, moving };

std::string_view to_string(CameraMotion m);
CameraMotion parse_camera_motion(const std::string& name);

struct ClipRecord {
  std::string clip_id;
  int class_label = 0;
  double fps = 10.0;
  std::vector<std::filesystem::path> frame_paths;
  CameraMotion camera = CameraMotion::static_camera;
  std::optional<std::filesystem::path> box_file;

  int frame_count() const { return int(frame_paths.size()); }
};

struct Manifest {
  std::string dataset;
  std::vector<std::string> classes;
  std::vector<ClipRecord> train;
  std::vector<ClipRecord> test;

  int num_classes() const { return int(classes.size()); }
};

/// Checks ids, class indices, fps and split disjointness; with `check_files`
/// also that every frame and box file exists. Throws ConfigError listing the
/// offending clip.
void validate_manifest(const Manifest& manifest, bool check_files = true);

/// Reads the JSON manifest; relative paths resolve against its directory.
/// Validation (including file existence) runs before returning.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes paths relative to the manifest's directory when they lie below it.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct BoundingBox {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

/// One "frame x y w h" line per box; blank lines and '#' comments ignored.
std::vector<BoundingBox> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::vector<BoundingBox>& boxes, const std::filesystem::path& path);

/// Box listed for `frame`, else the most recent earlier one, else the whole frame.
BoundingBox box_for_frame(const std::vector<BoundingBox>& boxes, int frame, int height, int width);

struct SamplingMode {
  enum class Kind { fixed_rate, random_one };
  Kind kind = Kind::fixed_rate;
  double rate = 5.0;
  std::uint64_t seed = 0;

  static SamplingMode fixed_rate(double r) { return {Kind::fixed_rate, r, 0}; }
  static SamplingMode random_one(std::uint64_t s) { return {Kind::random_one, 0.0, s}; }
};

/// fixed_rate(r): 0, s, 2s, ... with s = round(fps / r). random_one: one
/// seeded uniform index (the seed is mixed with the clip id).
std::vector<int> sample_frames(const ClipRecord& clip, const SamplingMode& mode);
int sampling_stride(double fps, double rate);

std::vector<std::pair<int, int>> flow_pairs(int frame_count, int stride);
std::vector<std::pair<int, int>> flow_pairs(const ClipRecord& clip, int stride);

std::vector<std::vector<int>> sliding_windows(int frame_count, int length);
std::vector<std::vector<int>> sliding_windows(const ClipRecord& clip, int length);

/// Most frequent class, ties to the lowest index.
int max_vote(const std::vector<int>& decisions);

/// Clamps the box to the frame, then bilinearly resamples it to out_h x out_w.
FeatureMap crop_and_resize(const FeatureMap& frame, const BoundingBox& box, int out_h, int out_w);

enum class System { spatial_only, temporal_only, early_fusion, late_fusion, conv3d, cooccurrence, cooccurrence_bbox };

std::string_view to_string(System s);
System parse_system(const std::string& name);
const std::vector<System>& all_systems();
bool uses_svm(System s);

/// Settings shared by training, feature extraction and classification.
struct PipelineConfig {
  int input_height = 32;
  int input_width = 32;
  SamplingMode spatial_sampling = SamplingMode::fixed_rate(5.0);
  int flow_stride = 2;
  int window_length = 15;
  FlowParams flow;
  std::string source_tap = "c5";
  Pooling pooling = Pooling::max;
  bool zero_center_temporal = true;
};

/// Networks and SVMs a run may use; absent entries are reported as ConfigError
/// by systems that need them.
struct Models {
  std::optional<Network<float>> spatial;
  std::optional<Network<float>> temporal;
  std::optional<Network<float>> window;
  std::optional<Network<float>> spatial_bbox;
  std::optional<Network<float>> temporal_bbox;
  std::map<System, LinearModel> svms;
};

/// Frames, boxes and flow fields of one clip, loaded on first use. Flow is
/// read from / written to `flow_cache_dir` when set.
class ClipData {
 public:
  ClipData(const ClipRecord& clip, const PipelineConfig& config,
           std::optional<std::filesystem::path> flow_cache_dir = std::nullopt);

  const ClipRecord& clip() const { return clip_; }
  const FeatureMap& frame(int index);
  const std::vector<BoundingBox>& boxes();
  BoundingBox box(int frame_index);
  /// Flow between the frames of pair `pair_index` of flow_pairs(clip, stride).
  FlowField flow(std::size_t pair_index);
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

 private:
  const ClipRecord& clip_;
  const PipelineConfig& config_;
  std::optional<std::filesystem::path> cache_;
  std::vector<std::optional<FeatureMap>> frames_;
  std::optional<std::vector<BoundingBox>> boxes_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Cache file of one flow pair.
std::filesystem::path flow_cache_path(const std::filesystem::path& dir, const std::string& clip_id,
                                      std::size_t pair_index);

/// Network inputs. Spatial: frame resized (or box-cropped) to the input size,
/// per-channel zero-centred. Temporal: (O_x, O_y, O_mag) of the flow, same
/// geometry, zero-centred unless disabled. Window: stacked spatial inputs.
FeatureMap spatial_input(const FeatureMap& frame, const PipelineConfig& config,
                         const BoundingBox* box = nullptr);
FeatureMap temporal_input(const FlowField& flow, const PipelineConfig& config, const BoundingBox* box = nullptr);
FeatureMap window_input(ClipData& clip, const std::vector<int>& window, const PipelineConfig& config);

/// Training and classification instances of each stream.
enum class Stream { spatial, temporal, window, spatial_bbox, temporal_bbox };
std::string_view to_string(Stream s);
std::size_t instance_count(const ClipRecord& clip, Stream stream, const PipelineConfig& config);
FeatureMap stream_instance(ClipData& clip, Stream stream, std::size_t index, const PipelineConfig& config);

/// The per-instance SVM feature of a fusion system; one instance per flow pair.
FeatureVector fused_instance(ClipData& clip, System system, std::size_t pair_index, const Models& models,
                             const PipelineConfig& config);
std::vector<FeatureVector> fused_instances(ClipData& clip, System system, const Models& models,
                                           const PipelineConfig& config);

struct ClipResult {
  int predicted = -1;
  std::vector<int> decisions;
};

/// Builds the system's instances, classifies each and max-votes.
/// Throws ConfigError for missing models, InstanceError when the clip yields
/// no instances.
ClipResult classify_clip(ClipData& clip, System system, const Models& models, const PipelineConfig& config);
ClipResult classify_clip(const ClipRecord& clip, System system, const Models& models, const PipelineConfig& config,
                         std::optional<std::filesystem::path> flow_cache_dir = std::nullopt);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace stcooc
