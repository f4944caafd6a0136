#include "stcooc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "stcooc/image.hpp"
#include "stcooc/io.hpp"

namespace stcooc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CameraMotion m) { return m == CameraMotion::moving ? "moving" : "static"; }

CameraMotion parse_camera_motion(const std::string& name) {
  if (name == "static") return CameraMotion::static_camera;
  if (name == "moving") return CameraMotion::moving;
  throw ConfigError("camera must be \"static\" or \"moving\", got \"" + name + "\"");
}

// ---- manifest ----

void validate_manifest(const Manifest& manifest, bool check_files) {
  if (manifest.classes.empty()) throw ConfigError("manifest has no classes");
  std::set<std::string> ids;
  auto check = [&](const ClipRecord& clip, const char* split) {
    const std::string where = std::string(split) + " clip '" + clip.clip_id + "'";
    if (clip.clip_id.empty()) throw ConfigError(std::string(split) + " clip with empty id");
    if (!ids.insert(clip.clip_id).second) throw ConfigError("duplicate clip id '" + clip.clip_id + "'");
    if (clip.class_label < 0 || clip.class_label >= manifest.num_classes())
      throw ConfigError(where + ": class " + std::to_string(clip.class_label) + " out of range");
    if (!(clip.fps > 0.0) || !std::isfinite(clip.fps)) throw ConfigError(where + ": fps must be positive");
    if (clip.frame_paths.empty()) throw ConfigError(where + ": no frames");
    if (!check_files) return;
    for (const auto& p : clip.frame_paths)
      if (!fs::is_regular_file(p)) throw ConfigError(where + ": missing frame " + p.string());
    if (clip.box_file && !fs::is_regular_file(*clip.box_file))
      throw ConfigError(where + ": missing box file " + clip.box_file->string());
  };
  for (const auto& c : manifest.train) check(c, "train");
  for (const auto& c : manifest.test) check(c, "test");
}

namespace {

template <typename T>
T field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + "." + key + ": missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

ClipRecord parse_clip(const json& j, const std::string& where, const fs::path& base) {
  ClipRecord c;
  c.clip_id = field<std::string>(j, "id", where);
  c.class_label = field<int>(j, "class", where);
  c.fps = field<double>(j, "fps", where);
  for (const auto& f : field<std::vector<std::string>>(j, "frames", where)) c.frame_paths.push_back(base / f);
  c.camera = j.contains("camera") ? parse_camera_motion(field<std::string>(j, "camera", where))
                                  : CameraMotion::static_camera;
  if (j.contains("boxes") && !j.at("boxes").is_null()) c.box_file = base / field<std::string>(j, "boxes", where);
  return c;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  const fs::path rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  Manifest m;
  m.dataset = doc.contains("dataset") ? field<std::string>(doc, "dataset", "manifest") : std::string();
  m.classes = field<std::vector<std::string>>(doc, "classes", "manifest");
  for (const char* split : {"train", "test"}) {
    if (!doc.contains(split)) throw ConfigError(std::string("manifest.") + split + ": missing");
    const json& arr = doc.at(split);
    if (!arr.is_array()) throw ConfigError(std::string("manifest.") + split + ": expected an array");
    auto& out = std::string(split) == "train" ? m.train : m.test;
    for (std::size_t k = 0; k < arr.size(); ++k)
      out.push_back(parse_clip(arr[k], std::string("manifest.") + split + "[" + std::to_string(k) + "]", base));
  }
  validate_manifest(m, true);
  return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto clips = [&](const std::vector<ClipRecord>& list) {
    json arr = json::array();
    for (const auto& c : list) {
      json j;
      j["id"] = c.clip_id;
      j["class"] = c.class_label;
      j["fps"] = c.fps;
      json frames = json::array();
      for (const auto& f : c.frame_paths) frames.push_back(relative_to(f, base));
      j["frames"] = std::move(frames);
      j["camera"] = std::string(to_string(c.camera));
      if (c.box_file) j["boxes"] = relative_to(*c.box_file, base);
      arr.push_back(std::move(j));
    }
    return arr;
  };
  json doc;
  doc["dataset"] = manifest.dataset;
  doc["classes"] = manifest.classes;
  doc["train"] = clips(manifest.train);
  doc["test"] = clips(manifest.test);
  detail::write_file(path, doc.dump(1) + "\n");
}

// ---- boxes ----

std::vector<BoundingBox> read_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open box file " + path.string());
  std::vector<BoundingBox> boxes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    BoundingBox b;
    if (!(ls >> b.frame)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected \"frame x y w h\"");
    }
    std::string rest;
    if (!(ls >> b.x >> b.y >> b.w >> b.h) || (ls >> rest) || b.frame < 0 || !(b.w > 0.0) || !(b.h > 0.0))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected \"frame x y w h\"");
    boxes.push_back(b);
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const BoundingBox& a, const BoundingBox& b) { return a.frame < b.frame; });
  return boxes;
}

void write_boxes(const std::vector<BoundingBox>& boxes, const fs::path& path) {
  std::ostringstream out;
  out.precision(9);
  for (const auto& b : boxes) out << b.frame << ' ' << b.x << ' ' << b.y << ' ' << b.w << ' ' << b.h << '\n';
  detail::write_file(path, out.str());
}

BoundingBox box_for_frame(const std::vector<BoundingBox>& boxes, int frame, int height, int width) {
  const BoundingBox* found = nullptr;
  for (const auto& b : boxes) {
    if (b.frame > frame) break;
    found = &b;
  }
  if (found) {
    BoundingBox out = *found;
    out.frame = frame;
    return out;
  }
  return {frame, 0.0, 0.0, double(width), double(height)};
}

// ---- samplers ----

int sampling_stride(double fps, double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw RateError("sampling rate must be positive");
  if (rate > fps) throw RateError("sampling rate " + std::to_string(rate) + " exceeds clip fps " + std::to_string(fps));
  return std::max(1, int(std::lround(fps / rate)));
}

std::vector<int> sample_frames(const ClipRecord& clip, const SamplingMode& mode) {
  const int n = clip.frame_count();
  if (mode.kind == SamplingMode::Kind::random_one) {
    if (n < 1) return {};
    UniformSource rng(derive_seed(mode.seed, clip.clip_id));
    return {int(rng.below(std::size_t(n)))};
  }
  const int stride = sampling_stride(clip.fps, mode.rate);
  std::vector<int> out;
  for (int k = 0; k < n; k += stride) out.push_back(k);
  return out;
}

std::vector<std::pair<int, int>> flow_pairs(int frame_count, int stride) {
  if (stride < 1) throw InvalidValue("flow stride must be >= 1");
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a + stride < frame_count; a += stride) out.emplace_back(a, a + stride);
  return out;
}

std::vector<std::pair<int, int>> flow_pairs(const ClipRecord& clip, int stride) {
  return flow_pairs(clip.frame_count(), stride);
}

std::vector<std::vector<int>> sliding_windows(int frame_count, int length) {
  if (length < 1) throw InvalidValue("window length must be >= 1");
  std::vector<std::vector<int>> out;
  for (int s = 0; s + length <= frame_count; ++s) {
    std::vector<int> w(static_cast<std::size_t>(length));
    for (int k = 0; k < length; ++k) w[std::size_t(k)] = s + k;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::vector<int>> sliding_windows(const ClipRecord& clip, int length) {
  return sliding_windows(clip.frame_count(), length);
}

int max_vote(const std::vector<int>& decisions) {
  if (decisions.empty()) throw EmptyDecisions("no decisions to vote over");
  std::map<int, int> counts;
  for (int d : decisions) ++counts[d];
  int best = counts.begin()->first;
  for (const auto& [cls, n] : counts)
    if (n > counts[best]) best = cls;
  return best;
}

FeatureMap crop_and_resize(const FeatureMap& frame, const BoundingBox& box, int out_h, int out_w) {
  if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.w) || !std::isfinite(box.h))
    throw BoxError("non-finite box");
  const int x0 = std::clamp(int(std::floor(box.x)), 0, frame.width());
  const int y0 = std::clamp(int(std::floor(box.y)), 0, frame.height());
  const int x1 = std::clamp(int(std::ceil(box.x + box.w)), 0, frame.width());
  const int y1 = std::clamp(int(std::ceil(box.y + box.h)), 0, frame.height());
  if (x1 <= x0 || y1 <= y0)
    throw BoxError("box at frame " + std::to_string(box.frame) + " lies outside the " + frame.shape_string() +
                   " frame");
  return resample_region(frame, y0, x0, y1 - y0, x1 - x0, out_h, out_w);
}

// ---- systems ----

namespace {

const std::vector<std::pair<System, std::string_view>> kSystemNames = {
    {System::spatial_only, "spatial_only"}, {System::temporal_only, "temporal_only"},
    {System::early_fusion, "early_fusion"}, {System::late_fusion, "late_fusion"},
    {System::conv3d, "conv3d"},             {System::cooccurrence, "cooccurrence"},
    {System::cooccurrence_bbox, "cooccurrence_bbox"},
};

}  // namespace

std::string_view to_string(System s) {
  for (const auto& [sys, name] : kSystemNames)
    if (sys == s) return name;
  return "unknown";
}

System parse_system(const std::string& name) {
  for (const auto& [sys, n] : kSystemNames)
    if (n == name) return sys;
  throw ConfigError("unknown system '" + name + "'");
}

const std::vector<System>& all_systems() {
  static const std::vector<System> all = [] {
    std::vector<System> v;
    for (const auto& [sys, name] : kSystemNames) v.push_back(sys);
    return v;
  }();
  return all;
}

bool uses_svm(System s) {
  return s == System::early_fusion || s == System::late_fusion || s == System::cooccurrence ||
         s == System::cooccurrence_bbox;
}

std::string_view to_string(Stream s) {
  switch (s) {
    case Stream::spatial: return "spatial";
    case Stream::temporal: return "temporal";
    case Stream::window: return "window";
    case Stream::spatial_bbox: return "spatial_bbox";
    case Stream::temporal_bbox: return "temporal_bbox";
  }
  return "unknown";
}

// ---- clip data ----

fs::path flow_cache_path(const fs::path& dir, const std::string& clip_id, std::size_t pair_index) {
  return dir / (clip_id + "_" + std::to_string(pair_index) + ".fmap");
}

ClipData::ClipData(const ClipRecord& clip, const PipelineConfig& config, std::optional<fs::path> flow_cache_dir)
    : clip_(clip), config_(config), cache_(std::move(flow_cache_dir)), frames_(clip.frame_paths.size()),
      pairs_(flow_pairs(clip, config.flow_stride)) {}

const FeatureMap& ClipData::frame(int index) {
  if (index < 0 || index >= clip_.frame_count())
    throw InvalidValue("clip '" + clip_.clip_id + "' has no frame " + std::to_string(index));
  auto& slot = frames_[std::size_t(index)];
  if (!slot) {
    slot = read_image(clip_.frame_paths[std::size_t(index)]);
    if (index != 0) {
      const FeatureMap& first = frame(0);
      if (!first.same_shape(*slot))
        throw ShapeError("clip '" + clip_.clip_id + "' frame " + std::to_string(index) + " is " +
                         slot->shape_string() + ", frame 0 is " + first.shape_string());
    }
  }
  return *slot;
}

const std::vector<BoundingBox>& ClipData::boxes() {
  if (!boxes_) boxes_ = clip_.box_file ? read_boxes(*clip_.box_file) : std::vector<BoundingBox>{};
  return *boxes_;
}

BoundingBox ClipData::box(int frame_index) {
  const FeatureMap& f = frame(0);
  return box_for_frame(boxes(), frame_index, f.height(), f.width());
}

FlowField ClipData::flow(std::size_t pair_index) {
  if (pair_index >= pairs_.size())
    throw InvalidValue("clip '" + clip_.clip_id + "' has no flow pair " + std::to_string(pair_index));
  const auto [a, b] = pairs_[pair_index];
  if (cache_) {
    const fs::path p = flow_cache_path(*cache_, clip_.clip_id, pair_index);
    if (fs::exists(p)) {
      FlowField f = flow_from_fmap(read_fmap(p));
      if (f.height() == frame(a).height() && f.width() == frame(a).width()) return f;
    }
    FlowField f = compute_flow(to_grayscale(frame(a)), to_grayscale(frame(b)), config_.flow);
    write_fmap(flow_to_fmap(f), p);
    return f;
  }
  return compute_flow(to_grayscale(frame(a)), to_grayscale(frame(b)), config_.flow);
}

// ---- inputs ----

namespace {

FeatureMap fit_to_input(const FeatureMap& map, const PipelineConfig& config, const BoundingBox* box) {
  if (box) return crop_and_resize(map, *box, config.input_height, config.input_width);
  return resize_bilinear(map, config.input_height, config.input_width);
}

}  // namespace

FeatureMap spatial_input(const FeatureMap& frame, const PipelineConfig& config, const BoundingBox* box) {
  return mean_subtract(fit_to_input(frame, config, box));
}

FeatureMap temporal_input(const FlowField& flow, const PipelineConfig& config, const BoundingBox* box) {
  FeatureMap o = fit_to_input(flow_to_feature_map(flow), config, box);
  return config.zero_center_temporal ? mean_subtract(o) : o;
}

FeatureMap window_input(ClipData& clip, const std::vector<int>& window, const PipelineConfig& config) {
  std::vector<FeatureMap> frames;
  frames.reserve(window.size());
  for (int k : window) frames.push_back(spatial_input(clip.frame(k), config));
  return stack_frames(frames);
}

std::size_t instance_count(const ClipRecord& clip, Stream stream, const PipelineConfig& config) {
  switch (stream) {
    case Stream::spatial:
    case Stream::spatial_bbox: return sample_frames(clip, config.spatial_sampling).size();
    case Stream::temporal:
    case Stream::temporal_bbox: return flow_pairs(clip, config.flow_stride).size();
    case Stream::window: return sliding_windows(clip, config.window_length).size();
  }
  return 0;
}

FeatureMap stream_instance(ClipData& clip, Stream stream, std::size_t index, const PipelineConfig& config) {
  switch (stream) {
    case Stream::spatial:
    case Stream::spatial_bbox: {
      const std::vector<int> frames = sample_frames(clip.clip(), config.spatial_sampling);
      const int t = frames.at(index);
      if (stream == Stream::spatial) return spatial_input(clip.frame(t), config);
      const BoundingBox b = clip.box(t);
      return spatial_input(clip.frame(t), config, &b);
    }
    case Stream::temporal:
    case Stream::temporal_bbox: {
      if (stream == Stream::temporal) return temporal_input(clip.flow(index), config);
      const BoundingBox b = clip.box(clip.pairs().at(index).first);
      return temporal_input(clip.flow(index), config, &b);
    }
    case Stream::window: return window_input(clip, sliding_windows(clip.clip(), config.window_length).at(index), config);
  }
  throw InvalidValue("unknown stream");
}

// ---- fused features ----

namespace {

const Network<float>& need(const std::optional<Network<float>>& net, const char* name, System system) {
  if (!net) throw ConfigError(std::string(to_string(system)) + " needs the " + name + " network");
  return *net;
}

const FeatureMap& tap(const TapMap<float>& taps, const std::string& name, const char* stream) {
  const auto it = taps.find(name);
  if (it == taps.end()) throw ConfigError(std::string(stream) + " network has no layer '" + name + "'");
  return it->second;
}

int network_decision(const Network<float>& net, const FeatureMap& input) {
  return argmax_class(forward_trace(net, input).output());
}

}  // namespace

FeatureVector fused_instance(ClipData& clip, System system, std::size_t pair_index, const Models& models,
                             const PipelineConfig& config) {
  if (!uses_svm(system)) throw ConfigError(std::string(to_string(system)) + " has no fused feature");
  const bool bbox = system == System::cooccurrence_bbox;
  const Network<float>& snet = need(bbox ? models.spatial_bbox : models.spatial, bbox ? "spatial_bbox" : "spatial",
                                    system);
  const Network<float>& tnet = need(bbox ? models.temporal_bbox : models.temporal,
                                    bbox ? "temporal_bbox" : "temporal", system);
  const int t = clip.pairs().at(pair_index).first;
  FeatureMap s_in, t_in;
  if (bbox) {
    const BoundingBox b = clip.box(t);
    s_in = spatial_input(clip.frame(t), config, &b);
    t_in = temporal_input(clip.flow(pair_index), config, &b);
  } else {
    s_in = spatial_input(clip.frame(t), config);
    t_in = temporal_input(clip.flow(pair_index), config);
  }
  const TapMap<float> s = forward(snet, s_in);
  const TapMap<float> tm = forward(tnet, t_in);
  if (system == System::late_fusion)
    return late_fusion(to_feature(tap(s, snet.layers().back().name, "spatial"), Provenance::softmax_spatial),
                       to_feature(tap(tm, tnet.layers().back().name, "temporal"), Provenance::softmax_temporal));
  const FeatureVector fs = to_feature(tap(s, "fc6", "spatial"), Provenance::fc6_spatial);
  const FeatureVector ft = to_feature(tap(tm, "fc6", "temporal"), Provenance::fc6_temporal);
  if (system == System::early_fusion) return early_fusion(fs, ft);
  const CooccurrenceFeature co = bilinear_cooccurrence(tap(s, config.source_tap, "spatial"),
                                                       tap(tm, config.source_tap, "temporal"), config.pooling,
                                                       config.source_tap);
  return cooccurrence_with_fc6(co, fs, ft);
}

std::vector<FeatureVector> fused_instances(ClipData& clip, System system, const Models& models,
                                           const PipelineConfig& config) {
  std::vector<FeatureVector> out;
  for (std::size_t k = 0; k < clip.pairs().size(); ++k) out.push_back(fused_instance(clip, system, k, models, config));
  return out;
}

// ---- classification ----

ClipResult classify_clip(ClipData& clip, System system, const Models& models, const PipelineConfig& config) {
  ClipResult r;
  const ClipRecord& rec = clip.clip();
  switch (system) {
    case System::spatial_only:
    case System::temporal_only:
    case System::conv3d: {
      const Stream stream = system == System::spatial_only    ? Stream::spatial
                            : system == System::temporal_only ? Stream::temporal
                                                              : Stream::window;
      const Network<float>& net = need(system == System::spatial_only    ? models.spatial
                                       : system == System::temporal_only ? models.temporal
                                                                         : models.window,
                                       std::string(to_string(stream)).c_str(), system);
      const std::size_t n = instance_count(rec, stream, config);
      if (n == 0) {
        if (system == System::conv3d)
          throw InstanceError("clip '" + rec.clip_id + "' has " + std::to_string(rec.frame_count()) +
                              " frames, fewer than the window length " + std::to_string(config.window_length));
        throw InstanceError("clip '" + rec.clip_id + "' yields no " + std::string(to_string(stream)) + " instances");
      }
      for (std::size_t k = 0; k < n; ++k) r.decisions.push_back(network_decision(net, stream_instance(clip, stream, k, config)));
      break;
    }
    case System::early_fusion:
    case System::late_fusion:
    case System::cooccurrence:
    case System::cooccurrence_bbox: {
      const auto it = models.svms.find(system);
      if (it == models.svms.end()) throw ConfigError(std::string(to_string(system)) + " needs a fitted SVM");
      if (clip.pairs().empty())
        throw InstanceError("clip '" + rec.clip_id + "' has " + std::to_string(rec.frame_count()) +
                            " frames, too few for flow stride " + std::to_string(config.flow_stride));
      for (std::size_t k = 0; k < clip.pairs().size(); ++k)
        r.decisions.push_back(predict(it->second, fused_instance(clip, system, k, models, config)).label);
      break;
    }
  }
  r.predicted = max_vote(r.decisions);
  return r;
}

ClipResult classify_clip(const ClipRecord& clip, System system, const Models& models, const PipelineConfig& config,
                         std::optional<fs::path> flow_cache_dir) {
  ClipData data(clip, config, std::move(flow_cache_dir));
  return classify_clip(data, system, models, config);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(std::size_t(jobs), n);
  for (std::size_t k = 0; k < count; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace stcooc
