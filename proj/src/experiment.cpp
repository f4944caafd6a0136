#include "stcooc/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stcooc/io.hpp"

namespace stcooc {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config ----

namespace {

// A JSON object whose keys are consumed one by one; leftovers are reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + ": expected an object");
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
        throw ConfigError(where(key) + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (auto v = get<T>(key)) out = *v;
  }

  std::optional<Section> sub(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), where(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(where(item.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

SynthSpec parse_synth(Section s, std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  s.read("name", spec.name);
  s.read("height", spec.height);
  s.read("width", spec.width);
  s.read("frame_count", spec.frame_count);
  s.read("fps", spec.fps);
  s.read("train_per_class", spec.train_per_class);
  s.read("test_per_class", spec.test_per_class);
  s.read("speed", spec.speed);
  s.read("blob_radius", spec.blob_radius);
  s.read("noise_sigma", spec.noise_sigma);
  s.read("camera_motion_fraction", spec.camera_motion_fraction);
  s.read("drift_speed", spec.drift_speed);
  s.read("clutter", spec.clutter);
  s.read("seed", spec.seed);
  if (s.has("classes")) {
    const json& arr = s.raw("classes");
    require(arr.is_array(), s.where("classes"), "expected an array");
    spec.classes.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Section c(arr[k], s.where("classes") + "[" + std::to_string(k) + "]");
      const auto app = c.get<std::string>("appearance");
      const auto mot = c.get<std::string>("motion");
      require(app && mot, s.where("classes") + "[" + std::to_string(k) + "]", "needs appearance and motion");
      try {
        spec.classes.push_back({parse_appearance(*app), parse_motion(*mot)});
      } catch (const SpecError& e) {
        throw ConfigError(s.where("classes") + "[" + std::to_string(k) + "]: " + e.what());
      }
      c.finish();
    }
  }
  s.finish();
  try {
    spec.validate();
  } catch (const SpecError& e) {
    throw ConfigError(s.where("") + " " + e.what());
  }
  return spec;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  Section root(doc, "");
  if (auto wd = root.get<std::string>("work_dir")) c.work_dir = base_dir / *wd;
  root.read("seed", c.seed);
  root.read("jobs", c.jobs);
  require(c.jobs >= 1, "jobs", "must be >= 1");
  if (auto s = root.sub("synth")) c.synth = parse_synth(*s, c.seed);
  if (auto m = root.get<std::string>("manifest")) c.manifest = base_dir / *m;
  require(c.synth.has_value() != c.manifest.has_value(), "synth", "exactly one of synth and manifest is required");

  const auto systems = root.get<std::vector<std::string>>("systems");
  require(systems && !systems->empty(), "systems", "a nonempty list of system names is required");
  for (std::size_t k = 0; k < systems->size(); ++k) {
    try {
      const System s = parse_system((*systems)[k]);
      for (System prev : c.systems)
        require(prev != s, "systems[" + std::to_string(k) + "]", "listed twice");
      c.systems.push_back(s);
    } catch (const ConfigError& e) {
      throw ConfigError("systems[" + std::to_string(k) + "]: " + e.what());
    }
  }

  PipelineConfig& p = c.pipeline;
  if (auto in = root.sub("input")) {
    in->read("height", p.input_height);
    in->read("width", p.input_width);
    require(p.input_height >= 8 && p.input_width >= 8, "input", "height and width must be >= 8");
    in->finish();
  }
  if (auto s = root.sub("sampling")) {
    if (auto sp = s->sub("spatial")) {
      const std::string mode = sp->get<std::string>("mode").value_or("fixed_rate");
      if (mode == "fixed_rate") {
        p.spatial_sampling = SamplingMode::fixed_rate(sp->get<double>("rate").value_or(5.0));
        require(p.spatial_sampling.rate > 0.0, "sampling.spatial.rate", "must be positive");
      } else if (mode == "random_one") {
        p.spatial_sampling = SamplingMode::random_one(c.seed);
      } else {
        throw ConfigError("sampling.spatial.mode: expected fixed_rate or random_one");
      }
      sp->finish();
    }
    s->read("flow_stride", p.flow_stride);
    s->read("window_length", p.window_length);
    require(p.flow_stride >= 1, "sampling.flow_stride", "must be >= 1");
    require(p.window_length >= 3, "sampling.window_length", "must be >= 3");
    s->finish();
  }
  if (auto f = root.sub("flow")) {
    f->read("levels", p.flow.pyramid_levels);
    f->read("scale", p.flow.scale_factor);
    f->read("alpha", p.flow.smoothness_alpha);
    f->read("iterations", p.flow.solver_iterations);
    f->read("warps", p.flow.warp_steps_per_level);
    f->finish();
    try {
      p.flow.validate();
    } catch (const InvalidValue& e) {
      throw ConfigError(std::string("flow: ") + e.what());
    }
  }
  if (auto t = root.sub("training")) {
    t->read("lr", c.training.sgd.learning_rate);
    t->read("momentum", c.training.sgd.momentum);
    t->read("weight_decay", c.training.sgd.weight_decay);
    t->read("epochs", c.training.epochs);
    t->read("batch_size", c.training.batch_size);
    t->read("lr_decay", c.training.lr_decay);
    t->finish();
    require(c.training.sgd.learning_rate > 0.0, "training.lr", "must be positive");
    require(c.training.sgd.momentum >= 0.0 && c.training.sgd.momentum < 1.0, "training.momentum", "must be in [0, 1)");
    require(c.training.sgd.weight_decay >= 0.0, "training.weight_decay", "must be >= 0");
    require(c.training.epochs >= 1, "training.epochs", "must be >= 1");
    require(c.training.batch_size >= 1, "training.batch_size", "must be >= 1");
    require(c.training.lr_decay > 0.0, "training.lr_decay", "must be positive");
  }
  if (auto f = root.sub("fusion")) {
    f->read("source_tap", p.source_tap);
    if (auto pool = f->get<std::string>("pooling")) {
      try {
        p.pooling = parse_pooling(*pool);
      } catch (const InvalidValue&) {
        throw ConfigError("fusion.pooling: expected max or sum");
      }
    }
    f->finish();
  }
  if (auto s = root.sub("svm")) {
    s->read("lambda", c.svm.lambda);
    s->read("epochs", c.svm.epochs);
    s->finish();
    require(c.svm.lambda > 0.0, "svm.lambda", "must be positive");
    require(c.svm.epochs >= 1, "svm.epochs", "must be >= 1");
  }
  if (auto a = root.sub("ablation")) {
    a->read("zero_center_temporal", p.zero_center_temporal);
    a->finish();
  }
  root.finish();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  if (config.synth && config.synth->seed == config.seed) config.synth->seed = seed;
  if (config.pipeline.spatial_sampling.kind == SamplingMode::Kind::random_one) config.pipeline.spatial_sampling.seed = seed;
  config.seed = seed;
}

// ---- layout ----

fs::path manifest_path(const ExperimentConfig& config) {
  return config.manifest ? *config.manifest : config.work_dir / "data" / "manifest.json";
}

fs::path flow_dir(const ExperimentConfig& config) { return config.work_dir / "flow"; }

fs::path model_path(const ExperimentConfig& config, Stream stream) {
  return config.work_dir / "models" / (std::string(to_string(stream)) + ".stwn");
}

fs::path svm_path(const ExperimentConfig& config, System system) {
  return config.work_dir / "models" / (std::string(to_string(system)) + ".svm.stwn");
}

fs::path feature_dir(const ExperimentConfig& config, System system, const std::string& split) {
  return config.work_dir / "features" / std::string(to_string(system)) / split;
}

std::vector<Stream> required_streams(const std::vector<System>& systems) {
  std::set<Stream> need;
  for (System s : systems) switch (s) {
      case System::spatial_only: need.insert(Stream::spatial); break;
      case System::temporal_only: need.insert(Stream::temporal); break;
      case System::conv3d: need.insert(Stream::window); break;
      case System::early_fusion:
      case System::late_fusion:
      case System::cooccurrence:
        need.insert(Stream::spatial);
        need.insert(Stream::temporal);
        break;
      case System::cooccurrence_bbox:
        need.insert(Stream::spatial_bbox);
        need.insert(Stream::temporal_bbox);
        break;
    }
  return {need.begin(), need.end()};
}

namespace {

std::string systems_using(const std::vector<System>& systems, Stream stream) {
  std::string out;
  for (System s : systems) {
    const auto streams = required_streams({s});
    if (std::find(streams.begin(), streams.end(), stream) == streams.end()) continue;
    if (!out.empty()) out += ", ";
    out += to_string(s);
  }
  return out;
}

void require_two_classes(const std::vector<ClipRecord>& train, const std::string& who) {
  std::set<int> classes;
  for (const auto& c : train) classes.insert(c.class_label);
  if (classes.size() < 2)
    throw DegenerateLabels(who + ": training split has " + std::to_string(classes.size()) + " class(es)");
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& bytes) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string flow_stamp(const ExperimentConfig& config, const Manifest& m) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = fnv1a(h, detail::read_file(manifest_path(config)));
  for (const auto* split : {&m.train, &m.test})
    for (const auto& clip : *split)
      for (const auto& f : clip.frame_paths) h = fnv1a(h, detail::read_file(f));
  const FlowParams& f = config.pipeline.flow;
  json j;
  j["levels"] = f.pyramid_levels;
  j["scale"] = f.scale_factor;
  j["alpha"] = f.smoothness_alpha;
  j["iterations"] = f.solver_iterations;
  j["warps"] = f.warp_steps_per_level;
  j["stride"] = config.pipeline.flow_stride;
  j["frames_hash"] = h;
  return j.dump() + "\n";
}

std::vector<ClipRecord> all_clips(const Manifest& m) {
  std::vector<ClipRecord> out = m.train;
  out.insert(out.end(), m.test.begin(), m.test.end());
  return out;
}

void write_report_files(const ExperimentConfig& config, const EvalReport& r) {
  const fs::path dir = config.work_dir / "reports";
  detail::write_file(dir / (r.system + ".json"), report_json(r));
  detail::write_file(dir / (r.system + ".txt"), report_text(r));
}

}  // namespace

// ---- stages ----

Manifest stage_gen(const ExperimentConfig& config) {
  if (config.synth) return generate_dataset(*config.synth, config.work_dir / "data", config.jobs);
  return load_manifest(manifest_path(config));
}

void stage_flow(const ExperimentConfig& config) {
  const Manifest m = load_manifest(manifest_path(config));
  const fs::path dir = flow_dir(config);
  const std::string stamp = flow_stamp(config, m);
  const fs::path stamp_path = dir / "params.json";
  if (fs::exists(stamp_path) && detail::read_file(stamp_path) != stamp) fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<ClipRecord> clips = all_clips(m);
  parallel_for(clips.size(), config.jobs, [&](std::size_t k) {
    ClipData data(clips[k], config.pipeline, dir);
    for (std::size_t p = 0; p < data.pairs().size(); ++p) data.flow(p);
  });
  detail::write_file(stamp_path, stamp);
}

std::vector<std::pair<Stream, TrainReport>> stage_train(const ExperimentConfig& config) {
  const Manifest m = load_manifest(manifest_path(config));
  std::vector<std::pair<Stream, TrainReport>> out;
  for (Stream stream : required_streams(config.systems)) {
    require_two_classes(m.train, systems_using(config.systems, stream));
    std::vector<std::vector<FeatureMap>> per_clip(m.train.size());
    parallel_for(m.train.size(), config.jobs, [&](std::size_t k) {
      ClipData data(m.train[k], config.pipeline, flow_dir(config));
      const std::size_t n = instance_count(m.train[k], stream, config.pipeline);
      for (std::size_t i = 0; i < n; ++i) per_clip[k].push_back(stream_instance(data, stream, i, config.pipeline));
    });
    std::vector<FeatureMap> inputs;
    std::vector<int> labels;
    for (std::size_t k = 0; k < per_clip.size(); ++k)
      for (auto& x : per_clip[k]) {
        inputs.push_back(std::move(x));
        labels.push_back(m.train[k].class_label);
      }
    if (inputs.empty())
      throw InstanceError(std::string(to_string(stream)) + " stream: no training instances in the train split");
    const std::string name(to_string(stream));
    const std::vector<LayerSpec> layers =
        stream == Stream::window ? default_window_layers(m.num_classes()) : default_stream_layers(m.num_classes());
    Network<float> net(shape_of(inputs.front()), layers, derive_seed(config.seed, "init/" + name));
    TrainParams tp;
    tp.sgd = config.training.sgd;
    tp.epochs = config.training.epochs;
    tp.batch_size = config.training.batch_size;
    tp.lr_decay = config.training.lr_decay;
    tp.seed = derive_seed(config.seed, "order/" + name);
    TrainReport report = train<float>(net, std::span<const FeatureMap>(inputs), std::span<const int>(labels), tp);
    save_weights(net, model_path(config, stream));
    json log;
    log["stream"] = name;
    log["instances"] = inputs.size();
    log["epoch_loss"] = report.epoch_loss;
    detail::write_file(config.work_dir / "models" / (name + ".train.json"), log.dump(1) + "\n");
    out.emplace_back(stream, std::move(report));
  }
  return out;
}

Models load_models(const ExperimentConfig& config) {
  Models models;
  auto load = [&](Stream s, std::optional<Network<float>>& slot) {
    const fs::path p = model_path(config, s);
    if (fs::exists(p)) slot = load_weights(p);
  };
  load(Stream::spatial, models.spatial);
  load(Stream::temporal, models.temporal);
  load(Stream::window, models.window);
  load(Stream::spatial_bbox, models.spatial_bbox);
  load(Stream::temporal_bbox, models.temporal_bbox);
  for (System s : all_systems()) {
    if (!uses_svm(s)) continue;
    const fs::path p = svm_path(config, s);
    if (fs::exists(p)) models.svms.emplace(s, load_svm(p));
  }
  return models;
}

void stage_fuse(const ExperimentConfig& config) {
  const Manifest m = load_manifest(manifest_path(config));
  const Models models = load_models(config);
  for (System system : config.systems) {
    if (!uses_svm(system)) continue;
    for (const auto& [split, clips] : {std::pair<std::string, const std::vector<ClipRecord>*>{"train", &m.train},
                                       {"test", &m.test}}) {
      const fs::path dir = feature_dir(config, system, split);
      fs::remove_all(dir);
      fs::create_directories(dir);
      std::vector<std::optional<FeatureRow>> rows(clips->size());
      parallel_for(clips->size(), config.jobs, [&](std::size_t k) {
        const ClipRecord& clip = (*clips)[k];
        ClipData data(clip, config.pipeline, flow_dir(config));
        const std::vector<FeatureVector> feats = fused_instances(data, system, models, config.pipeline);
        if (feats.empty()) return;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(feats.front().size());
        for (std::size_t i = 0; i < feats.size(); ++i) {
          const Eigen::Index d = feats[i].size();
          write_fmap(FeatureMap(1, 1, 1, int(d), feats[i].data), flow_cache_path(dir, clip.clip_id, i));
          mean += feats[i].data.cast<double>();
        }
        rows[k] = FeatureRow{clip.clip_id, clip.class_label, (mean / double(feats.size())).cast<float>()};
      });
      std::vector<FeatureRow> dump;
      for (auto& r : rows)
        if (r) dump.push_back(std::move(*r));
      dump_features(dump, config.work_dir / "features" / (std::string(to_string(system)) + "_" + split + ".tsv"));
    }
  }
}

void stage_fit_svm(const ExperimentConfig& config) {
  const Manifest m = load_manifest(manifest_path(config));
  for (System system : config.systems) {
    if (!uses_svm(system)) continue;
    const fs::path dir = feature_dir(config, system, "train");
    std::vector<FeatureVector> feats;
    std::vector<int> labels;
    for (const auto& clip : m.train) {
      const std::size_t n = flow_pairs(clip, config.pipeline.flow_stride).size();
      for (std::size_t i = 0; i < n; ++i) {
        const fs::path p = flow_cache_path(dir, clip.clip_id, i);
        if (!fs::exists(p))
          throw ConfigError(std::string(to_string(system)) + ": missing fused feature " + p.string() +
                            " (run the fuse stage first)");
        feats.emplace_back(read_fmap(p).values(), Provenance::concat);
        labels.push_back(clip.class_label);
      }
    }
    SvmParams params = config.svm;
    params.seed = derive_seed(config.seed, "svm/" + std::string(to_string(system)));
    try {
      if (feats.empty()) throw ShapeError("no training features");
      save_svm(train_svm(feats, labels, params), svm_path(config, system));
    } catch (const DegenerateLabels& e) {
      throw DegenerateLabels(std::string(to_string(system)) + ": " + e.what());
    } catch (const ShapeError& e) {
      throw ShapeError(std::string(to_string(system)) + ": " + e.what());
    }
  }
}

std::vector<EvalReport> stage_eval(const ExperimentConfig& config) {
  const Manifest m = load_manifest(manifest_path(config));
  const Models models = load_models(config);
  std::vector<EvalReport> reports;
  for (System system : config.systems) {
    std::vector<PredictionRecord> preds(m.test.size());
    parallel_for(m.test.size(), config.jobs, [&](std::size_t k) {
      const ClipRecord& clip = m.test[k];
      PredictionRecord& p = preds[k];
      p.clip_id = clip.clip_id;
      p.true_class = clip.class_label;
      p.camera = clip.camera;
      try {
        p.predicted = classify_clip(clip, system, models, config.pipeline, flow_dir(config)).predicted;
      } catch (const InstanceError& e) {
        p.predicted = -1;
        p.error = e.what();
      }
    });
    EvalReport r = evaluate(preds, m.num_classes(), m.classes);
    r.system = std::string(to_string(system));
    write_report_files(config, r);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<EvalReport> stage_report(const ExperimentConfig& config) {
  std::vector<EvalReport> reports;
  for (System system : config.systems) {
    const fs::path p = config.work_dir / "reports" / (std::string(to_string(system)) + ".json");
    if (!fs::exists(p)) throw ConfigError("no report for " + std::string(to_string(system)) + " at " + p.string());
    reports.push_back(report_from_json(detail::read_file(p)));
  }
  detail::write_file(config.work_dir / "summary.txt", summary_text(reports));
  detail::write_file(config.work_dir / "summary.json", summary_json(reports));
  return reports;
}

std::vector<EvalReport> run_experiment(const ExperimentConfig& config) {
  stage_gen(config);
  stage_flow(config);
  stage_train(config);
  stage_fuse(config);
  stage_fit_svm(config);
  stage_eval(config);
  return stage_report(config);
}

}  // namespace stcooc
