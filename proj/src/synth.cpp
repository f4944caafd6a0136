#include "stcooc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "stcooc/io.hpp"

namespace stcooc {

namespace fs = std::filesystem;

std::string_view to_string(Appearance a) { return a == Appearance::texture_A ? "texture_A" : "texture_B"; }

std::string_view to_string(Motion m) {
  switch (m) {
    case Motion::left: return "left";
    case Motion::right: return "right";
    case Motion::up: return "up";
    case Motion::down: return "down";
  }
  return "unknown";
}

Appearance parse_appearance(const std::string& name) {
  if (name == "texture_A" || name == "A") return Appearance::texture_A;
  if (name == "texture_B" || name == "B") return Appearance::texture_B;
  throw SpecError("unknown appearance '" + name + "'");
}

Motion parse_motion(const std::string& name) {
  for (Motion m : {Motion::left, Motion::right, Motion::up, Motion::down})
    if (to_string(m) == name) return m;
  throw SpecError("unknown motion '" + name + "'");
}

std::string SynthClass::name() const {
  return std::string(appearance == Appearance::texture_A ? "A" : "B") + "-" + std::string(to_string(motion));
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw SpecError(what); };
  if (height < 16 || width < 16) fail("frames must be at least 16x16");
  if (frame_count < 2) fail("clips need at least 2 frames");
  if (!(fps > 0.0) || !std::isfinite(fps)) fail("fps must be positive");
  if (classes.size() < 2) fail("at least 2 classes are required");
  bool shared_appearance = false, shared_motion = false;
  for (std::size_t a = 0; a < classes.size(); ++a)
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      if (classes[a] == classes[b]) fail("class " + classes[a].name() + " is listed twice");
      shared_appearance |= classes[a].appearance == classes[b].appearance;
      shared_motion |= classes[a].motion == classes[b].motion;
    }
  if (!shared_appearance) fail("no two classes share an appearance");
  if (!shared_motion) fail("no two classes share a motion");
  if (train_per_class < 1 || test_per_class < 1) fail("clips per class must be >= 1");
  if (!(speed >= 0.0) || !std::isfinite(speed)) fail("speed must be finite and >= 0");
  if (!(blob_radius > 0.0) || blob_radius * 2.0 >= std::min(height, width)) fail("blob radius out of range");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise sigma must be >= 0");
  if (!(camera_motion_fraction >= 0.0 && camera_motion_fraction <= 1.0)) fail("camera motion fraction outside [0, 1]");
  if (!(drift_speed >= 0.0) || !std::isfinite(drift_speed)) fail("drift speed must be finite and >= 0");
  if (clutter < 0) fail("clutter must be >= 0");
}

namespace {

// Isoluminant chroma offsets: 0.299 r + 0.587 g + 0.114 b = 0.
constexpr double kChromaA[3] = {0.16, -0.16 * 0.299 / 0.587, 0.0};
constexpr double kChromaB[3] = {-0.08, 0.0, 0.08 * 0.299 / 0.114};
constexpr double kStripePeriod = 4.0;
constexpr double kBlobLuma = 0.5;
constexpr double kBumpAmplitude = 0.22;
constexpr double kPerpendicularJitter = 3.0;

struct Direction {
  double x, y;
};

Direction direction(Motion m) {
  switch (m) {
    case Motion::left: return {-1.0, 0.0};
    case Motion::right: return {1.0, 0.0};
    case Motion::up: return {0.0, -1.0};
    case Motion::down: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

struct Wave {
  double amplitude, fx, fy, phase;
};

struct Blob {
  SynthClass look;
  double x0, y0;  // position at the centre frame, drift excluded
  Direction dir;
};

void paint_blob(FeatureMap& f, const Blob& b, double cx, double cy, double radius) {
  const double sigma = radius / 2.0;
  const double* chroma = b.look.appearance == Appearance::texture_A ? kChromaA : kChromaB;
  const int i0 = std::max(0, int(std::floor(cy - radius - 1.0)));
  const int i1 = std::min(f.height() - 1, int(std::ceil(cy + radius + 1.0)));
  const int j0 = std::max(0, int(std::floor(cx - radius - 1.0)));
  const int j1 = std::min(f.width() - 1, int(std::ceil(cx + radius + 1.0)));
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j) {
      const double dx = j - cx, dy = i - cy;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double m = std::clamp(radius + 0.5 - r, 0.0, 1.0);
      if (m <= 0.0) continue;
      const double luma = kBlobLuma + kBumpAmplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      const double u = b.look.appearance == Appearance::texture_A ? dx : dy;
      const double stripe = 0.6 + 0.4 * std::cos(2.0 * std::numbers::pi * u / kStripePeriod);
      for (int c = 0; c < 3; ++c) {
        const double blob = luma + chroma[c] * stripe;
        f(i, j, c) = float((1.0 - m) * f(i, j, c) + m * blob);
      }
    }
}

}  // namespace

std::vector<FeatureMap> render_clip(const SynthSpec& spec, int class_index, const std::string& clip_id,
                                    CameraMotion camera, SynthTrack* track) {
  spec.validate();
  if (class_index < 0 || std::size_t(class_index) >= spec.classes.size())
    throw SpecError("class index " + std::to_string(class_index) + " out of range");
  UniformSource rng(derive_seed(spec.seed, "clip/" + clip_id));
  const SynthClass& cls = spec.classes[std::size_t(class_index)];
  const double pi = std::numbers::pi;

  // Scene parameters are drawn before any noise so the stream layout is fixed.
  std::vector<Wave> waves;
  for (double amp : {0.08, 0.06}) {
    const double freq = 0.12 + 0.13 * rng.next();
    const double angle = 2.0 * pi * rng.next();
    waves.push_back({amp, freq * std::cos(angle), freq * std::sin(angle), 2.0 * pi * rng.next()});
  }
  Direction drift{0.0, 0.0};
  if (camera == CameraMotion::moving) {
    const double angle = 2.0 * pi * rng.next();
    drift = {spec.drift_speed * std::cos(angle), spec.drift_speed * std::sin(angle)};
  }
  const double cx = (spec.width - 1) / 2.0, cy = (spec.height - 1) / 2.0;
  const Direction dir = direction(cls.motion);
  const double jitter = (2.0 * rng.next() - 1.0) * kPerpendicularJitter;
  const Blob target{cls, cx + (dir.x == 0.0 ? jitter : 0.0), cy + (dir.y == 0.0 ? jitter : 0.0), dir};
  std::vector<Blob> distractors;
  for (int k = 0; k < spec.clutter; ++k) {
    SynthClass look{rng.next() < 0.5 ? Appearance::texture_A : Appearance::texture_B,
                    static_cast<Motion>(rng.below(4))};
    const double x = rng.next() * (spec.width - 1), y = rng.next() * (spec.height - 1);
    distractors.push_back({look, x, y, direction(look.motion)});
  }

  const int tc = (spec.frame_count - 1) / 2;
  std::vector<FeatureMap> frames;
  if (track) {
    track->clip_id = clip_id;
    track->class_index = class_index;
    track->camera = camera;
    track->vx = dir.x * spec.speed + drift.x;
    track->vy = dir.y * spec.speed + drift.y;
    track->drift_x = drift.x;
    track->drift_y = drift.y;
    track->boxes.clear();
  }
  for (int t = 0; t < spec.frame_count; ++t) {
    const double dt = t - tc;
    const double sx = drift.x * dt, sy = drift.y * dt;
    FeatureMap f(spec.height, spec.width, 3);
    for (int i = 0; i < spec.height; ++i)
      for (int j = 0; j < spec.width; ++j) {
        double v = 0.45;
        for (const Wave& w : waves) v += w.amplitude * std::sin(w.fx * (j - sx) + w.fy * (i - sy) + w.phase);
        for (int c = 0; c < 3; ++c) f(i, j, c) = float(v);
      }
    for (const Blob& b : distractors)
      paint_blob(f, b, b.x0 + b.dir.x * spec.speed * dt + sx, b.y0 + b.dir.y * spec.speed * dt + sy,
                 spec.blob_radius);
    const double bx = target.x0 + dir.x * spec.speed * dt + sx;
    const double by = target.y0 + dir.y * spec.speed * dt + sy;
    paint_blob(f, target, bx, by, spec.blob_radius);
    if (spec.noise_sigma > 0.0)
      for (Eigen::Index k = 0; k < f.size(); ++k) f.values()[k] += float(spec.noise_sigma * rng.normal());
    f.values() = f.values().cwiseMax(0.0f).cwiseMin(1.0f);
    if (track)
      track->boxes.push_back({t, bx - spec.blob_radius, by - spec.blob_radius, 2.0 * spec.blob_radius,
                              2.0 * spec.blob_radius});
    frames.push_back(std::move(f));
  }
  return frames;
}

Manifest generate_dataset(const SynthSpec& spec, const fs::path& out_dir, int jobs, std::vector<SynthTrack>* tracks) {
  spec.validate();
  Manifest m;
  m.dataset = spec.name;
  for (const auto& c : spec.classes) m.classes.push_back(c.name());

  struct Job {
    bool train;
    int cls;
    int index;
  };
  std::vector<Job> work;
  for (bool train : {true, false}) {
    const int per_class = train ? spec.train_per_class : spec.test_per_class;
    for (int c = 0; c < int(spec.classes.size()); ++c)
      for (int k = 0; k < per_class; ++k) work.push_back({train, c, k});
  }
  // Moving clips are spread evenly over each class's clip list.
  auto moving = [&](int k) {
    const double f = spec.camera_motion_fraction;
    return std::floor((k + 1) * f + 1e-9) > std::floor(k * f + 1e-9);
  };

  std::vector<ClipRecord> records(work.size());
  std::vector<SynthTrack> clip_tracks(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t w) {
    const Job& job = work[w];
    char id[96];
    std::snprintf(id, sizeof id, "%s_%s_%03d", job.train ? "train" : "test",
                  spec.classes[std::size_t(job.cls)].name().c_str(), job.index);
    const CameraMotion camera = moving(job.index) ? CameraMotion::moving : CameraMotion::static_camera;
    const std::vector<FeatureMap> frames = render_clip(spec, job.cls, id, camera, &clip_tracks[w]);
    const fs::path dir = out_dir / "clips" / id;
    ClipRecord& rec = records[w];
    rec.clip_id = id;
    rec.class_label = job.cls;
    rec.fps = spec.fps;
    rec.camera = camera;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%03zu.ppm", t);
      write_image(frames[t], dir / name);
      rec.frame_paths.push_back(dir / name);
    }
    rec.box_file = dir / "boxes.txt";
    write_boxes(clip_tracks[w].boxes, *rec.box_file);
  });
  for (std::size_t w = 0; w < work.size(); ++w) (work[w].train ? m.train : m.test).push_back(records[w]);
  validate_manifest(m, true);
  save_manifest(m, out_dir / "manifest.json");
  if (tracks) *tracks = std::move(clip_tracks);
  return m;
}

}  // namespace stcooc
