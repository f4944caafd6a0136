// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// nonzero if any criterion fails.
//
//   stcooc_acceptance [work_dir]

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "stcooc/experiment.hpp"

using namespace stcooc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const EvalReport& report_of(const std::vector<EvalReport>& reports, System s) {
  for (const auto& r : reports)
    if (r.system == to_string(s)) return r;
  throw std::runtime_error("no report for " + std::string(to_string(s)));
}

ExperimentConfig base_config(const fs::path& work, const std::string& tag, std::uint64_t seed) {
  ExperimentConfig c = load_config(fs::path(STCOOC_SOURCE_DIR) / "configs" / "default.json");
  override_seed(c, seed);
  c.work_dir = work / tag;
  fs::remove_all(c.work_dir);
  return c;
}

// Default 4-class set, seed 7; also keeps the summary for the determinism check.
Outcome ordering(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = base_config(work, "ordering", 7);
  const auto reports = run_experiment(c);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  const double sp = report_of(reports, System::spatial_only).mean_accuracy;
  const double tp = report_of(reports, System::temporal_only).mean_accuracy;
  const double best_single = std::max(sp, tp);
  const double early = report_of(reports, System::early_fusion).mean_accuracy;
  const double late = report_of(reports, System::late_fusion).mean_accuracy;
  const double cooc = report_of(reports, System::cooccurrence).mean_accuracy;
  Outcome o;
  o.pass = sp <= 0.60 && tp <= 0.60 && cooc >= 0.90 && early > best_single && late > best_single &&
           cooc > best_single && minutes <= 15.0;
  o.detail = "spatial " + percent(sp) + "% temporal " + percent(tp) + "% early " + percent(early) + "% late " +
             percent(late) + "% cooccurrence " + percent(cooc) + "% conv3d " +
             percent(report_of(reports, System::conv3d).mean_accuracy) + "% in " + fmt("%.1f", minutes) + " min";
  return o;
}

Outcome determinism(const fs::path& work) {
  const ExperimentConfig c = base_config(work, "ordering_repeat", 7);
  run_experiment(c);
  const std::string a = slurp(work / "ordering" / "summary.json");
  const std::string b = slurp(c.work_dir / "summary.json");
  Outcome o;
  o.pass = !a.empty() && a == b;
  o.detail = o.pass ? "summary.json identical (" + std::to_string(a.size()) + " bytes)" : "summary.json differs";
  return o;
}

Outcome bounding_box(const fs::path& work) {
  double plain = 0.0, boxed = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ExperimentConfig c = base_config(work, "bbox_" + std::to_string(seed), seed);
    c.synth->clutter = 3;
    c.systems = {System::cooccurrence, System::cooccurrence_bbox};
    const auto reports = run_experiment(c);
    const double a = report_of(reports, System::cooccurrence).mean_accuracy;
    const double b = report_of(reports, System::cooccurrence_bbox).mean_accuracy;
    plain += a / 3.0;
    boxed += b / 3.0;
    per_seed += " [" + percent(a) + "/" + percent(b) + "]";
  }
  Outcome o;
  o.pass = boxed >= plain;
  o.detail = "mean cooccurrence " + percent(plain) + "% vs +bbox " + percent(boxed) + "%, per seed" + per_seed;
  return o;
}

Outcome zero_centering(const fs::path& work) {
  double with = 0.0, without = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    double acc[2] = {0.0, 0.0};
    for (int zc = 0; zc < 2; ++zc) {
      ExperimentConfig c =
          base_config(work, "ablation_" + std::to_string(seed) + (zc ? "_zc" : "_raw"), seed);
      c.synth->camera_motion_fraction = 0.5;
      c.systems = {System::temporal_only};
      c.pipeline.zero_center_temporal = zc == 1;
      const EvalReport& r = report_of(run_experiment(c), System::temporal_only);
      if (!r.moving_clips.mean_accuracy) throw std::runtime_error("no moving clips in the test split");
      acc[zc] = *r.moving_clips.mean_accuracy;
    }
    with += acc[1] / 3.0;
    without += acc[0] / 3.0;
    per_seed += " [" + percent(acc[1]) + "/" + percent(acc[0]) + "]";
  }
  Outcome o;
  o.pass = with >= without;
  o.detail = "moving-camera temporal_only " + percent(with) + "% with mean subtraction vs " + percent(without) +
             "% without, per seed" + per_seed;
  return o;
}

Outcome bilinear_oracle() {
  std::mt19937_64 gen(20240601);
  double worst = 0.0;
  const int instances = 200;
  for (int k = 0; k < instances; ++k) {
    const int h = 1 + int(gen() % 4), w = 1 + int(gen() % 4), d = 1 + int(gen() % 8);
    const FeatureMap s = oracle::random_tensor<float>(1, h, w, d, gen);
    const FeatureMap t = oracle::random_tensor<float>(1, h, w, d, gen);
    worst = std::max(worst, (bilinear_pooled(s, t) - oracle::bilinear_max(s, t)).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = worst < 1e-6;
  o.detail = std::to_string(instances) + " instances up to 4x4x8, max abs error " + fmt("%.3g", worst);
  return o;
}

Outcome gradient_checks() {
  double worst = 0.0;
  std::string where;
  int checked = 0;
  long compared = 0, straddling = 0;
  double coverage = 1.0;
  for (const auto& c : oracle::gradient_cases())
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const oracle::GradCheck r = oracle::run_gradient_case(c, seed);
      ++checked;
      compared += r.checked;
      straddling += r.straddling;
      coverage = std::min(coverage, r.min_coverage);
      if (r.worst_relative >= worst) {
        worst = r.worst_relative;
        where = c.kind + "/" + r.worst_layer + " seed " + std::to_string(seed);
      }
    }
  Outcome o;
  o.pass = worst < 1e-3 && coverage >= 1.0;
  o.detail = std::to_string(checked) + " case/seed runs, worst relative error " + fmt("%.3g", worst) + " (" + where +
             "), " + std::to_string(compared) + " parameters compared, " + std::to_string(straddling) +
             " skipped at kinks, min layer coverage " + fmt("%.3f", coverage);
  return o;
}

Outcome flow_accuracy() {
  double worst_epe = 0.0, worst_still = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const oracle::Texture tex(seed);
    const FeatureMap a = tex.frame(32, 32);
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const FlowField f = compute_flow(a, tex.frame(32, 32, dx, dy));
      const double epe = (((f.u.cast<double>() - dx).square() + (f.v.cast<double>() - dy).square()).sqrt()).mean();
      worst_epe = std::max(worst_epe, epe);
    }
    const FlowField z = compute_flow(a, a);
    worst_still = std::max(worst_still, double((z.u.square() + z.v.square()).sqrt().maxCoeff()));
  }
  Outcome o;
  o.pass = worst_epe < 0.2 && worst_still < 1e-3;
  o.detail = "worst mean endpoint error " + fmt("%.4f", worst_epe) + " px, identical-frame max magnitude " +
             fmt("%.2g", worst_still);
  return o;
}

Outcome counting() {
  bool ok = true;
  for (int n = 15; n <= 30; ++n) ok &= int(sliding_windows(n, 15).size()) == n - 14;
  std::mt19937_64 gen(77);
  const double fps_values[] = {10, 12, 15, 24, 25, 30, 50, 60};
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + int(gen() % 120);
    const double fps = fps_values[gen() % 8];
    const double rate = 1.0 + double(gen() % std::uint64_t(fps));
    const int delta = 1 + int(gen() % 8);
    ClipRecord clip;
    clip.clip_id = "count" + std::to_string(k);
    clip.fps = fps;
    clip.frame_paths.resize(std::size_t(n));
    const int stride = std::max(1, int(std::lround(fps / rate)));
    ok &= sampling_stride(fps, rate) == stride;
    ok &= int(sample_frames(clip, SamplingMode::fixed_rate(rate)).size()) == (n - 1) / stride + 1;
    ok &= int(flow_pairs(clip, delta).size()) == (n > delta ? (n - 1) / delta : 0);
    ok &= sample_frames(clip, SamplingMode::random_one(std::uint64_t(k))).size() == 1;
  }
  Outcome o;
  o.pass = ok;
  o.detail = "N_f in 15..30 for L=15 and 50 random (N_f, fps) combinations";
  return o;
}

Outcome metrics() {
  auto make = [](const std::vector<std::pair<int, int>>& truth_pred) {
    std::vector<PredictionRecord> p;
    for (std::size_t k = 0; k < truth_pred.size(); ++k) {
      PredictionRecord r;
      r.clip_id = "m" + std::to_string(k);
      r.true_class = truth_pred[k].first;
      r.predicted = truth_pred[k].second;
      p.push_back(r);
    }
    return p;
  };
  struct Case {
    std::vector<std::pair<int, int>> preds;
    int classes;
    double expected;
  };
  const std::vector<Case> cases = {
      {{{0, 0}, {0, 0}, {1, 0}, {1, 0}}, 2, 0.5},
      {{{0, 0}, {0, 1}, {1, 1}, {1, 1}, {2, 0}}, 3, 0.5},
      {{{0, 0}, {1, 1}, {2, 2}, {3, 3}}, 4, 1.0},
      {{{0, 1}, {1, 0}, {1, 0}}, 2, 0.0},
      {{{0, 0}, {0, 0}, {0, 0}, {0, 1}, {2, 2}}, 4, 0.875},  // class 1 and 3 absent
  };
  bool ok = true;
  std::string got;
  for (const auto& c : cases) {
    const double m = evaluate(make(c.preds), c.classes).mean_accuracy;
    ok &= m == c.expected;
    got += " " + percent(m);
  }
  auto dup = cases[1].preds;
  for (const auto& tp : cases[1].preds)
    if (tp.first == 1) dup.push_back(tp);
  ok &= std::abs(evaluate(make(dup), 3).mean_accuracy - cases[1].expected) < 1e-9;
  Outcome o;
  o.pass = ok;
  o.detail = "crafted sets:" + got + "; duplication invariance checked";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stcooc_acceptance";
  fs::create_directories(work);

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"ordering", [&] { return ordering(work); }},
      {"bounding_box", [&] { return bounding_box(work); }},
      {"zero_centering_ablation", [&] { return zero_centering(work); }},
      {"bilinear_oracle", bilinear_oracle},
      {"gradient_checks", gradient_checks},
      {"flow_accuracy", flow_accuracy},
      {"counting_formulas", counting},
      {"metric_correctness", metrics},
      {"determinism", [&] { return determinism(work); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
