#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stcooc/pipeline.hpp"

namespace stcooc {

/// One evaluated clip. predicted < 0 marks a clip the system could not
/// process; it counts as wrong for its class and `error` says why.
struct PredictionRecord {
  std::string clip_id;
  int true_class = 0;
  int predicted = -1;
  CameraMotion camera = CameraMotion::static_camera;
  std::string error;

  bool skipped() const { return predicted < 0; }
};

struct ClassCount {
  int correct = 0;
  int total = 0;
};

struct CameraBreakdown {
  CameraMotion camera = CameraMotion::static_camera;
  int clips = 0;
  std::vector<ClassCount> per_class;
  std::optional<double> mean_accuracy;  // empty when no clip has this flag
};

struct EvalReport {
  std::string system;
  std::vector<std::string> class_names;
  std::vector<ClassCount> per_class;
  /// Unweighted mean of correct/total over classes with at least one clip.
  double mean_accuracy = 0.0;
  /// Rows: true class, columns: predicted class. Skipped clips are not
  /// entered, so a row sums to total minus that class's skipped clips.
  Eigen::MatrixXi confusion;
  std::vector<int> excluded_classes;
  std::vector<PredictionRecord> skipped;
  CameraBreakdown static_clips;
  CameraBreakdown moving_clips;

  int num_classes() const { return int(per_class.size()); }
};

/// Throws EmptyEval on an empty list and InvalidValue on out-of-range labels.
/// num_classes <= 0 infers the count from the largest label seen.
EvalReport evaluate(const std::vector<PredictionRecord>& predictions, int num_classes = 0,
                    std::vector<std::string> class_names = {});

/// Mean over classes with total > 0; empty when there is none.
std::optional<double> class_balanced_mean(const std::vector<ClassCount>& counts);

std::string report_text(const EvalReport& report);
std::string report_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

/// Table-I-style rows (system, mean %, static %, moving %), one decimal.
std::string summary_text(const std::vector<EvalReport>& reports);
std::string summary_json(const std::vector<EvalReport>& reports);

/// One accuracy percentage with one decimal, e.g. "87.5".
std::string percent(double fraction);

struct FeatureRow {
  std::string clip_id;
  int class_label = 0;
  Eigen::VectorXf values;
};

/// "clip_id<TAB>class<TAB>v1<TAB>...<TAB>vD" per row, values with 9
/// significant digits. Throws ShapeError on mixed lengths.
void dump_features(const std::vector<FeatureRow>& rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_feature_dump(const std::filesystem::path& path);

}  // namespace stcooc
