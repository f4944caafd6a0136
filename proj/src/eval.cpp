#include "stcooc/eval.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "stcooc/io.hpp"

namespace stcooc {

using nlohmann::json;

std::optional<double> class_balanced_mean(const std::vector<ClassCount>& counts) {
  double sum = 0.0;
  int present = 0;
  for (const auto& c : counts) {
    if (c.total == 0) continue;
    sum += double(c.correct) / double(c.total);
    ++present;
  }
  if (present == 0) return std::nullopt;
  return sum / double(present);
}

EvalReport evaluate(const std::vector<PredictionRecord>& predictions, int num_classes,
                    std::vector<std::string> class_names) {
  if (predictions.empty()) throw EmptyEval("no predictions to evaluate");
  int classes = num_classes;
  if (classes <= 0)
    for (const auto& p : predictions) classes = std::max({classes, p.true_class + 1, p.predicted + 1});
  for (const auto& p : predictions)
    if (p.true_class < 0 || p.true_class >= classes || p.predicted >= classes)
      throw InvalidValue("clip '" + p.clip_id + "' has a label outside [0, " + std::to_string(classes) + ")");

  EvalReport r;
  r.class_names = std::move(class_names);
  r.per_class.assign(std::size_t(classes), {});
  r.confusion = Eigen::MatrixXi::Zero(classes, classes);
  r.static_clips.camera = CameraMotion::static_camera;
  r.moving_clips.camera = CameraMotion::moving;
  r.static_clips.per_class.assign(std::size_t(classes), {});
  r.moving_clips.per_class.assign(std::size_t(classes), {});
  for (const auto& p : predictions) {
    const bool correct = p.predicted == p.true_class;
    CameraBreakdown& sub = p.camera == CameraMotion::moving ? r.moving_clips : r.static_clips;
    for (auto* counts : {&r.per_class, &sub.per_class}) {
      (*counts)[std::size_t(p.true_class)].total += 1;
      (*counts)[std::size_t(p.true_class)].correct += correct ? 1 : 0;
    }
    sub.clips += 1;
    if (p.skipped())
      r.skipped.push_back(p);
    else
      r.confusion(p.true_class, p.predicted) += 1;
  }
  for (int c = 0; c < classes; ++c)
    if (r.per_class[std::size_t(c)].total == 0) r.excluded_classes.push_back(c);
  r.mean_accuracy = class_balanced_mean(r.per_class).value_or(0.0);
  r.static_clips.mean_accuracy = class_balanced_mean(r.static_clips.per_class);
  r.moving_clips.mean_accuracy = class_balanced_mean(r.moving_clips.per_class);
  return r;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

namespace {

std::string class_name(const EvalReport& r, int c) {
  return std::size_t(c) < r.class_names.size() ? r.class_names[std::size_t(c)] : std::to_string(c);
}

std::string optional_percent(const std::optional<double>& v) { return v ? percent(*v) : std::string("-"); }

json counts_json(const std::vector<ClassCount>& counts) {
  json arr = json::array();
  for (const auto& c : counts) arr.push_back({{"correct", c.correct}, {"total", c.total}});
  return arr;
}

std::vector<ClassCount> counts_from_json(const json& arr) {
  std::vector<ClassCount> out;
  for (const auto& c : arr) out.push_back({c.at("correct").get<int>(), c.at("total").get<int>()});
  return out;
}

json breakdown_json(const CameraBreakdown& b) {
  json j;
  j["clips"] = b.clips;
  j["per_class"] = counts_json(b.per_class);
  j["mean_accuracy"] = b.mean_accuracy ? json(*b.mean_accuracy) : json(nullptr);
  return j;
}

CameraBreakdown breakdown_from_json(const json& j, CameraMotion camera) {
  CameraBreakdown b;
  b.camera = camera;
  b.clips = j.at("clips").get<int>();
  b.per_class = counts_from_json(j.at("per_class"));
  if (!j.at("mean_accuracy").is_null()) b.mean_accuracy = j.at("mean_accuracy").get<double>();
  return b;
}

}  // namespace

std::string report_text(const EvalReport& r) {
  std::ostringstream out;
  out << "system: " << (r.system.empty() ? "-" : r.system) << "\n";
  out << "mean accuracy: " << percent(r.mean_accuracy) << "%\n";
  out << "static camera: " << optional_percent(r.static_clips.mean_accuracy) << "% (" << r.static_clips.clips
      << " clips)\n";
  out << "moving camera: " << optional_percent(r.moving_clips.mean_accuracy) << "% (" << r.moving_clips.clips
      << " clips)\n";
  out << "per class:\n";
  for (int c = 0; c < r.num_classes(); ++c) {
    const ClassCount& k = r.per_class[std::size_t(c)];
    out << "  " << class_name(r, c) << "  " << k.correct << "/" << k.total;
    if (k.total > 0) out << "  " << percent(double(k.correct) / double(k.total)) << "%";
    out << "\n";
  }
  out << "confusion (rows true, columns predicted):\n";
  for (int a = 0; a < r.num_classes(); ++a) {
    out << " ";
    for (int b = 0; b < r.num_classes(); ++b) out << " " << std::setw(4) << r.confusion(a, b);
    out << "\n";
  }
  if (!r.excluded_classes.empty()) {
    out << "excluded from mean (no test clips):";
    for (int c : r.excluded_classes) out << " " << class_name(r, c);
    out << "\n";
  }
  if (!r.skipped.empty()) {
    out << "skipped clips (counted as errors):\n";
    for (const auto& p : r.skipped) out << "  " << p.clip_id << ": " << p.error << "\n";
  }
  return out.str();
}

std::string report_json(const EvalReport& r) {
  json j;
  j["system"] = r.system;
  j["classes"] = r.class_names;
  j["mean_accuracy"] = r.mean_accuracy;
  j["per_class"] = counts_json(r.per_class);
  json conf = json::array();
  for (int a = 0; a < r.num_classes(); ++a) {
    json row = json::array();
    for (int b = 0; b < r.num_classes(); ++b) row.push_back(r.confusion(a, b));
    conf.push_back(std::move(row));
  }
  j["confusion"] = std::move(conf);
  j["excluded_classes"] = r.excluded_classes;
  json skipped = json::array();
  for (const auto& p : r.skipped)
    skipped.push_back({{"clip", p.clip_id}, {"class", p.true_class}, {"camera", std::string(to_string(p.camera))},
                       {"error", p.error}});
  j["skipped"] = std::move(skipped);
  j["static"] = breakdown_json(r.static_clips);
  j["moving"] = breakdown_json(r.moving_clips);
  return j.dump(1) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.system = j.at("system").get<std::string>();
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.per_class = counts_from_json(j.at("per_class"));
    const int c = int(r.per_class.size());
    r.confusion = Eigen::MatrixXi::Zero(c, c);
    const json& conf = j.at("confusion");
    if (int(conf.size()) != c) throw FormatError("confusion matrix size differs from class count");
    for (int a = 0; a < c; ++a) {
      if (int(conf[std::size_t(a)].size()) != c) throw FormatError("confusion matrix is not square");
      for (int b = 0; b < c; ++b) r.confusion(a, b) = conf[std::size_t(a)][std::size_t(b)].get<int>();
    }
    r.excluded_classes = j.at("excluded_classes").get<std::vector<int>>();
    for (const auto& s : j.at("skipped")) {
      PredictionRecord p;
      p.clip_id = s.at("clip").get<std::string>();
      p.true_class = s.at("class").get<int>();
      p.camera = parse_camera_motion(s.at("camera").get<std::string>());
      p.error = s.at("error").get<std::string>();
      r.skipped.push_back(std::move(p));
    }
    r.static_clips = breakdown_from_json(j.at("static"), CameraMotion::static_camera);
    r.moving_clips = breakdown_from_json(j.at("moving"), CameraMotion::moving);
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

std::string summary_text(const std::vector<EvalReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.system.size());
  std::ostringstream out;
  out << std::left << std::setw(int(width)) << "system" << "  " << std::right << std::setw(8) << "mean %"
      << std::setw(10) << "static %" << std::setw(10) << "moving %" << "\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(int(width)) << r.system << "  " << std::right << std::setw(8)
        << percent(r.mean_accuracy) << std::setw(10) << optional_percent(r.static_clips.mean_accuracy)
        << std::setw(10) << optional_percent(r.moving_clips.mean_accuracy) << "\n";
  }
  return out.str();
}

std::string summary_json(const std::vector<EvalReport>& reports) {
  json rows = json::array();
  for (const auto& r : reports) {
    json row;
    row["system"] = r.system;
    row["mean_accuracy"] = r.mean_accuracy;
    row["mean_accuracy_percent"] = percent(r.mean_accuracy);
    row["static_accuracy"] = r.static_clips.mean_accuracy ? json(*r.static_clips.mean_accuracy) : json(nullptr);
    row["moving_accuracy"] = r.moving_clips.mean_accuracy ? json(*r.moving_clips.mean_accuracy) : json(nullptr);
    row["skipped"] = r.skipped.size();
    row["per_class"] = counts_json(r.per_class);
    rows.push_back(std::move(row));
  }
  json doc;
  doc["systems"] = std::move(rows);
  return doc.dump(1) + "\n";
}

void dump_features(const std::vector<FeatureRow>& rows, const std::filesystem::path& path) {
  std::string out;
  char buf[64];
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].values.size() != rows.front().values.size())
      throw ShapeError("feature row " + std::to_string(k) + " has length " + std::to_string(rows[k].values.size()) +
                       ", expected " + std::to_string(rows.front().values.size()));
    out += rows[k].clip_id;
    out += '\t';
    out += std::to_string(rows[k].class_label);
    for (Eigen::Index i = 0; i < rows[k].values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "\t%.9g", double(rows[k].values[i]));
      out += buf;
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

std::vector<FeatureRow> read_feature_dump(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<FeatureRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2) throw FormatError(path.string() + ": row with fewer than 2 fields");
    FeatureRow r;
    r.clip_id = fields[0];
    try {
      r.class_label = std::stoi(fields[1]);
      r.values.resize(Eigen::Index(fields.size() - 2));
      for (std::size_t k = 2; k < fields.size(); ++k) r.values[Eigen::Index(k - 2)] = std::stof(fields[k]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": unparsable row for clip '" + r.clip_id + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace stcooc
