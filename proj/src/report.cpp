#include "qamatch/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "qamatch/error.hpp"

namespace qamatch {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json record_json(const ReportRecord& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  j["loss_bs"] = r.loss_bs;
  j["loss_m"] = r.loss_m;
  j["loss_c"] = r.loss_c;
  j["loss_total"] = r.loss_total;
  j["pseudo_label_accuracy"] = optional_json(r.pseudo_label_accuracy);
  j["val_accuracy"] = optional_json(r.val_accuracy);
  j["val_weighted_f1"] = optional_json(r.val_weighted_f1);
  j["val_minority_accuracy"] = optional_json(r.val_minority_accuracy);
  j["kl_alignment"] = optional_json(r.kl_alignment);
  j["calibration_fallbacks"] = r.calibration_fallbacks;
  j["p_bar"] = r.p_bar;
  j["y_bar"] = r.y_bar;
  j["mean_p_hat"] = r.mean_p_hat;
  return j;
}

ordered_json last_record(const std::string& text, std::size_t index) {
  std::istringstream in(text);
  std::string line, last;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = ordered_json::parse(line);
      if (!j.is_object()) throw DataError("report " + std::to_string(index) + " line " + std::to_string(line_no) + ": not an object");
    } catch (const ordered_json::parse_error& e) {
      throw DataError("report " + std::to_string(index) + " line " + std::to_string(line_no) + ": " + e.what());
    }
    last = line;
  }
  if (last.empty()) throw DataError("report " + std::to_string(index) + " has no records");
  return ordered_json::parse(last);
}

}  // namespace

std::string report_to_jsonl(const TrainReport& report) {
  std::string out;
  for (const auto& r : report.records) {
    out += record_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_report(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << report_to_jsonl(report);
  if (!out) throw DataError("failed writing " + path.string());
}

std::string metrics_to_json(const MetricsRecord& m, const std::vector<std::string>& class_names) {
  ordered_json j;
  j["examples"] = m.examples;
  j["accuracy"] = m.accuracy;
  j["weighted_f1"] = m.weighted_f1;
  j["class_names"] = class_names;
  ordered_json per_class = ordered_json::array();
  for (const auto& v : m.per_class_accuracy) per_class.push_back(optional_json(v));
  j["per_class_accuracy"] = per_class;
  j["confusion_matrix"] = m.confusion.rows();
  j["label_distribution"] = m.label_distribution.probs();
  j["prediction_distribution"] = m.prediction_distribution.probs();
  j["kl_alignment"] = m.kl_alignment;
  return j.dump();
}

std::pair<double, double> mean_and_stddev(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::vector<AggregateRow> aggregate_report_texts(const std::vector<std::string>& reports) {
  if (reports.empty()) throw ParameterError("at least one report is required");
  std::vector<ordered_json> finals;
  for (std::size_t i = 0; i < reports.size(); ++i) finals.push_back(last_record(reports[i], i));

  std::vector<std::string> keys;
  for (const auto& [k, v] : finals.front().items()) keys.push_back(k);
  for (std::size_t i = 1; i < finals.size(); ++i) {
    std::vector<std::string> other;
    for (const auto& [k, v] : finals[i].items()) other.push_back(k);
    if (other != keys) throw DataError("report " + std::to_string(i) + " has a different schema than report 0");
  }

  std::vector<AggregateRow> rows;
  for (const auto& key : keys) {
    if (key == "iteration") continue;
    std::vector<double> values;
    bool scalar = true;
    for (const auto& f : finals) {
      const auto& v = f.at(key);
      if (v.is_null()) continue;
      if (!v.is_number()) {
        scalar = false;
        break;
      }
      values.push_back(v.get<double>());
    }
    if (!scalar) continue;
    auto [mean, sd] = mean_and_stddev(values);
    rows.push_back(AggregateRow{key, mean, sd, values.size()});
  }
  return rows;
}

std::vector<AggregateRow> aggregate_reports(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::string> texts;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open report " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    texts.push_back(ss.str());
  }
  return aggregate_report_texts(texts);
}

std::string aggregate_to_json(const std::vector<AggregateRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["metric"] = r.metric;
    j["mean"] = r.mean;
    j["std"] = r.stddev;
    j["runs"] = r.runs;
    arr.push_back(j);
  }
  return arr.dump();
}

}  // namespace qamatch
