#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "qamatch/metrics.hpp"
#include "qamatch/trainer.hpp"

namespace qamatch {

// Report files hold one JSON object per evaluation interval, keys in this order:
//   iteration, loss_bs, loss_m, loss_c, loss_total, pseudo_label_accuracy,
//   val_accuracy, val_weighted_f1, val_minority_accuracy, kl_alignment,
//   calibration_fallbacks, p_bar, y_bar, mean_p_hat
// Unavailable metrics are null.

std::string report_to_jsonl(const TrainReport& report);
void save_report(const TrainReport& report, const std::filesystem::path& path);

/// Metrics record with keys: examples, accuracy, weighted_f1, class_names,
/// per_class_accuracy, confusion_matrix, label_distribution,
/// prediction_distribution, kl_alignment.
std::string metrics_to_json(const MetricsRecord& m, const std::vector<std::string>& class_names);

struct AggregateRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
  std::size_t runs = 0;
};

/// Aggregates the scalar fields of each report's final record. All reports
/// must share the same key set; null values are skipped.
std::vector<AggregateRow> aggregate_report_texts(const std::vector<std::string>& reports);
std::vector<AggregateRow> aggregate_reports(const std::vector<std::filesystem::path>& paths);
std::string aggregate_to_json(const std::vector<AggregateRow>& rows);

/// Sample mean and standard deviation (n - 1 denominator).
std::pair<double, double> mean_and_stddev(const std::vector<double>& values);

}  // namespace qamatch
