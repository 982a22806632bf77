#pragma once

// Evaluation report: one row per (dataset, image, metric) with mean and best,
// written as CSV plus a JSON summary with dataset-level averages.

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gazediff/metrics/sequence_metrics.hpp"

namespace gazediff::metrics {

struct ReportRow {
  std::string dataset;
  std::string image;
  std::string metric;
  double mean = 0;
  double best = 0;
};

class MetricReport {
 public:
  void add(ReportRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ReportRow>& rows() const { return rows_; }

  /// Per (dataset, metric): average of the per-image values and the image count.
  std::map<std::pair<std::string, std::string>, std::pair<BestMean, std::size_t>> overall() const {
    std::map<std::pair<std::string, std::string>, std::vector<BestMean>> grouped;
    for (const auto& r : rows_) grouped[{r.dataset, r.metric}].push_back({r.best, r.mean});
    std::map<std::pair<std::string, std::string>, std::pair<BestMean, std::size_t>> out;
    for (const auto& [key, values] : grouped) out[key] = {average(values), values.size()};
    return out;
  }

  void write_csv(std::ostream& os) const {
    os.precision(10);
    os << "dataset,image,metric,mean,best\n";
    for (const auto& r : rows_) os << r.dataset << ',' << r.image << ',' << r.metric << ',' << r.mean << ',' << r.best << '\n';
  }

  nlohmann::json summary() const {
    nlohmann::json j;
    j["rows"] = rows_.size();
    j["overall"] = nlohmann::json::array();
    for (const auto& [key, v] : overall())
      j["overall"].push_back({{"dataset", key.first}, {"metric", key.second}, {"mean", v.first.mean}, {"best", v.first.best}, {"images", v.second}});
    return j;
  }

 private:
  std::vector<ReportRow> rows_;
};

}  // namespace gazediff::metrics
