#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace hallab::harness {

// Bump when the column set changes; readers reject other versions.
inline constexpr const char* kMetricsSchema = "hallab-metrics-v1";

struct MetricsRow {
  int64_t step = 0;     // env steps at episode end; strictly increasing
  int64_t episode = 0;
  double episodic_reward = 0.0;
  bool success = false;
  double epsilon = 0.0;
  double hallucination_p = 0.0;
  uint64_t seed = 0;
  // Kept out of the CSV so reruns are bitwise identical; run_experiment
  // records it in the run_info sidecar instead.
  double wall_time_s = 0.0;
};

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);  // throws if steps fail to increase

 private:
  std::ofstream out_;
  int64_t last_step_ = -1;
};

struct MetricsFile {
  std::string schema;
  std::vector<MetricsRow> rows;

  // Throws on a missing file, unknown schema line, or malformed row.
  static MetricsFile read(const std::string& path);
};

}  // namespace hallab::harness
