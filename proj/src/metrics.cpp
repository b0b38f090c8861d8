#include "hallab/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hallab::harness {

namespace {

constexpr const char* kHeader =
    "step,episode,episodic_reward,success,epsilon,hallucination_p,seed";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot write metrics file: " + path);
  out_ << "# schema: " << kMetricsSchema << "\n" << kHeader << "\n";
}

void MetricsWriter::write(const MetricsRow& row) {
  if (row.step <= last_step_) {
    throw std::logic_error("metrics steps must strictly increase");
  }
  last_step_ = row.step;
  out_ << row.step << ',' << row.episode << ',' << fmt(row.episodic_reward)
       << ',' << (row.success ? 1 : 0) << ',' << fmt(row.epsilon) << ','
       << fmt(row.hallucination_p) << ',' << row.seed << '\n';
  out_.flush();
}

MetricsFile MetricsFile::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("metrics file not found: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema: ", 0) != 0) {
    throw std::invalid_argument(path + ": missing schema line");
  }
  MetricsFile f;
  f.schema = line.substr(10);
  if (f.schema != kMetricsSchema) {
    throw std::invalid_argument(path + ": unknown metrics schema " + f.schema);
  }
  if (!std::getline(in, line) || line != kHeader) {
    throw std::invalid_argument(path + ": bad header row");
  }
  int64_t last = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) {
      throw std::invalid_argument(path + ": malformed row: " + line);
    }
    MetricsRow r;
    r.step = std::stoll(cells[0]);
    r.episode = std::stoll(cells[1]);
    r.episodic_reward = std::stod(cells[2]);
    r.success = cells[3] == "1";
    r.epsilon = std::stod(cells[4]);
    r.hallucination_p = std::stod(cells[5]);
    r.seed = std::stoull(cells[6]);
    if (r.step <= last) {
      throw std::invalid_argument(path + ": steps not strictly increasing");
    }
    last = r.step;
    f.rows.push_back(r);
  }
  return f;
}

}  // namespace hallab::harness
