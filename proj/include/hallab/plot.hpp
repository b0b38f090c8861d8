#pragma once

#include <map>
#include <string>
#include <vector>

namespace hallab::harness {

struct PlotOptions {
  int width = 900;
  int height = 600;
  int window = 100;      // moving-average span, labeled on the plot
  double band_lo = 0.05;  // 90% band
  double band_hi = 0.95;
  int grid_points = 200;
  std::string title = "episodic reward vs env steps";
};

// Trailing moving average over up to `window` samples.
std::vector<double> moving_average(const std::vector<double>& x, int window);

// Linear-interpolated quantile of the sample set; q in [0, 1].
double percentile(std::vector<double> v, double q);

struct MethodBand {
  std::string method;
  std::vector<double> steps;  // common grid
  std::vector<double> mean, lo, hi;
};

// Per-method seed aggregation of smoothed reward curves onto a common
// step grid. Exposed separately so the band arithmetic is testable
// without decoding an image.
std::vector<MethodBand> aggregate_curves(
    const std::map<std::string, std::vector<std::string>>& files_by_method,
    const PlotOptions& opts);

// Renders mean curves with percentile bands into a 24-bit BMP.
void plot_curves(
    const std::map<std::string, std::vector<std::string>>& files_by_method,
    const std::string& out_path, const PlotOptions& opts = {});

}  // namespace hallab::harness
