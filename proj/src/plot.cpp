#include "hallab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hallab/metrics.hpp"

namespace hallab::harness {

std::vector<double> moving_average(const std::vector<double>& x, int window) {
  if (window <= 0) throw std::invalid_argument("moving_average: bad window");
  std::vector<double> out(x.size());
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= static_cast<size_t>(window)) acc -= x[i - window];
    const size_t n = std::min(i + 1, static_cast<size_t>(window));
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile: bad q");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = static_cast<size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

namespace {

double interp_at(const std::vector<double>& xs, const std::vector<double>& ys,
                 double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const size_t j = static_cast<size_t>(it - xs.begin());
  const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

// ---- minimal raster canvas ------------------------------------------------

struct Rgb {
  uint8_t r, g, b;
};

struct Canvas {
  int w, h;
  std::vector<Rgb> px;

  Canvas(int width, int height) : w(width), h(height), px(width * height) {
    std::fill(px.begin(), px.end(), Rgb{255, 255, 255});
  }

  void put(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    px[y * w + x] = c;
  }

  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      put(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void vspan(int x, int y0, int y1, Rgb c) {
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) put(x, y, c);
  }

  void save_bmp(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    const int row = (w * 3 + 3) & ~3;
    const uint32_t data = static_cast<uint32_t>(row) * h;
    uint8_t hdr[54] = {};
    hdr[0] = 'B'; hdr[1] = 'M';
    const uint32_t size = 54 + data;
    std::memcpy(hdr + 2, &size, 4);
    const uint32_t off = 54;
    std::memcpy(hdr + 10, &off, 4);
    const uint32_t ih = 40;
    std::memcpy(hdr + 14, &ih, 4);
    std::memcpy(hdr + 18, &w, 4);
    std::memcpy(hdr + 22, &h, 4);
    hdr[26] = 1; hdr[28] = 24;
    std::memcpy(hdr + 34, &data, 4);
    out.write(reinterpret_cast<const char*>(hdr), 54);
    std::vector<uint8_t> rowbuf(row, 0);
    for (int y = h - 1; y >= 0; --y) {
      for (int x = 0; x < w; ++x) {
        const Rgb& c = px[y * w + x];
        rowbuf[x * 3 + 0] = c.b;
        rowbuf[x * 3 + 1] = c.g;
        rowbuf[x * 3 + 2] = c.r;
      }
      out.write(reinterpret_cast<const char*>(rowbuf.data()), row);
    }
  }
};

// 5x7 bitmap glyphs, rows top to bottom, bit 4 = leftmost column.
const uint8_t* glyph(char c) {
  static const uint8_t digits[10][7] = {
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}};
  static const uint8_t lower[26][7] = {
      {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}, {0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x1E},
      {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}, {0x01, 0x01, 0x0F, 0x11, 0x11, 0x11, 0x0F},
      {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}, {0x06, 0x08, 0x1C, 0x08, 0x08, 0x08, 0x08},
      {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}, {0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x11},
      {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}, {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C},
      {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}, {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},
      {0x00, 0x00, 0x1A, 0x15, 0x15, 0x15, 0x15}, {0x00, 0x00, 0x1E, 0x11, 0x11, 0x11, 0x11},
      {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}, {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10},
      {0x00, 0x00, 0x0F, 0x11, 0x0F, 0x01, 0x01}, {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10},
      {0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E}, {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06},
      {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}, {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04},
      {0x00, 0x00, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11},
      {0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E}, {0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F}};
  static const uint8_t minus[7] = {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00};
  static const uint8_t under[7] = {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F};
  static const uint8_t dot[7] = {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C};
  static const uint8_t plus[7] = {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00};
  static const uint8_t lparen[7] = {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02};
  static const uint8_t rparen[7] = {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08};
  static const uint8_t blank[7] = {};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c >= 'a' && c <= 'z') return lower[c - 'a'];
  if (c >= 'A' && c <= 'Z') return lower[c - 'A'];
  switch (c) {
    case '-': return minus;
    case '_': return under;
    case '.': return dot;
    case '+': return plus;
    case '(': return lparen;
    case ')': return rparen;
    default: return blank;
  }
}

void draw_text(Canvas& cv, int x, int y, const std::string& s, Rgb c) {
  for (char ch : s) {
    const uint8_t* g = glyph(ch);
    for (int r = 0; r < 7; ++r) {
      for (int col = 0; col < 5; ++col) {
        if (g[r] & (1 << (4 - col))) cv.put(x + col, y + r, c);
      }
    }
    x += 6;
  }
}

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Rgb blend_white(Rgb c, double keep) {
  auto mix = [&](uint8_t x) {
    return static_cast<uint8_t>(x * keep + 255.0 * (1.0 - keep));
  };
  return {mix(c.r), mix(c.g), mix(c.b)};
}

}  // namespace

std::vector<MethodBand> aggregate_curves(
    const std::map<std::string, std::vector<std::string>>& files_by_method,
    const PlotOptions& opts) {
  if (files_by_method.empty()) {
    throw std::invalid_argument("plot: no metrics files given");
  }
  struct Curve {
    std::vector<double> steps, reward;
  };
  std::map<std::string, std::vector<Curve>> curves;
  double max_step = 0.0;
  for (const auto& [method, files] : files_by_method) {
    if (files.empty()) {
      throw std::invalid_argument("plot: method " + method + " has no files");
    }
    for (const auto& path : files) {
      MetricsFile f = MetricsFile::read(path);
      if (f.rows.empty()) {
        throw std::invalid_argument("plot: empty metrics file " + path);
      }
      Curve c;
      std::vector<double> raw;
      for (const auto& r : f.rows) {
        c.steps.push_back(static_cast<double>(r.step));
        raw.push_back(r.episodic_reward);
      }
      c.reward = moving_average(raw, opts.window);
      max_step = std::max(max_step, c.steps.back());
      curves[method].push_back(std::move(c));
    }
  }
  std::vector<MethodBand> bands;
  for (const auto& [method, cs] : curves) {
    MethodBand b;
    b.method = method;
    for (int i = 0; i < opts.grid_points; ++i) {
      const double t =
          max_step * static_cast<double>(i) / (opts.grid_points - 1);
      std::vector<double> at;
      for (const auto& c : cs) at.push_back(interp_at(c.steps, c.reward, t));
      double mean = 0.0;
      for (double v : at) mean += v;
      mean /= static_cast<double>(at.size());
      b.steps.push_back(t);
      b.mean.push_back(mean);
      b.lo.push_back(percentile(at, opts.band_lo));
      b.hi.push_back(percentile(at, opts.band_hi));
    }
    bands.push_back(std::move(b));
  }
  return bands;
}

void plot_curves(
    const std::map<std::string, std::vector<std::string>>& files_by_method,
    const std::string& out_path, const PlotOptions& opts) {
  const auto bands = aggregate_curves(files_by_method, opts);

  double ymin = 1e300, ymax = -1e300;
  for (const auto& b : bands) {
    for (size_t i = 0; i < b.steps.size(); ++i) {
      ymin = std::min({ymin, b.lo[i]});
      ymax = std::max({ymax, b.hi[i]});
    }
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double xmax = bands.front().steps.back();

  Canvas cv(opts.width, opts.height);
  const int ml = 70, mr = 20, mt = 30, mb = 45;
  const int px0 = ml, px1 = opts.width - mr;
  const int py0 = mt, py1 = opts.height - mb;
  auto sx = [&](double x) {
    return px0 + static_cast<int>((px1 - px0) * (xmax > 0 ? x / xmax : 0.0));
  };
  auto sy = [&](double y) {
    return py1 - static_cast<int>((py1 - py0) * (y - ymin) / (ymax - ymin));
  };

  const Rgb axis{60, 60, 60};
  const Rgb gridc{225, 225, 225};
  static const Rgb palette[] = {{214, 39, 40},  {31, 119, 180}, {44, 160, 44},
                                {255, 127, 14}, {148, 103, 189}, {140, 86, 75}};
  const int npal = 6;

  for (int i = 0; i <= 5; ++i) {
    const double xv = xmax * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    cv.line(sx(xv), py0, sx(xv), py1, gridc);
    cv.line(px0, sy(yv), px1, sy(yv), gridc);
  }

  int pi = 0;
  for (const auto& b : bands) {
    const Rgb c = palette[pi % npal];
    const Rgb band = blend_white(c, 0.25);
    for (size_t i = 0; i < b.steps.size(); ++i) {
      cv.vspan(sx(b.steps[i]), sy(b.lo[i]), sy(b.hi[i]), band);
    }
    ++pi;
  }
  pi = 0;
  for (const auto& b : bands) {
    const Rgb c = palette[pi % npal];
    for (size_t i = 1; i < b.steps.size(); ++i) {
      cv.line(sx(b.steps[i - 1]), sy(b.mean[i - 1]), sx(b.steps[i]),
              sy(b.mean[i]), c);
    }
    ++pi;
  }

  cv.line(px0, py0, px0, py1, axis);
  cv.line(px0, py1, px1, py1, axis);
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmax * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    draw_text(cv, sx(xv) - 12, py1 + 6, num_label(xv), axis);
    draw_text(cv, 6, sy(yv) - 3, num_label(yv), axis);
  }
  draw_text(cv, px0, 10,
            opts.title + "  (window " + std::to_string(opts.window) + ")",
            axis);
  draw_text(cv, px1 - 90, py1 + 20, "env steps", axis);

  int ly = py0 + 8;
  pi = 0;
  for (const auto& b : bands) {
    const Rgb c = palette[pi % npal];
    for (int dx = 0; dx < 14; ++dx) {
      for (int dy = 0; dy < 7; ++dy) cv.put(px0 + 10 + dx, ly + dy, c);
    }
    draw_text(cv, px0 + 30, ly, b.method, axis);
    ly += 14;
    ++pi;
  }

  cv.save_bmp(out_path);
}

}  // namespace hallab::harness
