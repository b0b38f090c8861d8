#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hallab/config.hpp"
#include "hallab/harness.hpp"
#include "hallab/metrics.hpp"
#include "hallab/plot.hpp"

using namespace hallab;
using namespace hallab::harness;

namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) {
  return fs::temp_directory_path() / name;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes a synthetic metrics CSV with a fixed per-episode reward function.
std::string write_metrics(const std::string& name, int episodes, int ep_len,
                          double (*reward)(int)) {
  const std::string path = tmp_file(name).string();
  MetricsWriter w(path);
  for (int i = 0; i < episodes; ++i) {
    MetricsRow r;
    r.step = static_cast<int64_t>(i + 1) * ep_len;
    r.episode = i;
    r.episodic_reward = reward(i);
    w.write(r);
  }
  return path;
}

ExperimentConfig tiny_cfg(const std::string& out_dir, uint64_t seed) {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.set("world.image_size", "16");
  c.set("world.max_steps", "25");
  c.set("run.method", "vanilla");
  c.set("run.total_steps", "260");
  c.set("run.warmup", "60");
  c.set("run.replay_capacity", "500");
  c.set("run.train_every", "8");
  c.set("run.eval_every", "130");
  c.set("run.eval_episodes", "2");
  c.set("run.seed", std::to_string(seed));
  c.set("run.out_dir", out_dir);
  return c;
}

}  // namespace

TEST_CASE("config profiles carry the intended defaults") {
  ExperimentConfig desk = ExperimentConfig::defaults();
  CHECK(desk.get("profile") == "desk");
  CHECK(desk.get_int("world.image_size") == 32);
  CHECK(desk.get_int("run.total_steps") == 150000);
  CHECK(desk.get_int("run.warmup") == 2000);
  CHECK(desk.get_double("agent.gamma") == 0.99);
  CHECK(desk.seeds().size() == 5);
  CHECK(desk.seeds()[0] == 75839);

  ExperimentConfig paper = ExperimentConfig::defaults("paper");
  CHECK(paper.get_int("world.image_size") == 64);
  CHECK(paper.get_int("run.total_steps") == 1000000);
  CHECK(paper.get_int("run.warmup") == 10000);
  CHECK(paper.get_int("run.replay_capacity") == 100000);
  CHECK_THROWS_AS(ExperimentConfig::defaults("huge"), std::invalid_argument);
}

TEST_CASE("bare suffixes resolve; unknown keys list the valid set") {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.set("gamma", "0.95");
  CHECK(c.get_double("agent.gamma") == 0.95);
  CHECK(c.get_double("gamma") == 0.95);
  CHECK_THROWS_AS(c.set("girth", "3"), std::invalid_argument);
  try {
    c.get("girth");
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("agent.gamma") != std::string::npos);
    CHECK(msg.find("run.total_steps") != std::string::npos);
  }
}

TEST_CASE("typed getters validate their whole string") {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.set("agent.gamma", "0.9x");
  CHECK_THROWS_AS(c.get_double("agent.gamma"), std::invalid_argument);
  c.set("run.total_steps", "10k");
  CHECK_THROWS_AS(c.get_int("run.total_steps"), std::invalid_argument);
  c.set("hindsight.success_terminal", "maybe");
  CHECK_THROWS_AS(c.get_bool("hindsight.success_terminal"),
                  std::invalid_argument);
}

TEST_CASE("config files round-trip through save_resolved") {
  const std::string p1 = tmp_file("hallab_cfg1.txt").string();
  {
    std::ofstream out(p1);
    out << "# a comment\n"
        << "profile = paper\n"
        << "gamma = 0.9   # trailing comment\n"
        << "run.total_steps = 1234\n";
  }
  ExperimentConfig c = ExperimentConfig::from_file(p1);
  CHECK(c.get("profile") == "paper");
  CHECK(c.get_int("world.image_size") == 64);  // from the paper profile
  CHECK(c.get_double("agent.gamma") == 0.9);
  CHECK(c.get_int("run.total_steps") == 1234);

  const std::string p2 = tmp_file("hallab_cfg2.txt").string();
  c.save_resolved(p2);
  ExperimentConfig d = ExperimentConfig::from_file(p2);
  CHECK(d.entries() == c.entries());
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("malformed config lines are rejected with a location") {
  const std::string p = tmp_file("hallab_cfg_bad.txt").string();
  {
    std::ofstream out(p);
    out << "gamma 0.9\n";
  }
  CHECK_THROWS_AS(ExperimentConfig::from_file(p), std::invalid_argument);
  std::remove(p.c_str());
  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/cfg"),
                  std::invalid_argument);
}

TEST_CASE("method names and artifact validation") {
  CHECK(method_from_name("vae-her") == Method::vae_her);
  CHECK(method_from_name("rig-") == Method::rig);
  CHECK(method_name(Method::vae_her) == "vae_her");
  CHECK_THROWS_AS(method_from_name("sac"), std::invalid_argument);

  ExperimentConfig c = ExperimentConfig::defaults();
  CHECK_NOTHROW(c.validate_artifacts());  // vanilla needs nothing
  c.set("run.method", "halgan");
  CHECK_THROWS_AS(c.validate_artifacts(), std::invalid_argument);
  c.set("paths.gan_checkpoint", "/no/such/checkpoint.bin");
  CHECK_THROWS_AS(c.validate_artifacts(), std::invalid_argument);
  c.set("run.method", "rig");
  CHECK_THROWS_AS(c.validate_artifacts(), std::invalid_argument);
}

TEST_CASE("metrics writer enforces schema and step monotonicity") {
  const std::string p = tmp_file("hallab_metrics_a.csv").string();
  {
    MetricsWriter w(p);
    MetricsRow r;
    r.step = 10;
    r.episodic_reward = 0.5;
    w.write(r);
    CHECK_THROWS_AS(w.write(r), std::logic_error);  // same step again
    r.step = 11;
    w.write(r);
  }
  MetricsFile f = MetricsFile::read(p);
  CHECK(f.schema == kMetricsSchema);
  REQUIRE(f.rows.size() == 2);
  CHECK(f.rows[0].step == 10);
  CHECK(f.rows[0].episodic_reward == 0.5);
  std::remove(p.c_str());
}

TEST_CASE("metrics reader rejects foreign schemas and corrupt rows") {
  const std::string p = tmp_file("hallab_metrics_b.csv").string();
  {
    std::ofstream out(p);
    out << "# schema: somebody-elses-v9\nstep\n";
  }
  CHECK_THROWS_AS(MetricsFile::read(p), std::invalid_argument);
  {
    std::ofstream out(p);
    out << "# schema: " << kMetricsSchema
        << "\nstep,episode,episodic_reward,success,epsilon,hallucination_p,seed\n"
        << "5,0,1,0,1,0.2\n";  // six cells
  }
  CHECK_THROWS_AS(MetricsFile::read(p), std::invalid_argument);
  std::remove(p.c_str());
  CHECK_THROWS_AS(MetricsFile::read("/no/such/metrics.csv"),
                  std::invalid_argument);
}

TEST_CASE("moving_average matches a by-hand oracle") {
  std::vector<double> x{1, 2, 3, 4};
  auto m = moving_average(x, 2);
  REQUIRE(m.size() == 4);
  CHECK(m[0] == 1.0);
  CHECK(m[1] == doctest::Approx(1.5));
  CHECK(m[2] == doctest::Approx(2.5));
  CHECK(m[3] == doctest::Approx(3.5));
  auto wide = moving_average(x, 100);  // window larger than the series
  CHECK(wide[3] == doctest::Approx(2.5));
  CHECK_THROWS_AS(moving_average(x, 0), std::invalid_argument);
}

TEST_CASE("percentile matches linear interpolation by hand") {
  std::vector<double> v{4, 1, 3, 2};  // sorted: 1 2 3 4
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);
  CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
  CHECK(percentile(v, 0.25) == doctest::Approx(1.75));
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(percentile(v, 1.5), std::invalid_argument);
}

TEST_CASE("aggregate_curves: single seed collapses the band onto the mean") {
  const std::string p = write_metrics("hallab_curve1.csv", 40, 10,
                                      [](int i) { return 0.1 * i; });
  PlotOptions opts;
  opts.window = 5;
  opts.grid_points = 20;
  auto bands = aggregate_curves({{"her", {p}}}, opts);
  REQUIRE(bands.size() == 1);
  CHECK(bands[0].method == "her");
  REQUIRE(bands[0].steps.size() == 20);
  for (size_t i = 0; i < bands[0].steps.size(); ++i) {
    CHECK(bands[0].lo[i] == doctest::Approx(bands[0].mean[i]));
    CHECK(bands[0].hi[i] == doctest::Approx(bands[0].mean[i]));
  }
  std::remove(p.c_str());
}

TEST_CASE("aggregate_curves: constant reward yields a flat line at its value") {
  const std::string a = write_metrics("hallab_curve2a.csv", 30, 10,
                                      [](int) { return 2.0; });
  const std::string b = write_metrics("hallab_curve2b.csv", 50, 7,
                                      [](int) { return 2.0; });
  PlotOptions opts;
  opts.window = 4;
  opts.grid_points = 15;
  auto bands = aggregate_curves({{"vanilla", {a, b}}}, opts);
  REQUIRE(bands.size() == 1);
  for (double m : bands[0].mean) CHECK(m == doctest::Approx(2.0));
  for (double l : bands[0].lo) CHECK(l == doctest::Approx(2.0));
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("aggregate_curves: band brackets the mean and separates methods") {
  const std::string lo = write_metrics("hallab_curve3a.csv", 40, 10,
                                       [](int) { return 0.0; });
  const std::string hi = write_metrics("hallab_curve3b.csv", 40, 10,
                                       [](int) { return 1.0; });
  const std::string other = write_metrics("hallab_curve3c.csv", 40, 10,
                                          [](int) { return 5.0; });
  PlotOptions opts;
  opts.window = 3;
  opts.grid_points = 10;
  auto bands = aggregate_curves({{"her", {lo, hi}}, {"halgan", {other}}}, opts);
  REQUIRE(bands.size() == 2);
  for (const auto& band : bands) {
    for (size_t i = 0; i < band.steps.size(); ++i) {
      CHECK(band.lo[i] <= band.mean[i] + 1e-12);
      CHECK(band.hi[i] >= band.mean[i] - 1e-12);
    }
  }
  // The two methods keep their own levels.
  const auto& halgan_band =
      bands[0].method == "halgan" ? bands[0] : bands[1];
  const auto& her_band = bands[0].method == "halgan" ? bands[1] : bands[0];
  CHECK(halgan_band.mean.back() == doctest::Approx(5.0));
  CHECK(her_band.mean.back() == doctest::Approx(0.5));
  std::remove(lo.c_str());
  std::remove(hi.c_str());
  std::remove(other.c_str());
  CHECK_THROWS_AS(aggregate_curves({}, opts), std::invalid_argument);
}

TEST_CASE("plot_curves writes a parseable BMP") {
  const std::string p = write_metrics("hallab_curve4.csv", 30, 10,
                                      [](int i) { return std::sin(0.3 * i); });
  const std::string img = tmp_file("hallab_plot_test.bmp").string();
  PlotOptions opts;
  opts.width = 320;
  opts.height = 200;
  plot_curves({{"her", {p}}}, img, opts);
  std::ifstream in(img, std::ios::binary);
  REQUIRE(in.good());
  char magic[2];
  in.read(magic, 2);
  CHECK(magic[0] == 'B');
  CHECK(magic[1] == 'M');
  const auto bytes = fs::file_size(img);
  CHECK(bytes == 54 + 320 * 200 * 3);  // header + 24-bit rows, width%4==0
  std::remove(p.c_str());
  std::remove(img.c_str());
}

TEST_CASE("evaluate rejects a non-positive episode count") {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.set("world.image_size", "16");
  worlds::World w(c.world());
  auto agent = agents::make_agent(c.agent());
  CHECK_THROWS_AS(evaluate(*agent, w, 0, 1), std::invalid_argument);
}

TEST_CASE("run_experiment: warmup-only run records exploration metrics") {
  const std::string out = (fs::temp_directory_path() / "hallab_run_w").string();
  fs::remove_all(out);
  ExperimentConfig c = tiny_cfg(out, 11798);
  c.set("run.total_steps", "60");  // equal to warmup: no agent updates
  c.set("run.eval_every", "60");
  const std::string mpath = run_experiment(c);
  MetricsFile f = MetricsFile::read(mpath);
  REQUIRE(!f.rows.empty());
  for (const auto& r : f.rows) {
    CHECK(r.epsilon == 1.0);  // schedule never left its start
    CHECK(r.seed == 11798);
  }
  CHECK(f.rows.back().step == 60);
  CHECK(fs::exists(out + "/config.resolved"));
  CHECK(fs::exists(out + "/eval.csv"));
  CHECK(fs::exists(out + "/agent.ckpt"));
  CHECK(fs::exists(out + "/run_info.txt"));
  fs::remove_all(out);
}

TEST_CASE("run_experiment is bitwise deterministic across reruns") {
  const std::string o1 = (fs::temp_directory_path() / "hallab_run_a").string();
  const std::string o2 = (fs::temp_directory_path() / "hallab_run_b").string();
  fs::remove_all(o1);
  fs::remove_all(o2);
  const std::string m1 = run_experiment(tiny_cfg(o1, 47040));
  const std::string m2 = run_experiment(tiny_cfg(o2, 47040));
  const std::string b1 = read_all(m1);
  const std::string b2 = read_all(m2);
  CHECK(!b1.empty());
  CHECK(b1 == b2);
  CHECK(read_all(o1 + "/eval.csv") == read_all(o2 + "/eval.csv"));
  // Different seeds diverge.
  const std::string o3 = (fs::temp_directory_path() / "hallab_run_c").string();
  fs::remove_all(o3);
  const std::string m3 = run_experiment(tiny_cfg(o3, 60489));
  CHECK(read_all(m3) != b1);
  fs::remove_all(o1);
  fs::remove_all(o2);
  fs::remove_all(o3);
}
