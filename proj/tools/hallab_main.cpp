// Command-line front end: dataset collection, model training, RL runs,
// evaluation, plotting and dataset-size sweeps.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "hallab/baselines.hpp"
#include "hallab/config.hpp"
#include "hallab/halgan.hpp"
#include "hallab/harness.hpp"
#include "hallab/hindsight.hpp"
#include "hallab/plot.hpp"
#include "hallab/worlds.hpp"

namespace {

using namespace hallab;

std::vector<std::pair<std::string, std::string>> parse_sets(
    const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--set", "expected key=value, got " + s);
    }
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

harness::ExperimentConfig load_config(const std::string& config_path,
                                      const std::vector<std::string>& sets) {
  harness::ExperimentConfig cfg =
      config_path.empty() ? harness::ExperimentConfig::defaults()
                          : harness::ExperimentConfig::from_file(config_path);
  for (const auto& [k, v] : parse_sets(sets)) cfg.set(k, v);
  return cfg;
}

worlds::World world_for(const harness::ExperimentConfig& cfg) {
  return worlds::World(cfg.world());
}

// Observations gathered from random-policy episodes that never succeeded;
// the goal-free raw material the generator paints goals onto.
torch::Tensor collect_failed_states(worlds::World& world, int n_states,
                                    uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ua(0, worlds::kNumDiscreteActions - 1);
  std::uniform_real_distribution<double> ur(-1.0, 1.0);
  const bool discrete =
      world.config().action_mode == worlds::ActionMode::discrete;
  std::vector<torch::Tensor> states;
  while (static_cast<int>(states.size()) < n_states) {
    worlds::Observation obs = world.reset(rng());
    std::vector<torch::Tensor> episode{obs.image};
    bool success = false, done = false;
    while (!done) {
      worlds::Action a;
      if (discrete) {
        a.a0 = ua(rng);
      } else {
        a.a0 = ur(rng);
        a.a1 = ur(rng);
      }
      worlds::StepResult sr = world.step(a);
      episode.push_back(sr.obs.image);
      success = success || sr.success;
      done = sr.done;
    }
    if (!success) {
      for (auto& s : episode) {
        if (static_cast<int>(states.size()) < n_states)
          states.push_back(std::move(s));
      }
    }
  }
  return torch::stack(states);
}

int cmd_collect(const std::string& config_path,
                const std::vector<std::string>& sets, int episodes, int tail,
                uint64_t seed, const std::string& out) {
  auto cfg = load_config(config_path, sets);
  worlds::World world = world_for(cfg);
  worlds::SnapshotDataset R =
      worlds::collect_goal_snapshots(world, episodes, tail, seed);
  R.save(out);
  std::cout << "collected " << R.items.size() << " snapshots -> " << out
            << "\n";
  return 0;
}

int cmd_train_gan(const std::string& config_path,
                  const std::vector<std::string>& sets,
                  const std::string& dataset, int subsample, int steps,
                  uint64_t seed, const std::string& out, int failed_states,
                  const std::string& critic_form, const std::string& metrics) {
  auto cfg = load_config(config_path, sets);
  worlds::SnapshotDataset R = worlds::SnapshotDataset::load(dataset);
  if (subsample > 0 && subsample < static_cast<int>(R.items.size())) {
    R = worlds::subsample_dataset(R, subsample, seed);
  }
  cfg.set("world.image_size", std::to_string(R.image_size));
  cfg.set("world.task", R.task);
  worlds::World world = world_for(cfg);
  torch::Tensor failed = collect_failed_states(world, failed_states, seed + 1);

  halgan::TrainConfig tc;
  tc.seed = seed;
  tc.metrics_path = metrics;
  tc.checkpoint_path = out;
  tc.checkpoint_every = std::max(1, steps / 4);
  if (critic_form == "log") {
    tc.critic_form = halgan::CriticLossForm::log_form;
  } else if (critic_form != "wasserstein") {
    throw CLI::ValidationError("--critic-form",
                               "expected wasserstein or log");
  }
  halgan::ConfigNormalizer norm;
  norm.pos_scale = cfg.get_double("world.room_size") / 2.0;
  halgan::HalganModel model = halgan::train(R, failed, steps, tc, norm);
  model.save(out);
  std::cout << "trained generator (" << steps << " updates) -> " << out
            << "\n";
  return 0;
}

int cmd_train_vae(const std::string& config_path,
                  const std::vector<std::string>& sets,
                  const std::string& dataset, int steps, uint64_t seed,
                  const std::string& out, int failed_states,
                  const std::string& metrics) {
  auto cfg = load_config(config_path, sets);
  worlds::SnapshotDataset R = worlds::SnapshotDataset::load(dataset);
  cfg.set("world.image_size", std::to_string(R.image_size));
  cfg.set("world.task", R.task);
  worlds::World world = world_for(cfg);
  torch::Tensor failed = collect_failed_states(world, failed_states, seed + 1);
  std::vector<torch::Tensor> imgs;
  for (const auto& item : R.items) imgs.push_back(item.image);
  torch::Tensor mixed = torch::cat({torch::stack(imgs), failed});
  baselines::VaeConfig vc;
  vc.seed = seed;
  vc.metrics_path = metrics;
  baselines::VaeModel model = baselines::train_beta_vae(mixed, steps, vc);
  model.save(out);
  std::cout << "trained vae (" << steps << " updates) -> " << out << "\n";
  return 0;
}

int cmd_train_rl(const std::string& config_path,
                 const std::vector<std::string>& sets,
                 const std::string& method, int64_t seed, int64_t steps,
                 const std::string& out) {
  auto cfg = load_config(config_path, sets);
  if (!method.empty()) cfg.set("run.method", method);
  if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
  if (steps >= 0) cfg.set("run.total_steps", std::to_string(steps));
  if (!out.empty()) cfg.set("run.out_dir", out);
  const std::string metrics = harness::run_experiment(cfg);
  std::cout << "run complete -> " << metrics << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path,
             const std::vector<std::string>& sets, const std::string& agent,
             int episodes, uint64_t seed) {
  auto cfg = load_config(config_path, sets);
  worlds::World world = world_for(cfg);
  std::unique_ptr<agents::Agent> a = agents::make_agent(cfg.agent());
  a->load(agent);
  harness::EvalResult r = harness::evaluate(*a, world, episodes, seed);
  std::cout << "success_rate " << r.success_rate << "\nmean_reward "
            << r.mean_reward << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out,
             int window) {
  std::map<std::string, std::vector<std::string>> by_method;
  for (const auto& dir : runs) {
    harness::ExperimentConfig cfg =
        harness::ExperimentConfig::from_file(dir + "/config.resolved");
    by_method[cfg.get("run.method")].push_back(dir + "/metrics.csv");
  }
  harness::PlotOptions opts;
  opts.window = window;
  harness::plot_curves(by_method, out, opts);
  std::cout << "plot -> " << out << "\n";
  return 0;
}

int cmd_sweep(const std::string& self, const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& dataset,
              const std::string& sizes_csv, int gan_steps, int64_t rl_steps,
              uint64_t seed, const std::string& out) {
  std::vector<int> sizes;
  std::stringstream ss(sizes_csv);
  std::string item;
  while (std::getline(ss, item, ',')) sizes.push_back(std::stoi(item));
  if (sizes.empty()) throw CLI::ValidationError("--sizes", "empty list");
  std::filesystem::create_directories(out);
  std::string passthrough;
  if (!config_path.empty()) passthrough += " --config " + config_path;
  for (const auto& s : sets) passthrough += " --set " + s;
  // One process per run so a crash in one size leaves the rest intact.
  for (int n : sizes) {
    const std::string tag = out + "/n" + std::to_string(n);
    std::string gan = self + " train-gan --dataset " + dataset +
                      " --subsample " + std::to_string(n) + " --steps " +
                      std::to_string(gan_steps) + " --seed " +
                      std::to_string(seed) + " --out " + tag + "_gan.ckpt" +
                      passthrough;
    std::cout << "[sweep] " << gan << "\n";
    if (std::system(gan.c_str()) != 0) return 1;
    std::string rl = self + " train-rl --method halgan --seed " +
                     std::to_string(seed) + " --out " + tag + "_run" +
                     " --set paths.gan_checkpoint=" + tag + "_gan.ckpt" +
                     (rl_steps >= 0
                          ? " --steps " + std::to_string(rl_steps)
                          : "") +
                     passthrough;
    std::cout << "[sweep] " << rl << "\n";
    if (std::system(rl.c_str()) != 0) return 1;
  }
  std::cout << "sweep complete -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"goal-hallucination RL lab"};
  app.require_subcommand(1);

  std::string config_path, out, method, dataset, agent_path, critic_form =
      "wasserstein";
  std::string metrics, sizes = "1000,2000,6840";
  std::vector<std::string> sets, runs;
  int episodes = 400, tail = 16, window = 100, failed_states = 1024;
  int subsample = 0, gan_steps = 2000;
  int64_t seed = 75839, steps = -1, rl_steps = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--set", sets, "override, repeatable: --set key=value");
    sub->add_option("--seed", seed, "rng seed");
  };

  auto* collect = app.add_subcommand("collect", "gather near-goal snapshots");
  add_common(collect);
  collect->add_option("--episodes", episodes, "scripted rollouts to attempt");
  collect->add_option("--tail", tail, "snapshots kept per success (16 or 32)");
  collect->add_option("--out", out, "output dataset path")->required();

  auto* tgan = app.add_subcommand("train-gan", "train the hallucination model");
  add_common(tgan);
  tgan->add_option("--dataset", dataset, "snapshot dataset")->required();
  tgan->add_option("--subsample", subsample, "restrict dataset to n items");
  tgan->add_option("--steps", gan_steps, "generator updates");
  tgan->add_option("--failed-states", failed_states,
                   "random-policy states to collect");
  tgan->add_option("--critic-form", critic_form, "wasserstein|log");
  tgan->add_option("--metrics", metrics, "loss CSV path");
  tgan->add_option("--out", out, "checkpoint path")->required();

  auto* tvae = app.add_subcommand("train-vae", "train the embedding VAE");
  add_common(tvae);
  tvae->add_option("--dataset", dataset, "snapshot dataset")->required();
  tvae->add_option("--steps", gan_steps, "optimizer updates");
  tvae->add_option("--failed-states", failed_states,
                   "random-policy states to mix in");
  tvae->add_option("--metrics", metrics, "loss CSV path");
  tvae->add_option("--out", out, "checkpoint path")->required();

  auto* trl = app.add_subcommand("train-rl", "run a seeded RL experiment");
  add_common(trl);
  trl->add_option("--method", method,
                  "halgan|oracle|her|vae_her|rig|vanilla");
  trl->add_option("--steps", steps, "total env steps");
  trl->add_option("--out", out, "run directory");

  auto* ev = app.add_subcommand("eval", "evaluate an agent checkpoint");
  add_common(ev);
  ev->add_option("--agent", agent_path, "agent checkpoint")->required();
  ev->add_option("--episodes", episodes, "eval episodes");

  auto* pl = app.add_subcommand("plot", "reward curves with 90% bands");
  pl->add_option("--runs", runs, "run directories")->required();
  pl->add_option("--window", window, "moving-average span");
  pl->add_option("--out", out, "output image (bmp)")->required();

  auto* sw = app.add_subcommand("sweep-dataset",
                                "GAN+RL runs over dataset sizes");
  add_common(sw);
  sw->add_option("--dataset", dataset, "full snapshot dataset")->required();
  sw->add_option("--sizes", sizes, "comma list of dataset sizes");
  sw->add_option("--gan-steps", gan_steps, "generator updates per size");
  sw->add_option("--rl-steps", rl_steps, "env steps per RL run");
  sw->add_option("--out", out, "sweep output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed())
      return cmd_collect(config_path, sets, episodes, tail, seed, out);
    if (tgan->parsed())
      return cmd_train_gan(config_path, sets, dataset, subsample, gan_steps,
                           seed, out, failed_states, critic_form, metrics);
    if (tvae->parsed())
      return cmd_train_vae(config_path, sets, dataset, gan_steps, seed, out,
                           failed_states, metrics);
    if (trl->parsed())
      return cmd_train_rl(config_path, sets, method, seed, steps, out);
    if (ev->parsed())
      return cmd_eval(config_path, sets, agent_path, episodes, seed);
    if (pl->parsed()) return cmd_plot(runs, out, window);
    if (sw->parsed())
      return cmd_sweep(argv[0], config_path, sets, dataset, sizes, gan_steps,
                       rl_steps, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
