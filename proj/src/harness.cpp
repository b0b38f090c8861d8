#include "hallab/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>

#include "hallab/baselines.hpp"
#include "hallab/halgan.hpp"
#include "hallab/hindsight.hpp"
#include "hallab/metrics.hpp"
#include "hallab/replay.hpp"

namespace hallab::harness {

EvalResult evaluate(agents::Agent& agent, worlds::World& world, int n_episodes,
                    uint64_t seed) {
  if (n_episodes <= 0) {
    throw std::invalid_argument("evaluate: n_episodes must be positive");
  }
  std::mt19937_64 rng(seed);
  int successes = 0;
  double total_reward = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    worlds::Observation obs = world.reset(rng());
    bool done = false;
    bool success = false;
    while (!done) {
      worlds::Action a = agent.act(obs.image, 0.0, rng);
      worlds::StepResult sr = world.step(a);
      total_reward += sr.reward;
      success = success || sr.success;
      done = sr.done;
      obs = sr.obs;
    }
    if (success) ++successes;
  }
  return {static_cast<double>(successes) / n_episodes,
          total_reward / n_episodes};
}

namespace {

worlds::Action random_action(const worlds::WorldConfig& wcfg,
                             std::mt19937_64& rng) {
  worlds::Action a;
  if (wcfg.action_mode == worlds::ActionMode::discrete) {
    std::uniform_int_distribution<int> ua(0, worlds::kNumDiscreteActions - 1);
    a.a0 = ua(rng);
  } else {
    std::uniform_real_distribution<double> ur(-1.0, 1.0);
    a.a0 = ur(rng);
    a.a1 = ur(rng);
  }
  return a;
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg) {
  cfg.validate_artifacts();
  const Method method = cfg.method();
  const uint64_t seed = static_cast<uint64_t>(cfg.get_int("run.seed"));

  std::string out_dir = cfg.get("run.out_dir");
  if (out_dir.empty()) {
    out_dir = default_out_root() + "/" + method_name(method) + "_s" +
              std::to_string(seed);
  }
  std::filesystem::create_directories(out_dir);
  {
    ExperimentConfig resolved = cfg;
    resolved.set("run.out_dir", out_dir);
    resolved.save_resolved(out_dir + "/config.resolved");
  }

  const auto t_start = std::chrono::steady_clock::now();
  torch::set_num_threads(1);
  torch::manual_seed(seed);

  const worlds::WorldConfig wcfg = cfg.world();
  worlds::World world(wcfg);
  worlds::World eval_world(wcfg);
  std::unique_ptr<agents::Agent> agent = agents::make_agent(cfg.agent());
  const agents::AgentConfig acfg = cfg.agent();

  const int64_t total_steps = cfg.get_int("run.total_steps");
  const int64_t warmup = cfg.get_int("run.warmup");
  const int64_t train_every = std::max<int64_t>(1, cfg.get_int("run.train_every"));
  const int64_t eval_every = cfg.get_int("run.eval_every");
  const int eval_episodes = static_cast<int>(cfg.get_int("run.eval_episodes"));
  const int batch_size = acfg.batch_size;

  replay::ReplayBuffer buffer(
      static_cast<size_t>(cfg.get_int("run.replay_capacity")),
      static_cast<size_t>(warmup));

  hindsight::HindsightConfig hcfg = cfg.hindsight();

  // Method-specific relabeling machinery, loaded before any steps run.
  std::optional<halgan::HalganModel> gan;
  std::optional<baselines::VaeModel> vae;
  torch::Tensor rig_goal_images;
  std::optional<hindsight::Relabeler> relabeler;
  if (method == Method::halgan) {
    gan = halgan::HalganModel::load(cfg.get("paths.gan_checkpoint"));
    hcfg.mode = hindsight::Hallucinator::halgan;
    relabeler.emplace(hcfg, &*gan, nullptr);
  } else if (method == Method::oracle) {
    hcfg.mode = hindsight::Hallucinator::oracle;
    relabeler.emplace(hcfg, nullptr, &world);
  } else if (method == Method::vae_her || method == Method::rig) {
    vae = baselines::VaeModel::load(cfg.get("paths.vae_checkpoint"));
    if (method == Method::rig) {
      worlds::SnapshotDataset R =
          worlds::SnapshotDataset::load(cfg.get("paths.dataset"));
      std::vector<torch::Tensor> imgs;
      for (const auto& item : R.items) imgs.push_back(item.image);
      rig_goal_images = torch::stack(imgs);
    }
  }
  const baselines::RelabelThresholds thresholds{hcfg.d_max, hcfg.pos_tol,
                                                hcfg.yaw_tol};

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  MetricsWriter metrics(out_dir + "/metrics.csv");
  std::ofstream eval_out(out_dir + "/eval.csv");
  eval_out << "step,success_rate,mean_reward\n";

  int64_t global_step = 0;
  int64_t episode = 0;
  double eps = acfg.eps_start;
  double p = hcfg.p_start;

  while (global_step < total_steps) {
    worlds::Observation obs = world.reset(rng());
    double ep_reward = 0.0;
    bool ep_success = false;
    int step_index = 0;
    bool done = false;
    while (!done && global_step < total_steps) {
      worlds::Action a;
      if (global_step < warmup) {
        a = random_action(wcfg, rng);
        eps = acfg.eps_start;
      } else {
        eps = agents::epsilon(global_step - warmup, acfg);
        a = agent->act(obs.image, eps, rng);
      }
      worlds::StepResult sr = world.step(a);
      replay::Transition t;
      t.s = obs.image;
      t.a = a;
      t.r = sr.reward;
      t.s_next = sr.obs.image;  // shared handle with the next step's t.s
      t.pose = obs.pose;
      t.pose_next = sr.obs.pose;
      t.episode_id = episode;
      t.step_index = step_index;
      t.terminal = sr.done;
      buffer.append(t);
      ep_reward += sr.reward;
      ep_success = ep_success || sr.success;
      done = sr.done;
      obs = sr.obs;
      ++step_index;
      ++global_step;

      if (global_step >= warmup && buffer.warmed_up() &&
          global_step % train_every == 0) {
        p = hindsight::hallucination_prob(global_step - warmup, hcfg);
        auto refs = buffer.sample_minibatch(batch_size, rng);
        auto batch = replay::materialize(buffer, refs);
        switch (method) {
          case Method::halgan:
          case Method::oracle:
            relabeler->relabel_minibatch(batch, buffer, p, rng);
            break;
          case Method::her:
            baselines::naive_her_relabel(batch, buffer, p, thresholds, rng);
            break;
          case Method::vae_her:
            baselines::vae_her_relabel(batch, buffer, *vae, p, rng);
            break;
          case Method::rig:
            baselines::rig_relabel(batch, rig_goal_images, *vae, 1.0, rng);
            break;
          case Method::vanilla:
            break;
        }
        agent->update(batch);
      }

      if (eval_every > 0 && global_step % eval_every == 0) {
        EvalResult r = evaluate(*agent, eval_world, eval_episodes,
                                seed * 1000003ull + global_step);
        eval_out << global_step << ',' << r.success_rate << ','
                 << r.mean_reward << '\n';
        eval_out.flush();
        agent->save(out_dir + "/agent.ckpt");
      }
    }
    MetricsRow row;
    row.step = global_step;
    row.episode = episode;
    row.episodic_reward = ep_reward;
    row.success = ep_success;
    row.epsilon = eps;
    row.hallucination_p = p;
    row.seed = seed;
    metrics.write(row);
    ++episode;
  }

  if (eval_every > 0 && total_steps % eval_every != 0) {
    EvalResult r = evaluate(*agent, eval_world, eval_episodes,
                            seed * 1000003ull + total_steps);
    eval_out << total_steps << ',' << r.success_rate << ',' << r.mean_reward
             << '\n';
  }
  agent->save(out_dir + "/agent.ckpt");

  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  std::ofstream info(out_dir + "/run_info.txt");
  info << "wall_time_s " << wall_s << "\n"
       << "env_steps " << global_step << "\n"
       << "episodes " << episode << "\n";
  return out_dir + "/metrics.csv";
}

}  // namespace hallab::harness
