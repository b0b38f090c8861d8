#include "hallab/hindsight.hpp"

#include <stdexcept>

namespace hallab::hindsight {

double hallucination_prob(int64_t step, const HindsightConfig& cfg) {
  if (step < 0) throw std::invalid_argument("hallucination_prob: negative step");
  if (cfg.anneal_span <= 0 || step >= cfg.anneal_span) return cfg.p_end;
  const double f = static_cast<double>(step) / cfg.anneal_span;
  return cfg.p_start + f * (cfg.p_end - cfg.p_start);
}

double reassign_reward(const geometry::Pose& pose_next,
                       const geometry::Pose& goal_pose, double pos_tol,
                       double yaw_tol) {
  return geometry::config_close(pose_next, goal_pose, pos_tol, yaw_tol) ? 1.0
                                                                        : 0.0;
}

Relabeler::Relabeler(HindsightConfig cfg, halgan::HalganModel* model,
                     const worlds::World* oracle_world)
    : cfg_(cfg), model_(model), oracle_world_(oracle_world) {
  if (cfg_.mode == Hallucinator::halgan && model_ == nullptr) {
    throw std::invalid_argument("Relabeler: halgan mode needs a model");
  }
  if (cfg_.mode == Hallucinator::oracle && oracle_world_ == nullptr) {
    throw std::invalid_argument("Relabeler: oracle mode needs a world");
  }
  if (cfg_.d_max < 0) throw std::invalid_argument("Relabeler: negative d_max");
}

void Relabeler::relabel_minibatch(std::vector<replay::SampledTransition>& batch,
                                  const replay::ReplayBuffer& buffer, double p,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> ud(0, cfg_.d_max);
  for (auto& e : batch) {
    if (!buffer.contains_episode(e.ref.episode_id)) {
      ++skipped_;
      continue;
    }
    if (!buffer.is_closed(e.ref.episode_id)) continue;  // outcome unknown yet
    if (!buffer.is_failed(e.ref.episode_id)) continue;
    // Always draw both so the rng stream doesn't depend on p.
    const double c = coin(rng);
    const int d = ud(rng);
    if (c >= p) continue;

    const replay::Transition& goal = buffer.future_state(e.ref, d);
    const geometry::Pose& goal_pose = goal.pose;  // d=0 means the goal is pose_i

    if (cfg_.mode == Hallucinator::halgan) {
      const auto c0 = geometry::relative_config(e.t.pose, goal_pose);
      const auto c1 = geometry::relative_config(e.t.pose_next, goal_pose);
      const int cd = model_->config_dim;
      torch::Tensor configs = torch::empty({2, cd}, torch::kFloat32);
      auto a = configs.accessor<float, 2>();
      a[0][0] = static_cast<float>(c0.forward);
      a[0][1] = static_cast<float>(c0.lateral);
      a[0][2] = static_cast<float>(c0.dyaw);
      a[1][0] = static_cast<float>(c1.forward);
      a[1][1] = static_cast<float>(c1.lateral);
      a[1][2] = static_cast<float>(c1.dyaw);
      if (cd >= 4) {
        a[0][3] = c0.held.value_or(false) ? 1.0f : 0.0f;
        a[1][3] = c1.held.value_or(false) ? 1.0f : 0.0f;
      }
      // One latent shared between the two frames of the pair.
      torch::Tensor latent = halgan::sample_latent(1).repeat({2, 1});
      torch::Tensor states = torch::stack({e.t.s, e.t.s_next});
      torch::Tensor out;
      {
        torch::NoGradGuard ng;
        out = halgan::hallucinate(*model_, states, configs, latent);
      }
      e.t.s = out[0];
      e.t.s_next = out[1];
    } else if (cfg_.mode == Hallucinator::oracle) {
      e.t.s = oracle_world_->render_with_goal(e.t.pose, goal_pose);
      e.t.s_next = oracle_world_->render_with_goal(e.t.pose_next, goal_pose);
    }

    e.t.r = reassign_reward(e.t.pose_next, goal_pose, cfg_.pos_tol,
                            cfg_.yaw_tol);
    if (cfg_.success_terminal && e.t.r >= 0.5) e.t.terminal = true;
  }
}

}  // namespace hallab::hindsight
