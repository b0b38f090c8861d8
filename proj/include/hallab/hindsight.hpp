#pragma once

#include <random>
#include <vector>

#include "hallab/halgan.hpp"
#include "hallab/replay.hpp"
#include "hallab/worlds.hpp"

namespace hallab::hindsight {

enum class Hallucinator { halgan, oracle, none };

struct HindsightConfig {
  double p_start = 0.2;
  double p_end = 0.0;
  int64_t anneal_span = 100000;
  int d_max = 16;
  Hallucinator mode = Hallucinator::halgan;
  double pos_tol = geometry::kDefaultPosTol;
  double yaw_tol = geometry::kDefaultYawTol;
  // Treat relabeled +1 transitions as terminal for bootstrapping, matching
  // the environment's end-on-success semantics.
  bool success_terminal = true;
};

// Linear p_start -> p_end over the anneal span, constant after.
double hallucination_prob(int64_t step, const HindsightConfig& cfg);

// 1.0 iff the post-step pose satisfies the goal pose up to thresholds.
double reassign_reward(const geometry::Pose& pose_next,
                       const geometry::Pose& goal_pose, double pos_tol,
                       double yaw_tol);

// Rewrites failed-episode minibatch entries in place (copies only; the
// buffer is never touched): hallucinates a future-state goal into both
// frames and reassigns the reward.
class Relabeler {
 public:
  Relabeler(HindsightConfig cfg, halgan::HalganModel* model,
            const worlds::World* oracle_world);

  void relabel_minibatch(std::vector<replay::SampledTransition>& batch,
                         const replay::ReplayBuffer& buffer, double p,
                         std::mt19937_64& rng);

  int64_t skipped_lookups() const { return skipped_; }

 private:
  HindsightConfig cfg_;
  halgan::HalganModel* model_;         // required in halgan mode
  const worlds::World* oracle_world_;  // required in oracle mode
  int64_t skipped_ = 0;
};

}  // namespace hallab::hindsight
