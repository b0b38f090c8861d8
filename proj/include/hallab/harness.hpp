#pragma once

#include <string>

#include "hallab/agents.hpp"
#include "hallab/config.hpp"
#include "hallab/worlds.hpp"

namespace hallab::harness {

struct EvalResult {
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

// Greedy rollout aggregate over n fresh episodes.
EvalResult evaluate(agents::Agent& agent, worlds::World& world, int n_episodes,
                    uint64_t seed);

// Warmup, then the interleaved act/store/sample/relabel/optimize loop.
// Writes metrics.csv, eval.csv, config.resolved, agent.ckpt and a
// run_info.txt timing sidecar into run.out_dir; returns the metrics path.
// Deterministic given the config and seed.
std::string run_experiment(const ExperimentConfig& cfg);

}  // namespace hallab::harness
