#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "hallab/geometry.hpp"
#include "hallab/worlds.hpp"

namespace hallab::replay {

using geometry::Pose;

struct Transition {
  torch::Tensor s;       // 3 x H x W float32
  worlds::Action a;
  double r = 0.0;
  torch::Tensor s_next;
  Pose pose;
  Pose pose_next;
  int64_t episode_id = 0;
  int step_index = 0;
  bool terminal = false;
};

struct TransitionRef {
  int64_t episode_id = 0;
  int step_index = 0;
};

// Episodic ring buffer. Eviction is episode-granular so future-state
// lookups never dangle; a lone open episode may transiently exceed
// capacity until it closes.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, size_t warmup);

  void append(const Transition& t);

  size_t size() const { return flat_.size(); }
  size_t warmup() const { return warmup_; }
  bool warmed_up() const { return flat_.size() >= warmup_; }

  std::vector<TransitionRef> sample_minibatch(int b, std::mt19937_64& rng) const;

  const Transition& get(const TransitionRef& ref) const;
  // Transition at step_index + d within the same episode, clamped to the
  // episode's last transition.
  const Transition& future_state(const TransitionRef& ref, int d) const;
  int episode_length(int64_t episode_id) const;
  bool contains_episode(int64_t episode_id) const;
  bool is_closed(int64_t episode_id) const;

  // True iff the closed episode never earned a real success reward.
  bool is_failed(int64_t episode_id) const;

  void save(const std::string& path) const;
  static ReplayBuffer load(const std::string& path, size_t capacity,
                           size_t warmup);

 private:
  struct Episode {
    int64_t id = 0;
    std::vector<Transition> steps;
    bool closed = false;
    bool success = false;
  };

  const Episode& find_episode(int64_t id) const;
  void evict();

  size_t capacity_;
  size_t warmup_;
  std::deque<Episode> episodes_;  // ascending id order
  std::deque<TransitionRef> flat_;
};

// A sampled minibatch entry: the buffer coordinates plus a mutable copy
// of the stored transition. Relabelers rewrite the copy, never the buffer.
struct SampledTransition {
  TransitionRef ref;
  Transition t;
};

std::vector<SampledTransition> materialize(const ReplayBuffer& buffer,
                                           const std::vector<TransitionRef>& refs);

}  // namespace hallab::replay
