#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hallab/geometry.hpp"

namespace hallab::worlds {

using geometry::Pose;
using geometry::RelativeConfig;

enum class Task { navigate, successive_navigate, pebble };
enum class ActionMode { discrete, continuous };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

struct WorldConfig {
  Task task = Task::navigate;
  double room_size = 6.0;
  int image_size = 64;
  int max_episode_steps = 200;
  ActionMode action_mode = ActionMode::discrete;
  double pos_tol = geometry::kDefaultPosTol;
  double bearing_tol = geometry::kDefaultYawTol;
  double movement_penalty = 0.01;
  uint64_t seed = 0;
};

// Discrete mode uses a0 as the action index {0: forward, 1: turn left,
// 2: turn right, 3: no-op}; continuous mode reads (a0, a1) as
// (forward velocity, turn rate), both clipped to [-1, 1].
struct Action {
  double a0 = 0.0;
  double a1 = 0.0;
};

constexpr int kNumDiscreteActions = 4;
constexpr int kContinuousActionDim = 2;

struct Observation {
  torch::Tensor image;  // 3 x H x W float32 in [-1, 1]
  Pose pose;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

class World {
 public:
  explicit World(WorldConfig config);

  Observation reset(uint64_t seed);
  StepResult step(const Action& action);

  // Full scene render with the task's goal object moved to `goal`;
  // everything outside the object's projected footprint matches the
  // goal-free render bit-exactly.
  torch::Tensor render_with_goal(const Pose& agent, const Pose& goal) const;

  // Walls, floor and ceiling only.
  torch::Tensor render_base(const Pose& agent) const;

  const WorldConfig& config() const { return config_; }
  const Pose& agent_pose() const { return pose_; }
  Pose goal_position() const;  // current target object, yaw = 0
  // Target pose used by the success predicate: the object's position
  // facing along the agent's line of sight.
  Pose goal_pose_for(const Pose& agent) const;
  bool success_predicate(const Pose& agent) const;
  bool done() const { return done_; }
  int episode_steps() const { return steps_; }

  // State injection hooks for scripted scenarios.
  void set_agent_pose(const Pose& p);
  void set_goal_position(double x, double y);

 private:
  Observation observe() const;
  torch::Tensor render_scene(const Pose& agent, bool with_objects,
                             const Pose* goal_override) const;
  void place_objects(std::mt19937_64& rng);

  WorldConfig config_;
  Pose pose_;
  double red_x_ = 0, red_y_ = 0;    // navigate/pebble goal, or first box
  double green_x_ = 0, green_y_ = 0;  // second box (successive task)
  bool held_ = false;
  int steps_ = 0;
  bool done_ = true;
};

// Deterministic goal-seeking policy used for dataset collection and as a
// success oracle in tests.
Action scripted_action(const World& world);

struct GoalSnapshot {
  torch::Tensor image;  // 3 x H x W float32
  RelativeConfig config;
};

struct SnapshotDataset {
  std::vector<GoalSnapshot> items;
  std::string task;
  int image_size = 0;

  int config_dim() const;
  void save(const std::string& path) const;
  static SnapshotDataset load(const std::string& path);
};

// Runs the scripted policy for n_episodes and stores the last `tail`
// observations of each successful rollout, annotated relative to the
// goal reference (the final pose, or the first box before pickup).
SnapshotDataset collect_goal_snapshots(World& world, int n_episodes, int tail,
                                       uint64_t seed);

SnapshotDataset subsample_dataset(const SnapshotDataset& full, int n,
                                  uint64_t seed);

}  // namespace hallab::worlds
