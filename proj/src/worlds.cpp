#include "hallab/worlds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hallab/archive.hpp"

namespace hallab::worlds {

using geometry::config_close;
using geometry::relative_config;
using geometry::wrap_angle;

std::string task_name(Task t) {
  switch (t) {
    case Task::navigate: return "navigate";
    case Task::successive_navigate: return "successive_navigate";
    case Task::pebble: return "pebble";
  }
  return "navigate";
}

Task task_from_name(const std::string& name) {
  if (name == "navigate") return Task::navigate;
  if (name == "successive_navigate") return Task::successive_navigate;
  if (name == "pebble") return Task::pebble;
  throw std::invalid_argument("unknown task: " + name);
}

namespace {

constexpr double kTanHalfFov = 0.5773502691896257;  // 60 degree FOV
constexpr double kEyeHeight = 0.5;
constexpr double kWallHeight = 1.0;
constexpr double kMoveStep = 0.25;
constexpr double kTurnStep = 0.2;
constexpr double kNearClip = 0.05;
constexpr double kAgentMargin = 0.3;

struct Billboard {
  double x, y;
  double r, g, b;
  double width, height;
};

Billboard goal_billboard(Task task, bool green, double x, double y) {
  if (task == Task::pebble) return {x, y, 0.45, 0.42, 0.40, 0.22, 0.16};
  if (green) return {x, y, 0.10, 0.80, 0.15, 0.45, 0.45};
  return {x, y, 0.90, 0.10, 0.10, 0.45, 0.45};
}

double shade(double base, double depth) { return base / (1.0 + 0.15 * depth); }

uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

World::World(WorldConfig config) : config_(std::move(config)) {
  if (config_.image_size != 16 && config_.image_size != 32 &&
      config_.image_size != 64) {
    throw std::invalid_argument("World: image size must be 16, 32 or 64");
  }
  if (config_.room_size <= 2.0) {
    throw std::invalid_argument("World: room too small");
  }
}

void World::place_objects(std::mt19937_64& rng) {
  const double lo = 0.6;
  const double hi = config_.room_size - 0.6;
  std::uniform_real_distribution<double> u(lo, hi);
  std::uniform_real_distribution<double> uyaw(-M_PI, M_PI);
  pose_.x = u(rng);
  pose_.y = u(rng);
  pose_.yaw = wrap_angle(uyaw(rng));
  auto far_enough = [&](double x, double y) {
    return std::hypot(x - pose_.x, y - pose_.y) >= 1.5;
  };
  do {
    red_x_ = u(rng);
    red_y_ = u(rng);
  } while (!far_enough(red_x_, red_y_));
  if (config_.task == Task::successive_navigate) {
    do {
      green_x_ = u(rng);
      green_y_ = u(rng);
    } while (!far_enough(green_x_, green_y_) ||
             std::hypot(green_x_ - red_x_, green_y_ - red_y_) < 1.5);
  }
}

Observation World::reset(uint64_t seed) {
  std::mt19937_64 rng(mix_seed(config_.seed, seed));
  place_objects(rng);
  held_ = false;
  pose_.held = (config_.task == Task::successive_navigate)
                   ? std::optional<bool>(false)
                   : std::nullopt;
  steps_ = 0;
  done_ = false;
  return observe();
}

Pose World::goal_position() const {
  Pose g;
  if (config_.task == Task::successive_navigate && held_) {
    g.x = green_x_;
    g.y = green_y_;
  } else {
    g.x = red_x_;
    g.y = red_y_;
  }
  return g;
}

Pose World::goal_pose_for(const Pose& agent) const {
  Pose g = goal_position();
  const double dx = g.x - agent.x;
  const double dy = g.y - agent.y;
  g.yaw = (std::hypot(dx, dy) < 1e-9) ? agent.yaw
                                      : std::atan2(dy, dx);
  g.held = agent.held;
  return g;
}

bool World::success_predicate(const Pose& agent) const {
  return config_close(agent, goal_pose_for(agent), config_.pos_tol,
                      config_.bearing_tol);
}

StepResult World::step(const Action& action) {
  if (done_) throw std::logic_error("World::step: episode already finished");
  double reward = 0.0;
  if (config_.action_mode == ActionMode::discrete) {
    const int idx = static_cast<int>(std::lround(action.a0));
    switch (idx) {
      case 0:
        pose_.x += kMoveStep * std::cos(pose_.yaw);
        pose_.y += kMoveStep * std::sin(pose_.yaw);
        break;
      case 1: pose_.yaw = wrap_angle(pose_.yaw + kTurnStep); break;
      case 2: pose_.yaw = wrap_angle(pose_.yaw - kTurnStep); break;
      case 3: break;
      default:
        throw std::invalid_argument("World::step: bad discrete action");
    }
  } else {
    const double v = std::clamp(action.a0, -1.0, 1.0);
    const double w = std::clamp(action.a1, -1.0, 1.0);
    pose_.x += kMoveStep * v * std::cos(pose_.yaw);
    pose_.y += kMoveStep * v * std::sin(pose_.yaw);
    pose_.yaw = wrap_angle(pose_.yaw + kTurnStep * w);
    reward -= config_.movement_penalty * (std::fabs(v) + std::fabs(w));
  }
  pose_.x = std::clamp(pose_.x, kAgentMargin, config_.room_size - kAgentMargin);
  pose_.y = std::clamp(pose_.y, kAgentMargin, config_.room_size - kAgentMargin);

  bool success = false;
  if (config_.task == Task::successive_navigate) {
    if (!held_ && success_predicate(pose_)) {
      held_ = true;
      pose_.held = true;
    } else if (held_ && success_predicate(pose_)) {
      success = true;
    }
  } else {
    success = success_predicate(pose_);
  }
  ++steps_;
  if (success) {
    reward += 1.0;
    done_ = true;
  } else if (steps_ >= config_.max_episode_steps) {
    done_ = true;
  }
  StepResult out;
  out.obs = observe();
  out.reward = reward;
  out.done = done_;
  out.success = success;
  return out;
}

void World::set_agent_pose(const Pose& p) {
  pose_ = p;
  pose_.yaw = wrap_angle(p.yaw);
  if (config_.task == Task::successive_navigate) {
    held_ = p.held.value_or(held_);
    pose_.held = held_;
  } else {
    pose_.held = std::nullopt;
  }
}

void World::set_goal_position(double x, double y) {
  if (config_.task == Task::successive_navigate && held_) {
    green_x_ = x;
    green_y_ = y;
  } else {
    red_x_ = x;
    red_y_ = y;
  }
}

Observation World::observe() const {
  Observation o;
  o.image = render_scene(pose_, true, nullptr);
  o.pose = pose_;
  return o;
}

torch::Tensor World::render_base(const Pose& agent) const {
  return render_scene(agent, false, nullptr);
}

torch::Tensor World::render_with_goal(const Pose& agent,
                                      const Pose& goal) const {
  const double lo = 0.0, hi = config_.room_size;
  if (goal.x < lo || goal.x > hi || goal.y < lo || goal.y > hi ||
      agent.x < lo || agent.x > hi || agent.y < lo || agent.y > hi) {
    throw std::invalid_argument("render_with_goal: pose outside room");
  }
  return render_scene(agent, true, &goal);
}

torch::Tensor World::render_scene(const Pose& agent, bool with_objects,
                                  const Pose* goal_override) const {
  const int H = config_.image_size;
  const int W = config_.image_size;
  const double S = config_.room_size;
  torch::Tensor img = torch::empty({3, H, W}, torch::kFloat32);
  auto px = img.accessor<float, 3>();
  const double vfocal = H / (2.0 * kTanHalfFov);
  const double c = std::cos(agent.yaw);
  const double s = std::sin(agent.yaw);

  std::vector<double> wall_depth(W);
  for (int cx = 0; cx < W; ++cx) {
    const double ndc = 2.0 * (cx + 0.5) / W - 1.0;
    const double lat = -ndc * kTanHalfFov;  // ego frame, +y is left
    const double dx = c - s * lat;
    const double dy = s + c * lat;
    // Nearest wall along the ray; the parameter equals forward depth
    // because the ego-forward component of the direction is 1.
    double t = std::numeric_limits<double>::infinity();
    int face = 0;
    if (dx < 0 && (0.0 - agent.x) / dx < t) { t = (0.0 - agent.x) / dx; face = 0; }
    if (dx > 0 && (S - agent.x) / dx < t) { t = (S - agent.x) / dx; face = 1; }
    if (dy < 0 && (0.0 - agent.y) / dy < t) { t = (0.0 - agent.y) / dy; face = 2; }
    if (dy > 0 && (S - agent.y) / dy < t) { t = (S - agent.y) / dy; face = 3; }
    wall_depth[cx] = t;

    static const double face_rgb[4][3] = {{0.60, 0.60, 0.72},
                                          {0.72, 0.62, 0.50},
                                          {0.50, 0.70, 0.60},
                                          {0.66, 0.66, 0.54}};
    const double half_rows = (kWallHeight / 2.0) * vfocal / t;
    const double top = H / 2.0 - half_rows;
    const double bottom = H / 2.0 + half_rows;
    for (int ry = 0; ry < H; ++ry) {
      const double yc = ry + 0.5;
      double r, g, b;
      if (yc < top) {
        r = 0.80; g = 0.85; b = 0.90;  // ceiling
      } else if (yc >= bottom) {
        r = g = b = 0.25;  // floor
      } else {
        r = shade(face_rgb[face][0], t);
        g = shade(face_rgb[face][1], t);
        b = shade(face_rgb[face][2], t);
      }
      px[0][ry][cx] = static_cast<float>(2.0 * r - 1.0);
      px[1][ry][cx] = static_cast<float>(2.0 * g - 1.0);
      px[2][ry][cx] = static_cast<float>(2.0 * b - 1.0);
    }
  }

  if (!with_objects) return img;

  std::vector<Billboard> boards;
  if (goal_override != nullptr) {
    const bool green = config_.task == Task::successive_navigate &&
                       goal_override->held.value_or(false);
    boards.push_back(
        goal_billboard(config_.task, green, goal_override->x, goal_override->y));
  } else {
    if (!(config_.task == Task::successive_navigate && held_)) {
      boards.push_back(goal_billboard(config_.task, false, red_x_, red_y_));
    }
    if (config_.task == Task::successive_navigate) {
      boards.push_back(goal_billboard(config_.task, true, green_x_, green_y_));
    }
  }

  // Far to near.
  std::sort(boards.begin(), boards.end(), [&](const Billboard& a,
                                              const Billboard& b) {
    const double fa = c * (a.x - agent.x) + s * (a.y - agent.y);
    const double fb = c * (b.x - agent.x) + s * (b.y - agent.y);
    return fa > fb;
  });

  for (const auto& bb : boards) {
    const double ox = bb.x - agent.x;
    const double oy = bb.y - agent.y;
    const double f = c * ox + s * oy;
    const double lat = -s * ox + c * oy;
    if (f < kNearClip) continue;
    const double ndc_c = -lat / (f * kTanHalfFov);
    const double col_center = (ndc_c + 1.0) / 2.0 * W;
    const double half_w = bb.width * W / (4.0 * f * kTanHalfFov);
    const double row_bottom = H / 2.0 + kEyeHeight * vfocal / f;
    const double row_top = H / 2.0 + (kEyeHeight - bb.height) * vfocal / f;
    const int cx0 = std::max(0, static_cast<int>(std::floor(col_center - half_w)));
    const int cx1 = std::min(W - 1, static_cast<int>(std::ceil(col_center + half_w)));
    const int ry0 = std::max(0, static_cast<int>(std::floor(row_top)));
    const int ry1 = std::min(H - 1, static_cast<int>(std::ceil(row_bottom)));
    const double r = shade(bb.r, f), g = shade(bb.g, f), b = shade(bb.b, f);
    for (int cx = cx0; cx <= cx1; ++cx) {
      const double xc = cx + 0.5;
      if (xc < col_center - half_w || xc > col_center + half_w) continue;
      if (f >= wall_depth[cx]) continue;
      for (int ry = ry0; ry <= ry1; ++ry) {
        const double yc = ry + 0.5;
        if (yc < row_top || yc >= row_bottom) continue;
        px[0][ry][cx] = static_cast<float>(2.0 * r - 1.0);
        px[1][ry][cx] = static_cast<float>(2.0 * g - 1.0);
        px[2][ry][cx] = static_cast<float>(2.0 * b - 1.0);
      }
    }
  }
  return img;
}

Action scripted_action(const World& world) {
  const Pose& p = world.agent_pose();
  const Pose g = world.goal_position();
  const double dx = g.x - p.x;
  const double dy = g.y - p.y;
  const double dist = std::hypot(dx, dy);
  const double bearing =
      (dist < 1e-9) ? 0.0 : wrap_angle(std::atan2(dy, dx) - p.yaw);
  Action a;
  if (world.config().action_mode == ActionMode::discrete) {
    if (std::fabs(bearing) > 0.12) {
      a.a0 = bearing > 0 ? 1 : 2;
    } else {
      a.a0 = 0;
    }
  } else {
    a.a1 = std::clamp(2.0 * bearing, -1.0, 1.0);
    a.a0 = std::fabs(bearing) < 0.3 ? 1.0 : 0.2;
  }
  return a;
}

int SnapshotDataset::config_dim() const {
  if (items.empty()) return 0;
  return items.front().config.held.has_value() ? 4 : 3;
}

void SnapshotDataset::save(const std::string& path) const {
  if (items.empty()) throw std::runtime_error("SnapshotDataset: empty save");
  const auto n = static_cast<int64_t>(items.size());
  std::vector<torch::Tensor> imgs;
  imgs.reserve(items.size());
  for (const auto& it : items) imgs.push_back(it.image);
  torch::Tensor images =
      torch::stack(imgs).permute({0, 2, 3, 1}).contiguous();  // N,H,W,3
  const int C = config_dim();
  torch::Tensor configs = torch::empty({n, C}, torch::kFloat32);
  auto acc = configs.accessor<float, 2>();
  for (int64_t i = 0; i < n; ++i) {
    const auto& cfg = items[i].config;
    acc[i][0] = static_cast<float>(cfg.forward);
    acc[i][1] = static_cast<float>(cfg.lateral);
    acc[i][2] = static_cast<float>(cfg.dyaw);
    if (C == 4) acc[i][3] = cfg.held.value_or(false) ? 1.0f : 0.0f;
  }
  Archive a;
  a.put("images", images);
  a.put("configs", configs);
  a.put_string("task", task);
  a.put("image_size", torch::tensor(static_cast<int64_t>(image_size)));
  a.save(path);
}

SnapshotDataset SnapshotDataset::load(const std::string& path) {
  Archive a = Archive::load(path);
  SnapshotDataset d;
  d.task = a.str("task");
  d.image_size = static_cast<int>(a.tensor("image_size").item<int64_t>());
  torch::Tensor images = a.tensor("images").permute({0, 3, 1, 2}).contiguous();
  torch::Tensor configs = a.tensor("configs");
  const auto n = images.size(0);
  const auto C = configs.size(1);
  auto acc = configs.accessor<float, 2>();
  for (int64_t i = 0; i < n; ++i) {
    GoalSnapshot snap;
    snap.image = images[i];
    snap.config.forward = acc[i][0];
    snap.config.lateral = acc[i][1];
    snap.config.dyaw = acc[i][2];
    if (C == 4) snap.config.held = acc[i][3] != 0.0f;
    d.items.push_back(std::move(snap));
  }
  return d;
}

SnapshotDataset collect_goal_snapshots(World& world, int n_episodes, int tail,
                                       uint64_t seed) {
  if (tail != 16 && tail != 32) {
    throw std::invalid_argument("collect_goal_snapshots: tail must be 16 or 32");
  }
  SnapshotDataset d;
  d.task = task_name(world.config().task);
  d.image_size = world.config().image_size;
  const bool successive = world.config().task == Task::successive_navigate;
  for (int ep = 0; ep < n_episodes; ++ep) {
    std::vector<Observation> traj;
    traj.push_back(world.reset(mix_seed(seed, ep)));
    const Pose first_box = world.goal_position();
    bool success = false;
    while (!world.done()) {
      auto r = world.step(scripted_action(world));
      traj.push_back(r.obs);
      success = r.success;
    }
    if (!success) continue;
    const Pose final_pose = traj.back().pose;
    const size_t start = traj.size() > static_cast<size_t>(tail)
                             ? traj.size() - tail
                             : 0;
    for (size_t i = start; i < traj.size(); ++i) {
      const Pose& p = traj[i].pose;
      Pose ref = final_pose;
      if (successive && !p.held.value_or(false)) {
        // Pre-pickup states reference the first box, facing it.
        ref.x = first_box.x;
        ref.y = first_box.y;
        const double dx = ref.x - p.x;
        const double dy = ref.y - p.y;
        ref.yaw = (std::hypot(dx, dy) < 1e-9) ? p.yaw : std::atan2(dy, dx);
        ref.held = false;
      }
      GoalSnapshot snap;
      snap.image = traj[i].image;
      snap.config = relative_config(p, ref);
      d.items.push_back(std::move(snap));
    }
  }
  if (d.items.empty()) {
    throw std::runtime_error("collect_goal_snapshots: no successful rollouts");
  }
  return d;
}

SnapshotDataset subsample_dataset(const SnapshotDataset& full, int n,
                                  uint64_t seed) {
  const int N = static_cast<int>(full.items.size());
  if (n <= 0 || n > N) {
    throw std::invalid_argument("subsample_dataset: n out of range");
  }
  std::vector<int> idx(N);
  for (int i = 0; i < N; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> u(i, N - 1);
    std::swap(idx[i], idx[u(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  SnapshotDataset out;
  out.task = full.task;
  out.image_size = full.image_size;
  for (int i : idx) out.items.push_back(full.items[i]);
  return out;
}

}  // namespace hallab::worlds
