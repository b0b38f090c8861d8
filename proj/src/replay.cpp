#include "hallab/replay.hpp"

#include <algorithm>
#include <stdexcept>

#include "hallab/archive.hpp"

namespace hallab::replay {

namespace {
// A real environment success pays ~+1 (less the movement penalty in
// continuous mode); everything else is <= 0.
constexpr double kSuccessRewardFloor = 0.5;
}  // namespace

ReplayBuffer::ReplayBuffer(size_t capacity, size_t warmup)
    : capacity_(capacity), warmup_(warmup) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity 0");
}

void ReplayBuffer::append(const Transition& t) {
  if (!episodes_.empty()) {
    Episode& last = episodes_.back();
    if (t.episode_id < last.id) {
      throw std::invalid_argument("ReplayBuffer: out-of-order episode id");
    }
    if (t.episode_id == last.id) {
      if (last.closed) {
        throw std::invalid_argument("ReplayBuffer: append to closed episode");
      }
      if (t.step_index != last.steps.back().step_index + 1) {
        throw std::invalid_argument("ReplayBuffer: non-contiguous step index");
      }
    }
  }
  if (episodes_.empty() || t.episode_id != episodes_.back().id) {
    if (!episodes_.empty() && !episodes_.back().closed) {
      throw std::invalid_argument(
          "ReplayBuffer: new episode while previous still open");
    }
    episodes_.push_back(Episode{t.episode_id, {}, false, false});
  }
  Episode& ep = episodes_.back();
  ep.steps.push_back(t);
  if (t.r >= kSuccessRewardFloor) ep.success = true;
  if (t.terminal) ep.closed = true;
  flat_.push_back(TransitionRef{t.episode_id, t.step_index});
  while (flat_.size() > capacity_) {
    const size_t before = flat_.size();
    evict();
    if (flat_.size() == before) break;
  }
}

void ReplayBuffer::evict() {
  if (episodes_.empty()) return;
  Episode& front = episodes_.front();
  if (!front.closed && episodes_.size() == 1) return;  // lone open episode
  const size_t n = front.steps.size();
  for (size_t i = 0; i < n; ++i) flat_.pop_front();
  episodes_.pop_front();
}

std::vector<TransitionRef> ReplayBuffer::sample_minibatch(
    int b, std::mt19937_64& rng) const {
  if (!warmed_up()) {
    throw std::logic_error("ReplayBuffer: sampled before warmup complete");
  }
  if (b <= 0) throw std::invalid_argument("ReplayBuffer: batch size <= 0");
  std::uniform_int_distribution<size_t> u(0, flat_.size() - 1);
  std::vector<TransitionRef> out;
  out.reserve(b);
  for (int i = 0; i < b; ++i) out.push_back(flat_[u(rng)]);
  return out;
}

const ReplayBuffer::Episode& ReplayBuffer::find_episode(int64_t id) const {
  auto it = std::lower_bound(
      episodes_.begin(), episodes_.end(), id,
      [](const Episode& e, int64_t v) { return e.id < v; });
  if (it == episodes_.end() || it->id != id) {
    throw std::out_of_range("ReplayBuffer: episode not in buffer (evicted?)");
  }
  return *it;
}

const Transition& ReplayBuffer::get(const TransitionRef& ref) const {
  const Episode& ep = find_episode(ref.episode_id);
  const int base = ep.steps.front().step_index;
  const int idx = ref.step_index - base;
  if (idx < 0 || idx >= static_cast<int>(ep.steps.size())) {
    throw std::out_of_range("ReplayBuffer: bad step index");
  }
  return ep.steps[idx];
}

const Transition& ReplayBuffer::future_state(const TransitionRef& ref,
                                             int d) const {
  if (d < 0) throw std::invalid_argument("future_state: d < 0");
  const Episode& ep = find_episode(ref.episode_id);
  const int base = ep.steps.front().step_index;
  const int idx = ref.step_index - base;
  if (idx < 0 || idx >= static_cast<int>(ep.steps.size())) {
    throw std::out_of_range("ReplayBuffer: bad step index");
  }
  const int clamped =
      std::min(idx + d, static_cast<int>(ep.steps.size()) - 1);
  return ep.steps[clamped];
}

int ReplayBuffer::episode_length(int64_t episode_id) const {
  return static_cast<int>(find_episode(episode_id).steps.size());
}

bool ReplayBuffer::contains_episode(int64_t episode_id) const {
  auto it = std::lower_bound(
      episodes_.begin(), episodes_.end(), episode_id,
      [](const Episode& e, int64_t v) { return e.id < v; });
  return it != episodes_.end() && it->id == episode_id;
}

bool ReplayBuffer::is_closed(int64_t episode_id) const {
  return find_episode(episode_id).closed;
}

bool ReplayBuffer::is_failed(int64_t episode_id) const {
  const Episode& ep = find_episode(episode_id);
  if (!ep.closed) {
    throw std::logic_error("ReplayBuffer: is_failed on open episode");
  }
  return !ep.success;
}

void ReplayBuffer::save(const std::string& path) const {
  const auto n = static_cast<int64_t>(flat_.size());
  if (n == 0) throw std::runtime_error("ReplayBuffer: nothing to save");
  std::vector<torch::Tensor> s, sn;
  torch::Tensor actions = torch::empty({n, 2}, torch::kFloat64);
  torch::Tensor rewards = torch::empty({n}, torch::kFloat64);
  torch::Tensor poses = torch::empty({n, 10}, torch::kFloat64);
  torch::Tensor meta = torch::empty({n, 3}, torch::kInt64);
  auto aa = actions.accessor<double, 2>();
  auto ra = rewards.accessor<double, 1>();
  auto pa = poses.accessor<double, 2>();
  auto ma = meta.accessor<int64_t, 2>();
  int64_t i = 0;
  for (const auto& ep : episodes_) {
    for (const auto& t : ep.steps) {
      s.push_back(t.s);
      sn.push_back(t.s_next);
      aa[i][0] = t.a.a0;
      aa[i][1] = t.a.a1;
      ra[i] = t.r;
      auto put_pose = [&](const Pose& p, int off) {
        pa[i][off + 0] = p.x;
        pa[i][off + 1] = p.y;
        pa[i][off + 2] = p.yaw;
        pa[i][off + 3] = p.held.has_value() ? 1.0 : 0.0;
        pa[i][off + 4] = p.held.value_or(false) ? 1.0 : 0.0;
      };
      put_pose(t.pose, 0);
      put_pose(t.pose_next, 5);
      ma[i][0] = t.episode_id;
      ma[i][1] = t.step_index;
      ma[i][2] = t.terminal ? 1 : 0;
      ++i;
    }
  }
  Archive a;
  a.put("images", torch::stack(s).permute({0, 2, 3, 1}).contiguous());
  a.put("images_next", torch::stack(sn).permute({0, 2, 3, 1}).contiguous());
  a.put("actions", actions);
  a.put("rewards", rewards);
  a.put("poses", poses);
  a.put("meta", meta);
  a.save(path);
}

ReplayBuffer ReplayBuffer::load(const std::string& path, size_t capacity,
                                size_t warmup) {
  Archive a = Archive::load(path);
  torch::Tensor images = a.tensor("images").permute({0, 3, 1, 2}).contiguous();
  torch::Tensor images_next =
      a.tensor("images_next").permute({0, 3, 1, 2}).contiguous();
  torch::Tensor actions = a.tensor("actions");
  torch::Tensor rewards = a.tensor("rewards");
  torch::Tensor poses = a.tensor("poses");
  torch::Tensor meta = a.tensor("meta");
  ReplayBuffer buf(capacity, warmup);
  auto aa = actions.accessor<double, 2>();
  auto ra = rewards.accessor<double, 1>();
  auto pa = poses.accessor<double, 2>();
  auto ma = meta.accessor<int64_t, 2>();
  auto read_pose = [&](int64_t i, int off) {
    Pose p;
    p.x = pa[i][off + 0];
    p.y = pa[i][off + 1];
    p.yaw = pa[i][off + 2];
    if (pa[i][off + 3] != 0.0) p.held = pa[i][off + 4] != 0.0;
    return p;
  };
  for (int64_t i = 0; i < images.size(0); ++i) {
    Transition t;
    t.s = images[i];
    t.s_next = images_next[i];
    t.a = {aa[i][0], aa[i][1]};
    t.r = ra[i];
    t.pose = read_pose(i, 0);
    t.pose_next = read_pose(i, 5);
    t.episode_id = ma[i][0];
    t.step_index = static_cast<int>(ma[i][1]);
    t.terminal = ma[i][2] != 0;
    buf.append(t);
  }
  return buf;
}

std::vector<SampledTransition> materialize(
    const ReplayBuffer& buffer, const std::vector<TransitionRef>& refs) {
  std::vector<SampledTransition> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r, buffer.get(r)});
  return out;
}

}  // namespace hallab::replay
