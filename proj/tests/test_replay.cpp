#include <doctest.h>
#include <torch/torch.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <random>

#include "hallab/replay.hpp"

using namespace hallab;
using namespace hallab::replay;

namespace {

Transition make_t(int64_t ep, int step, double r = 0.0, bool terminal = false) {
  Transition t;
  t.s = torch::full({3, 4, 4}, static_cast<float>(ep * 100 + step));
  t.s_next = torch::full({3, 4, 4}, static_cast<float>(ep * 100 + step + 1));
  t.a.a0 = step % 4;
  t.r = r;
  t.pose = {static_cast<double>(step), 0, 0, {}};
  t.pose_next = {static_cast<double>(step + 1), 0, 0, {}};
  t.episode_id = ep;
  t.step_index = step;
  t.terminal = terminal;
  return t;
}

// len transitions, last one terminal; reward 1 on the last step iff success.
void add_episode(ReplayBuffer& b, int64_t ep, int len, bool success = false) {
  for (int i = 0; i < len; ++i) {
    const bool last = i == len - 1;
    b.append(make_t(ep, i, last && success ? 1.0 : 0.0, last));
  }
}

}  // namespace

TEST_CASE("append grows size; warmup gates sampling") {
  ReplayBuffer b(100, 5);
  b.append(make_t(0, 0));
  CHECK(b.size() == 1);
  CHECK_FALSE(b.warmed_up());
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(b.sample_minibatch(2, rng), std::logic_error);
  for (int i = 1; i < 5; ++i) b.append(make_t(0, i, 0.0, i == 4));
  CHECK(b.warmed_up());
  CHECK(b.sample_minibatch(3, rng).size() == 3);
}

TEST_CASE("append rejects out-of-order and non-contiguous input") {
  ReplayBuffer b(100, 1);
  add_episode(b, 3, 4);
  CHECK_THROWS_AS(b.append(make_t(2, 0)), std::invalid_argument);   // old id
  CHECK_THROWS_AS(b.append(make_t(3, 4)), std::invalid_argument);   // closed
  b.append(make_t(4, 0));
  CHECK_THROWS_AS(b.append(make_t(4, 2)), std::invalid_argument);   // gap
}

TEST_CASE("capacity eviction is episode-granular") {
  ReplayBuffer b(10, 1);
  for (int64_t ep = 0; ep < 4; ++ep) add_episode(b, ep, 4);
  // 16 appended into capacity 10: oldest episodes must be gone entirely.
  CHECK(b.size() <= 10);
  CHECK_FALSE(b.contains_episode(0));
  CHECK(b.contains_episode(3));
  CHECK_THROWS_AS(b.future_state({0, 0}, 0), std::out_of_range);
}

TEST_CASE("a lone open episode may exceed capacity until it closes") {
  ReplayBuffer b(5, 1);
  for (int i = 0; i < 8; ++i) b.append(make_t(0, i));
  CHECK(b.size() == 8);  // nothing else to evict
  b.append(make_t(0, 8, 0.0, true));
  add_episode(b, 1, 3);
  CHECK(b.size() == 3);  // closing allowed the big episode out
}

TEST_CASE("sample_minibatch is uniform (chi-square) and deterministic") {
  ReplayBuffer b(100, 1);
  add_episode(b, 0, 10);
  std::mt19937_64 rng(7);
  std::map<int, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws / 10; ++i) {
    for (const auto& ref : b.sample_minibatch(10, rng)) {
      counts[ref.step_index]++;
    }
  }
  // chi-square with 9 dof; 3-sigma-ish bound ~ 27.9 (p < 0.001).
  const double expect = draws / 10.0;
  double chi2 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double d = counts[i] - expect;
    chi2 += d * d / expect;
  }
  CHECK(chi2 < 27.9);

  std::mt19937_64 r1(3), r2(3);
  auto m1 = b.sample_minibatch(8, r1);
  auto m2 = b.sample_minibatch(8, r2);
  for (size_t i = 0; i < m1.size(); ++i) {
    CHECK(m1[i].episode_id == m2[i].episode_id);
    CHECK(m1[i].step_index == m2[i].step_index);
  }
}

TEST_CASE("single-item buffer always samples that item") {
  ReplayBuffer b(10, 1);
  b.append(make_t(0, 0, 0.0, true));
  std::mt19937_64 rng(1);
  auto m = b.sample_minibatch(1, rng);
  CHECK(m[0].episode_id == 0);
  CHECK(m[0].step_index == 0);
}

TEST_CASE("future_state clamps and matches a linear-scan oracle") {
  ReplayBuffer b(1000, 1);
  std::mt19937_64 lens(5);
  std::uniform_int_distribution<int> ul(1, 20);
  std::vector<int> lengths;
  for (int64_t ep = 0; ep < 20; ++ep) {
    const int len = ul(lens);
    lengths.push_back(len);
    add_episode(b, ep, len);
  }
  CHECK(b.future_state({0, 0}, 0).step_index == 0);  // d=0 identity

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> ue(0, 19), ud(0, 40);
  for (int i = 0; i < 2000; ++i) {
    const int64_t ep = ue(rng);
    const int len = lengths[ep];
    std::uniform_int_distribution<int> us(0, len - 1);
    const int s = us(rng);
    const int d = ud(rng);
    const Transition& got = b.future_state({ep, s}, d);
    const int expect = std::min(s + d, len - 1);  // linear-scan equivalent
    CHECK(got.episode_id == ep);
    CHECK(got.step_index == expect);
  }
}

TEST_CASE("pose chaining holds inside episodes") {
  ReplayBuffer b(1000, 1);
  add_episode(b, 0, 15);
  for (int i = 0; i + 1 < 15; ++i) {
    const Transition& a = b.future_state({0, 0}, i);
    const Transition& c = b.future_state({0, 0}, i + 1);
    CHECK(a.pose_next.x == c.pose.x);
  }
}

TEST_CASE("is_failed tracks real success rewards") {
  ReplayBuffer b(1000, 1);
  add_episode(b, 0, 5, /*success=*/true);
  add_episode(b, 1, 5, /*success=*/false);
  CHECK_FALSE(b.is_failed(0));
  CHECK(b.is_failed(1));
  b.append(make_t(2, 0));
  CHECK_FALSE(b.is_closed(2));
  CHECK_THROWS_AS(b.is_failed(2), std::logic_error);
}

TEST_CASE("is_failed matches scripted ground truth over a mixed buffer") {
  ReplayBuffer b(10000, 1);
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> coin(0, 1);
  std::map<int64_t, bool> truth;
  for (int64_t ep = 0; ep < 50; ++ep) {
    const bool success = coin(rng) == 1;
    truth[ep] = !success;
    add_episode(b, ep, 5, success);
  }
  for (const auto& [ep, failed] : truth) CHECK(b.is_failed(ep) == failed);
}

TEST_CASE("buffer checkpoint round-trips") {
  ReplayBuffer b(1000, 3);
  add_episode(b, 0, 6, true);
  add_episode(b, 1, 4, false);
  const std::string path =
      (std::filesystem::temp_directory_path() / "hallab_replay_test.bin")
          .string();
  b.save(path);
  ReplayBuffer c = ReplayBuffer::load(path, 1000, 3);
  CHECK(c.size() == b.size());
  CHECK(c.is_failed(1));
  CHECK_FALSE(c.is_failed(0));
  const Transition& t = c.future_state({1, 1}, 1);
  CHECK(t.step_index == 2);
  CHECK(torch::equal(t.s, b.future_state({1, 1}, 1).s));
  std::remove(path.c_str());
}

TEST_CASE("materialize copies match and relabeling copies never mutate") {
  ReplayBuffer b(1000, 1);
  add_episode(b, 0, 5);
  std::mt19937_64 rng(2);
  auto refs = b.sample_minibatch(4, rng);
  auto batch = materialize(b, refs);
  REQUIRE(batch.size() == 4);
  batch[0].t.r = 99.0;
  const Transition& orig = b.get(batch[0].ref);
  CHECK(orig.r == 0.0);
}
