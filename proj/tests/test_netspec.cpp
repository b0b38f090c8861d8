#include <doctest.h>
#include <torch/torch.h>

#include <random>

#include "hallab/netspec.hpp"

using namespace hallab::netspec;

TEST_CASE("param_count matches the published agent totals") {
  CHECK(param_count(ddqn_spec(64, 4)) == 33708);
  CHECK(param_count(ddpg_actor_spec(64, 2)) == 33642);
  CHECK(param_count(ddpg_critic_spec(64, 2)) == 33673);
  // image-only variant: drop the 2x32 action weights from dense1
  CHECK(param_count(ddpg_critic_spec(64, 0)) == 33673 - 64);
}

TEST_CASE("param_count hand formulas") {
  LayerSpec dense;
  dense.kind = LayerKind::dense;
  dense.in_features = 3;
  dense.out_features = 128;
  CHECK(param_count(dense) == 3 * 128 + 128);
  dense.bias = false;
  CHECK(param_count(dense) == 3 * 128);

  LayerSpec conv;
  conv.kind = LayerKind::conv;
  conv.kernel = 5;
  conv.in_channels = 3;
  conv.out_channels = 4;
  CHECK(param_count(conv) == 5 * 5 * 3 * 4 + 4);

  LayerSpec bn;
  bn.kind = LayerKind::batchnorm;
  bn.out_channels = 64;
  CHECK(param_count(bn) == 256);
}

TEST_CASE("generator total matches Table 6 formula-correct rows") {
  // Published rows sum to 323707 once the two arithmetic typos
  // (8028 -> 8208, 256 -> 128) are corrected; the corrected total is
  // exactly what the formula produces.
  CHECK(param_count(generator_spec(64, 3, 128)) == 323707);
}

TEST_CASE("discriminator conv trunk matches Table 7") {
  const NetworkSpec d = discriminator_spec(64, 3);
  long conv_sum = 0;
  for (const auto& l : d.layers) {
    if (l.kind == LayerKind::conv) conv_sum += param_count(l);
  }
  CHECK(conv_sum == 329632);
  // Head params with the published aux/score entries un-swapped:
  // score 128->1 (129), aux 128->3 (387); total 330148 vs published 330019.
  CHECK(param_count(d) == 330148);
}

TEST_CASE("infer_strides reproduces the documented assignments") {
  // DDQN: 64 -> 4 over four 5x5 convs => all stride 2 (flatten 512).
  const NetworkSpec q = ddqn_spec(64, 4);
  int s2 = 0;
  for (const auto& l : q.layers) {
    if (l.kind == LayerKind::conv) {
      CHECK(l.stride == 2);
      ++s2;
    }
  }
  CHECK(s2 == 4);

  // Discriminator: seven 4x4 convs reaching 1x1 => six stride 2, one 1.
  const NetworkSpec d = discriminator_spec(64, 3);
  int n1 = 0, n2 = 0;
  for (const auto& l : d.layers) {
    if (l.kind == LayerKind::conv) (l.stride == 2 ? n2 : n1)++;
  }
  CHECK(n2 == 6);
  CHECK(n1 == 1);
}

TEST_CASE("infer_strides rejects impossible targets") {
  NetworkSpec s;
  s.name = "probe";
  LayerSpec in;
  in.kind = LayerKind::input;
  in.name = "image";
  in.shape = {3, 8, 8};
  s.layers.push_back(in);
  LayerSpec c;
  c.kind = LayerKind::conv;
  c.name = "conv1";
  c.kernel = 3;
  c.in_channels = 3;
  c.out_channels = 4;
  s.layers.push_back(c);
  LayerSpec d;
  d.kind = LayerKind::dense;
  d.name = "dense1";
  d.in_features = 999;  // not reachable from any {1,2} stride choice
  d.out_features = 1;
  s.layers.push_back(d);
  CHECK_THROWS_AS(infer_strides(s, 8), std::runtime_error);
}

TEST_CASE("built networks have the declared shapes") {
  auto q = build(ddqn_spec(64, 4), 0);
  torch::Tensor out = q->forward(torch::zeros({2, 3, 64, 64}));
  CHECK(out.sizes() == torch::IntArrayRef({2, 4}));

  auto actor = build(ddpg_actor_spec(64, 2), 0);
  out = actor->forward(torch::rand({2, 3, 64, 64}) * 2 - 1);
  CHECK(out.sizes() == torch::IntArrayRef({2, 2}));
  CHECK(out.abs().max().item<double>() <= 1.0);  // tanh output layer

  auto g = build(generator_spec(64, 3, 128), 0);
  auto outs = g->forward_all(
      {{"config", torch::zeros({2, 3})}, {"latent", torch::ones({2, 128})}});
  CHECK(outs.at("residual").sizes() == torch::IntArrayRef({2, 3, 64, 64}));

  auto d = build(discriminator_spec(64, 3), 0);
  auto douts = d->forward_all({{"image", torch::zeros({2, 3, 64, 64})}});
  CHECK(douts.at("score").sizes() == torch::IntArrayRef({2, 1}));
  CHECK(douts.at("aux").sizes() == torch::IntArrayRef({2, 3}));
}

TEST_CASE("generator residual output is unbounded (no tanh)") {
  auto g = build(generator_spec(16, 3, 128), 3);
  // Scale parameters up; a tanh-capped output could not exceed 1.
  {
    torch::NoGradGuard ng;
    for (auto& p : g->parameters()) p.mul_(50.0);
  }
  auto outs = g->forward_all(
      {{"config", torch::ones({1, 3})}, {"latent", torch::ones({1, 128})}});
  CHECK(outs.at("residual").abs().max().item<double>() > 1.0);
}

TEST_CASE("same seed builds identical networks") {
  auto a = build(ddqn_spec(64, 4), 42);
  auto b = build(ddqn_spec(64, 4), 42);
  torch::Tensor x = torch::rand({1, 3, 64, 64}) * 2 - 1;
  CHECK(torch::equal(a->forward(x), b->forward(x)));
  auto c = build(ddqn_spec(64, 4), 43);
  CHECK_FALSE(torch::equal(a->forward(x), c->forward(x)));
}

TEST_CASE("activations stay finite on inputs in [-1,1]") {
  for (int seed = 0; seed < 3; ++seed) {
    auto q = build(ddqn_spec(32, 4), seed);
    torch::Tensor x = torch::rand({4, 3, 32, 32}) * 2 - 1;
    CHECK(q->forward(x).isfinite().all().item<bool>());
  }
}

// Central finite differences on a double-precision build; probes a
// subset of parameters across all layers.
TEST_CASE("built-network parameter gradients match finite differences") {
  auto net = build(ddqn_spec(16, 4), 9, torch::kFloat64);
  torch::Tensor x = (torch::rand({2, 3, 16, 16}, torch::kFloat64) * 2) - 1;
  torch::Tensor loss = net->forward(x).pow(2).sum();
  net->zero_grad();
  loss.backward();

  std::mt19937_64 rng(17);
  const double h = 1e-6;
  int checked = 0;
  for (auto& p : net->parameters()) {
    auto flat = p.view(-1);
    auto gflat = p.grad().view(-1);
    std::uniform_int_distribution<int64_t> ui(0, flat.size(0) - 1);
    for (int k = 0; k < 4; ++k) {
      const int64_t i = ui(rng);
      double orig;
      {
        torch::NoGradGuard ng;
        orig = flat[i].item<double>();
        flat[i] = orig + h;
      }
      const double up = net->forward(x).pow(2).sum().item<double>();
      {
        torch::NoGradGuard ng;
        flat[i] = orig - h;
      }
      const double dn = net->forward(x).pow(2).sum().item<double>();
      {
        torch::NoGradGuard ng;
        flat[i] = orig;
      }
      const double fd = (up - dn) / (2 * h);
      const double an = gflat[i].item<double>();
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      CHECK(std::abs(fd - an) / denom < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 40);
}
