#pragma once

#include <torch/torch.h>

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hallab/netspec.hpp"
#include "hallab/replay.hpp"
#include "hallab/worlds.hpp"

namespace hallab::agents {

enum class Algorithm { ddqn, ddpg };

struct AgentConfig {
  Algorithm algorithm = Algorithm::ddqn;
  double gamma = 0.99;
  double lr = 1e-3;           // ddqn
  double lr_actor = 1e-5;     // ddpg
  double lr_critic = 1e-4;    // ddpg
  double eps_start = 1.0;
  double eps_end = 0.5;
  int64_t eps_anneal_steps = 100000;
  int target_update_interval = 1000;  // ddqn hard copy cadence
  double tau = 0.005;                 // ddpg soft update rate
  int batch_size = 32;
  int image_size = 64;
  int n_actions = worlds::kNumDiscreteActions;
  int action_dim = worlds::kContinuousActionDim;
  double noise_scale = 0.3;  // ddpg exploration noise std at eps = 1
  uint64_t seed = 0;
};

// Linear 1.0 -> 0.5 over the anneal span, constant after.
double epsilon(int64_t step, const AgentConfig& cfg);

class Agent {
 public:
  virtual ~Agent() = default;
  virtual worlds::Action act(const torch::Tensor& state, double eps,
                             std::mt19937_64& rng) = 0;
  // Runs one optimizer step on the minibatch; returns the primary loss
  // (TD loss for DDQN, critic loss for DDPG).
  virtual double update(const std::vector<replay::SampledTransition>& batch) = 0;
  virtual void save(const std::string& path) const = 0;
  virtual void load(const std::string& path) = 0;
};

class DdqnAgent : public Agent {
 public:
  explicit DdqnAgent(const AgentConfig& cfg);

  worlds::Action act(const torch::Tensor& state, double eps,
                     std::mt19937_64& rng) override;
  double update(const std::vector<replay::SampledTransition>& batch) override;
  void save(const std::string& path) const override;
  void load(const std::string& path) override;

  torch::Tensor q_values(const torch::Tensor& state);
  int64_t updates_done() const { return updates_; }

 private:
  AgentConfig cfg_;
  netspec::BuiltNet online_ = nullptr;
  netspec::BuiltNet target_ = nullptr;
  std::unique_ptr<torch::optim::Adam> opt_;
  int64_t updates_ = 0;
};

class DdpgAgent : public Agent {
 public:
  explicit DdpgAgent(const AgentConfig& cfg);

  worlds::Action act(const torch::Tensor& state, double eps,
                     std::mt19937_64& rng) override;
  double update(const std::vector<replay::SampledTransition>& batch) override;
  std::pair<double, double> update_losses(
      const std::vector<replay::SampledTransition>& batch);
  void save(const std::string& path) const override;
  void load(const std::string& path) override;

  torch::Tensor actor_output(const torch::Tensor& state);
  void set_tau(double tau) { cfg_.tau = tau; }

 private:
  AgentConfig cfg_;
  netspec::BuiltNet actor_ = nullptr, actor_target_ = nullptr;
  netspec::BuiltNet critic_ = nullptr, critic_target_ = nullptr;
  std::unique_ptr<torch::optim::Adam> opt_actor_, opt_critic_;
  int64_t updates_ = 0;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg);

}  // namespace hallab::agents
