#include "hallab/agents.hpp"

#include <cmath>
#include <stdexcept>

#include "hallab/archive.hpp"

namespace hallab::agents {

double epsilon(int64_t step, const AgentConfig& cfg) {
  if (step < 0) throw std::invalid_argument("epsilon: negative step");
  if (cfg.eps_anneal_steps <= 0 || step >= cfg.eps_anneal_steps) {
    return cfg.eps_end;
  }
  const double f = static_cast<double>(step) / cfg.eps_anneal_steps;
  return cfg.eps_start + f * (cfg.eps_end - cfg.eps_start);
}

namespace {

struct Batch {
  torch::Tensor s, s_next, r, done;
  torch::Tensor a_discrete;  // int64
  torch::Tensor a_cont;      // float (B, dim)
};

Batch stack_batch(const std::vector<replay::SampledTransition>& batch,
                  bool discrete) {
  if (batch.empty()) throw std::invalid_argument("update: empty minibatch");
  const auto n = static_cast<int64_t>(batch.size());
  std::vector<torch::Tensor> s, sn;
  torch::Tensor r = torch::empty({n}, torch::kFloat32);
  torch::Tensor done = torch::empty({n}, torch::kFloat32);
  torch::Tensor ad = torch::empty({n}, torch::kInt64);
  torch::Tensor ac = torch::empty({n, 2}, torch::kFloat32);
  auto ra = r.accessor<float, 1>();
  auto da = done.accessor<float, 1>();
  auto ada = ad.accessor<int64_t, 1>();
  auto aca = ac.accessor<float, 2>();
  for (int64_t i = 0; i < n; ++i) {
    const auto& t = batch[i].t;
    s.push_back(t.s);
    sn.push_back(t.s_next);
    ra[i] = static_cast<float>(t.r);
    da[i] = t.terminal ? 1.0f : 0.0f;
    ada[i] = static_cast<int64_t>(std::lround(t.a.a0));
    aca[i][0] = static_cast<float>(t.a.a0);
    aca[i][1] = static_cast<float>(t.a.a1);
  }
  Batch b;
  b.s = torch::stack(s);
  b.s_next = torch::stack(sn);
  b.r = r;
  b.done = done;
  if (discrete) b.a_discrete = ad;
  b.a_cont = ac;
  return b;
}

void hard_copy(netspec::BuiltNet& dst, const netspec::BuiltNet& src) {
  torch::NoGradGuard ng;
  auto dp = dst->named_parameters();
  for (const auto& p : src->named_parameters()) {
    dp[p.key()].copy_(p.value());
  }
}

void soft_update(netspec::BuiltNet& dst, const netspec::BuiltNet& src,
                 double tau) {
  torch::NoGradGuard ng;
  auto dp = dst->named_parameters();
  for (const auto& p : src->named_parameters()) {
    auto& d = dp[p.key()];
    d.mul_(1.0 - tau).add_(p.value(), tau);
  }
}

void save_params(Archive& a, const std::string& prefix,
                 const netspec::BuiltNet& net) {
  for (const auto& p : net->named_parameters()) {
    a.put(prefix + p.key(), p.value());
  }
}

void load_params(const Archive& a, const std::string& prefix,
                 netspec::BuiltNet& net) {
  torch::NoGradGuard ng;
  for (auto& p : net->named_parameters()) {
    p.value().copy_(a.tensor(prefix + p.key()));
  }
}

}  // namespace

// ---- DDQN -----------------------------------------------------------------

DdqnAgent::DdqnAgent(const AgentConfig& cfg) : cfg_(cfg) {
  auto spec = netspec::ddqn_spec(cfg.image_size, cfg.n_actions);
  online_ = netspec::build(spec, cfg.seed);
  target_ = netspec::build(spec, cfg.seed);
  hard_copy(target_, online_);
  opt_ = std::make_unique<torch::optim::Adam>(
      online_->parameters(), torch::optim::AdamOptions(cfg.lr));
}

torch::Tensor DdqnAgent::q_values(const torch::Tensor& state) {
  torch::NoGradGuard ng;
  return online_->forward(state.unsqueeze(0)).squeeze(0);
}

worlds::Action DdqnAgent::act(const torch::Tensor& state, double eps,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> ua(0, cfg_.n_actions - 1);
  const double c = coin(rng);
  const int random_action = ua(rng);
  worlds::Action a;
  if (c < eps) {
    a.a0 = random_action;
    return a;
  }
  a.a0 = q_values(state).argmax().item<int64_t>();
  return a;
}

double DdqnAgent::update(const std::vector<replay::SampledTransition>& batch) {
  Batch b = stack_batch(batch, /*discrete=*/true);
  torch::Tensor target;
  {
    torch::NoGradGuard ng;
    torch::Tensor q_next_online = online_->forward(b.s_next);
    torch::Tensor best = q_next_online.argmax(1);
    torch::Tensor q_next_target = target_->forward(b.s_next);
    torch::Tensor bootstrap =
        q_next_target.gather(1, best.unsqueeze(1)).squeeze(1);
    target = b.r + cfg_.gamma * (1.0 - b.done) * bootstrap;
  }
  torch::Tensor q =
      online_->forward(b.s).gather(1, b.a_discrete.unsqueeze(1)).squeeze(1);
  torch::Tensor loss = (q - target).pow(2).mean();
  opt_->zero_grad();
  loss.backward();
  opt_->step();
  ++updates_;
  if (cfg_.target_update_interval > 0 &&
      updates_ % cfg_.target_update_interval == 0) {
    hard_copy(target_, online_);
  }
  return loss.item<double>();
}

void DdqnAgent::save(const std::string& path) const {
  Archive a;
  save_params(a, "online.", online_);
  save_params(a, "target.", target_);
  a.put("updates", torch::tensor(updates_));
  a.save(path);
}

void DdqnAgent::load(const std::string& path) {
  Archive a = Archive::load(path);
  load_params(a, "online.", online_);
  load_params(a, "target.", target_);
  updates_ = a.tensor("updates").item<int64_t>();
}

// ---- DDPG -----------------------------------------------------------------

DdpgAgent::DdpgAgent(const AgentConfig& cfg) : cfg_(cfg) {
  auto actor_spec = netspec::ddpg_actor_spec(cfg.image_size, cfg.action_dim);
  auto critic_spec = netspec::ddpg_critic_spec(cfg.image_size, cfg.action_dim);
  actor_ = netspec::build(actor_spec, cfg.seed);
  actor_target_ = netspec::build(actor_spec, cfg.seed);
  critic_ = netspec::build(critic_spec, cfg.seed + 1);
  critic_target_ = netspec::build(critic_spec, cfg.seed + 1);
  hard_copy(actor_target_, actor_);
  hard_copy(critic_target_, critic_);
  opt_actor_ = std::make_unique<torch::optim::Adam>(
      actor_->parameters(), torch::optim::AdamOptions(cfg.lr_actor));
  opt_critic_ = std::make_unique<torch::optim::Adam>(
      critic_->parameters(), torch::optim::AdamOptions(cfg.lr_critic));
}

torch::Tensor DdpgAgent::actor_output(const torch::Tensor& state) {
  torch::NoGradGuard ng;
  return actor_->forward(state.unsqueeze(0)).squeeze(0);
}

worlds::Action DdpgAgent::act(const torch::Tensor& state, double eps,
                              std::mt19937_64& rng) {
  torch::Tensor mu = actor_output(state);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double n0 = noise(rng);
  const double n1 = noise(rng);
  worlds::Action a;
  a.a0 = std::clamp(mu[0].item<double>() + eps * cfg_.noise_scale * n0, -1.0,
                    1.0);
  a.a1 = std::clamp(mu[1].item<double>() + eps * cfg_.noise_scale * n1, -1.0,
                    1.0);
  return a;
}

std::pair<double, double> DdpgAgent::update_losses(
    const std::vector<replay::SampledTransition>& batch) {
  Batch b = stack_batch(batch, /*discrete=*/false);
  torch::Tensor target;
  {
    torch::NoGradGuard ng;
    torch::Tensor a_next = actor_target_->forward(b.s_next);
    torch::Tensor q_next =
        critic_target_
            ->forward_all({{"image", b.s_next}, {"action", a_next}})
            .at("q")
            .squeeze(1);
    target = b.r + cfg_.gamma * (1.0 - b.done) * q_next;
  }
  torch::Tensor q = critic_
                        ->forward_all({{"image", b.s}, {"action", b.a_cont}})
                        .at("q")
                        .squeeze(1);
  torch::Tensor critic_loss = (q - target).pow(2).mean();
  opt_critic_->zero_grad();
  critic_loss.backward();
  opt_critic_->step();

  torch::Tensor a_pred = actor_->forward(b.s);
  torch::Tensor actor_loss =
      -critic_->forward_all({{"image", b.s}, {"action", a_pred}})
           .at("q")
           .mean();
  opt_actor_->zero_grad();
  actor_loss.backward();
  opt_actor_->step();

  soft_update(actor_target_, actor_, cfg_.tau);
  soft_update(critic_target_, critic_, cfg_.tau);
  ++updates_;
  return {critic_loss.item<double>(), actor_loss.item<double>()};
}

double DdpgAgent::update(const std::vector<replay::SampledTransition>& batch) {
  return update_losses(batch).first;
}

void DdpgAgent::save(const std::string& path) const {
  Archive a;
  save_params(a, "actor.", actor_);
  save_params(a, "actor_target.", actor_target_);
  save_params(a, "critic.", critic_);
  save_params(a, "critic_target.", critic_target_);
  a.put("updates", torch::tensor(updates_));
  a.save(path);
}

void DdpgAgent::load(const std::string& path) {
  Archive a = Archive::load(path);
  load_params(a, "actor.", actor_);
  load_params(a, "actor_target.", actor_target_);
  load_params(a, "critic.", critic_);
  load_params(a, "critic_target.", critic_target_);
  updates_ = a.tensor("updates").item<int64_t>();
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg) {
  if (cfg.algorithm == Algorithm::ddqn) {
    return std::make_unique<DdqnAgent>(cfg);
  }
  return std::make_unique<DdpgAgent>(cfg);
}

}  // namespace hallab::agents
