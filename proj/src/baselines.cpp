#include "hallab/baselines.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hallab/archive.hpp"
#include "hallab/geometry.hpp"

namespace hallab::baselines {

VaeImpl::VaeImpl(int image_size, int latent_dim)
    : image_size_(image_size), latent_dim_(latent_dim) {
  namespace nn = torch::nn;
  const int s = image_size / 8;
  const int feat = 32 * s * s;
  encoder_ = nn::Sequential(
      nn::Conv2d(nn::Conv2dOptions(3, 16, 4).stride(2).padding(1)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
      nn::Conv2d(nn::Conv2dOptions(16, 32, 4).stride(2).padding(1)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
      nn::Conv2d(nn::Conv2dOptions(32, 32, 4).stride(2).padding(1)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
      nn::Flatten());
  fc_mu_ = nn::Linear(feat, latent_dim);
  fc_logvar_ = nn::Linear(feat, latent_dim);
  fc_dec_ = nn::Linear(latent_dim, feat);
  decoder_ = nn::Sequential(
      nn::ConvTranspose2d(nn::ConvTranspose2dOptions(32, 32, 4).stride(2).padding(1)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
      nn::ConvTranspose2d(nn::ConvTranspose2dOptions(32, 16, 4).stride(2).padding(1)),
      nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
      nn::ConvTranspose2d(nn::ConvTranspose2dOptions(16, 3, 4).stride(2).padding(1)),
      nn::Tanh());
  register_module("encoder", encoder_);
  register_module("fc_mu", fc_mu_);
  register_module("fc_logvar", fc_logvar_);
  register_module("fc_dec", fc_dec_);
  register_module("decoder", decoder_);
}

std::pair<torch::Tensor, torch::Tensor> VaeImpl::encode(const torch::Tensor& x) {
  auto h = encoder_->forward(x);
  return {fc_mu_(h), fc_logvar_(h)};
}

torch::Tensor VaeImpl::decode(const torch::Tensor& z) {
  const int s = image_size_ / 8;
  auto h = fc_dec_(z).reshape({z.size(0), 32, s, s});
  return decoder_->forward(h);
}

std::tuple<torch::Tensor, torch::Tensor, torch::Tensor> VaeImpl::forward(
    const torch::Tensor& x) {
  auto [mu, logvar] = encode(x);
  auto z = mu + torch::exp(0.5 * logvar) * torch::randn_like(mu);
  return {decode(z), mu, logvar};
}

VaeModel train_beta_vae(const torch::Tensor& images, int steps,
                        const VaeConfig& config) {
  if (images.numel() == 0 || images.dim() != 4) {
    throw std::invalid_argument("train_beta_vae: empty or malformed image set");
  }
  const int image_size = static_cast<int>(images.size(2));
  torch::manual_seed(config.seed);
  VaeModel m;
  m.net = Vae(image_size, config.latent_dim);
  m.image_size = image_size;
  m.latent_dim = config.latent_dim;
  m.beta = config.beta;
  if (steps <= 0) {
    m.net->eval();
    return m;
  }
  torch::optim::Adam opt(m.net->parameters(),
                         torch::optim::AdamOptions(config.lr));
  std::mt19937_64 irng(config.seed + 1);
  std::uniform_int_distribution<int64_t> u(0, images.size(0) - 1);
  std::ofstream metrics;
  if (!config.metrics_path.empty()) {
    metrics.open(config.metrics_path);
    metrics << "step,recon,kl,total\n";
  }
  m.net->train();
  for (int step = 0; step < steps; ++step) {
    torch::Tensor idx = torch::empty({config.batch_size}, torch::kInt64);
    auto acc = idx.accessor<int64_t, 1>();
    for (int i = 0; i < config.batch_size; ++i) acc[i] = u(irng);
    torch::Tensor batch = images.index_select(0, idx);
    auto [recon, mu, logvar] = m.net->forward(batch);
    torch::Tensor recon_loss = (recon - batch).pow(2).mean();
    torch::Tensor kl =
        (-0.5 * (1 + logvar - mu.pow(2) - logvar.exp())).mean();
    torch::Tensor loss = recon_loss + config.beta * kl;
    opt.zero_grad();
    loss.backward();
    opt.step();
    const double lv = loss.item<double>();
    if (!std::isfinite(lv)) {
      throw std::runtime_error("train_beta_vae: loss diverged");
    }
    if (metrics.is_open() && (step % config.log_every == 0 || step + 1 == steps)) {
      metrics << step << ',' << recon_loss.item<double>() << ','
              << kl.item<double>() << ',' << lv << '\n';
    }
  }
  m.net->eval();
  return m;
}

torch::Tensor embed(const VaeModel& v, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(1) != v.image_size) {
    throw std::invalid_argument("embed: image shape mismatch");
  }
  torch::NoGradGuard ng;
  Vae net = v.net;  // non-const holder onto the shared module
  auto [mu, logvar] = net->encode(image.unsqueeze(0));
  (void)logvar;
  return mu.squeeze(0);
}

double rig_reward(const torch::Tensor& state_img, const torch::Tensor& goal_img,
                  const VaeModel& v) {
  torch::Tensor d = embed(v, state_img) - embed(v, goal_img);
  return -kRigRewardScale * d.norm(2).item<double>();
}

void VaeModel::save(const std::string& path) const {
  Archive a;
  for (const auto& p : net->named_parameters()) a.put("param." + p.key(), p.value());
  for (const auto& p : net->named_buffers()) a.put("buffer." + p.key(), p.value());
  a.put("meta", torch::tensor({static_cast<double>(image_size),
                               static_cast<double>(latent_dim), beta},
                              torch::kFloat64));
  a.save(path);
}

VaeModel VaeModel::load(const std::string& path) {
  Archive a = Archive::load(path);
  torch::Tensor meta_t = a.tensor("meta");
  auto meta = meta_t.accessor<double, 1>();
  VaeModel m;
  m.image_size = static_cast<int>(meta[0]);
  m.latent_dim = static_cast<int>(meta[1]);
  m.beta = meta[2];
  m.net = Vae(m.image_size, m.latent_dim);
  torch::NoGradGuard ng;
  for (auto& p : m.net->named_parameters()) {
    p.value().copy_(a.tensor("param." + p.key()));
  }
  for (auto& p : m.net->named_buffers()) {
    p.value().copy_(a.tensor("buffer." + p.key()));
  }
  m.net->eval();
  return m;
}

void naive_her_relabel(std::vector<replay::SampledTransition>& batch,
                       const replay::ReplayBuffer& buffer, double p,
                       const RelabelThresholds& th, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> ud(0, th.d_max);
  for (auto& e : batch) {
    if (!buffer.contains_episode(e.ref.episode_id)) continue;
    if (!buffer.is_closed(e.ref.episode_id)) continue;
    if (!buffer.is_failed(e.ref.episode_id)) continue;
    const double c = coin(rng);
    const int d = ud(rng);
    if (c >= p) continue;
    const auto& goal = buffer.future_state(e.ref, d);
    e.t.r = geometry::config_close(e.t.pose_next, goal.pose, th.pos_tol,
                                   th.yaw_tol)
                ? 1.0
                : 0.0;
  }
}

void vae_her_relabel(std::vector<replay::SampledTransition>& batch,
                     const replay::ReplayBuffer& buffer, const VaeModel& v,
                     double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (auto& e : batch) {
    if (!buffer.contains_episode(e.ref.episode_id)) continue;
    if (!buffer.is_closed(e.ref.episode_id)) continue;
    if (!buffer.is_failed(e.ref.episode_id)) continue;
    if (coin(rng) >= p) continue;
    const int len = buffer.episode_length(e.ref.episode_id);
    const auto& last = buffer.future_state(e.ref, len);  // clamps to the end
    e.t.r = rig_reward(e.t.s_next, last.s_next, v);
  }
}

void rig_relabel(std::vector<replay::SampledTransition>& batch,
                 const torch::Tensor& goal_images, const VaeModel& v, double p,
                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int64_t> ug(0, goal_images.size(0) - 1);
  for (auto& e : batch) {
    const double c = coin(rng);
    const int64_t g = ug(rng);
    if (c >= p) continue;
    e.t.r += rig_reward(e.t.s_next, goal_images[g], v);
  }
}

}  // namespace hallab::baselines
