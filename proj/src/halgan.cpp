#include "hallab/halgan.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hallab/archive.hpp"

namespace hallab::halgan {

torch::Tensor ConfigNormalizer::normalize(const torch::Tensor& raw) const {
  torch::Tensor out = raw.clone();
  out.select(-1, 0).div_(pos_scale);
  out.select(-1, 1).div_(pos_scale);
  out.select(-1, 2).div_(yaw_scale);
  return out;
}

torch::Tensor ConfigNormalizer::denormalize(const torch::Tensor& normed) const {
  torch::Tensor out = normed.clone();
  out.select(-1, 0).mul_(pos_scale);
  out.select(-1, 1).mul_(pos_scale);
  out.select(-1, 2).mul_(yaw_scale);
  return out;
}

torch::Tensor sample_latent(int n, std::optional<at::Generator> gen) {
  if (n <= 0) throw std::invalid_argument("sample_latent: n <= 0");
  auto opts = torch::TensorOptions().dtype(torch::kFloat32);
  torch::Tensor z = torch::empty({n, kLatentDim}, opts);
  return z.normal_(1.0, 0.1, gen);
}

torch::Tensor apply_residual(const torch::Tensor& s,
                             const torch::Tensor& residual) {
  if (!s.sizes().equals(residual.sizes())) {
    throw std::invalid_argument("apply_residual: shape mismatch");
  }
  return torch::tanh(s + residual);
}

torch::Tensor critic_loss(const torch::Tensor& fake_scores,
                          const torch::Tensor& real_scores,
                          CriticLossForm form) {
  if (fake_scores.numel() == 0 || real_scores.numel() == 0) {
    throw std::invalid_argument("critic_loss: empty batch");
  }
  if (form == CriticLossForm::log_form) {
    return torch::log(fake_scores).mean() - torch::log(real_scores).mean();
  }
  return fake_scores.mean() - real_scores.mean();
}

torch::Tensor gradient_penalty(
    const std::function<torch::Tensor(const torch::Tensor&)>& critic,
    const torch::Tensor& real_batch, const torch::Tensor& fake_batch,
    std::optional<at::Generator> gen) {
  if (!real_batch.sizes().equals(fake_batch.sizes())) {
    throw std::invalid_argument("gradient_penalty: batch shape mismatch");
  }
  std::vector<int64_t> eshape(real_batch.dim(), 1);
  eshape[0] = real_batch.size(0);
  torch::Tensor eps =
      torch::empty(eshape, real_batch.options()).uniform_(0.0, 1.0, gen);
  torch::Tensor mid =
      (eps * real_batch + (1.0 - eps) * fake_batch).detach().requires_grad_(true);
  torch::Tensor scores = critic(mid);
  if (!scores.requires_grad()) {
    throw std::runtime_error("gradient_penalty: critic output has no gradient");
  }
  auto grads = torch::autograd::grad({scores.sum()}, {mid}, /*grad_outputs=*/{},
                                     /*retain_graph=*/true,
                                     /*create_graph=*/true,
                                     /*allow_unused=*/true);
  torch::Tensor g = grads[0].defined() ? grads[0] : torch::zeros_like(mid);
  torch::Tensor norms = g.flatten(1).norm(2, 1);
  return (norms - 1.0).pow(2).mean();
}

torch::Tensor generator_l2(const torch::Tensor& residual_batch) {
  if (residual_batch.numel() == 0) {
    throw std::invalid_argument("generator_l2: empty batch");
  }
  return residual_batch.flatten(1).norm(2, 1).mean();
}

torch::Tensor aux_loss(const torch::Tensor& predicted,
                       const torch::Tensor& target) {
  if (!predicted.sizes().equals(target.sizes())) {
    throw std::invalid_argument("aux_loss: shape mismatch");
  }
  return (predicted - target).pow(2).mean();
}

double total_loss(double l_d, double l_gp, double l_h, double l_a,
                  const LossWeights& w) {
  for (double v : {l_d, l_gp, l_h, l_a}) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("total_loss: non-finite component");
    }
  }
  return l_d + w.alpha * l_gp + w.beta * l_h + w.lambda * l_a;
}

torch::Tensor HalganModel::residual(const torch::Tensor& raw_configs,
                                    const torch::Tensor& latents) {
  auto cfg = normalizer.normalize(raw_configs).to(torch::kFloat32);
  return generator->forward_all({{"config", cfg}, {"latent", latents}})
      .at("residual");
}

HalganModel make_model(int image_size, int config_dim, uint64_t seed,
                       const ConfigNormalizer& normalizer) {
  HalganModel m;
  m.image_size = image_size;
  m.config_dim = config_dim;
  m.normalizer = normalizer;
  m.generator =
      netspec::build(netspec::generator_spec(image_size, config_dim), seed);
  m.discriminator = netspec::build(
      netspec::discriminator_spec(image_size, config_dim), seed + 1);
  // inference is the default; train() flips to train mode and back
  m.generator->eval();
  m.discriminator->eval();
  return m;
}

torch::Tensor hallucinate(HalganModel& model, const torch::Tensor& states,
                          const torch::Tensor& raw_configs,
                          const torch::Tensor& latents) {
  return apply_residual(states, model.residual(raw_configs, latents));
}

void HalganModel::save(const std::string& path) const {
  Archive a;
  for (const auto& p : generator->named_parameters()) {
    a.put("g.param." + p.key(), p.value());
  }
  for (const auto& p : generator->named_buffers()) {
    a.put("g.buffer." + p.key(), p.value());
  }
  for (const auto& p : discriminator->named_parameters()) {
    a.put("d.param." + p.key(), p.value());
  }
  for (const auto& p : discriminator->named_buffers()) {
    a.put("d.buffer." + p.key(), p.value());
  }
  torch::Tensor meta = torch::tensor(
      {static_cast<double>(image_size), static_cast<double>(config_dim),
       normalizer.pos_scale, normalizer.yaw_scale,
       static_cast<double>(train_steps), weights.alpha, weights.beta,
       weights.lambda},
      torch::kFloat64);
  a.put("meta", meta);
  a.save(path);
}

HalganModel HalganModel::load(const std::string& path) {
  Archive a = Archive::load(path);
  torch::Tensor meta_t = a.tensor("meta");
  auto meta = meta_t.accessor<double, 1>();
  ConfigNormalizer norm{meta[2], meta[3]};
  HalganModel m = make_model(static_cast<int>(meta[0]),
                             static_cast<int>(meta[1]), 0, norm);
  m.train_steps = static_cast<int64_t>(meta[4]);
  m.weights = LossWeights{meta[5], meta[6], meta[7]};
  torch::NoGradGuard ng;
  for (auto& p : m.generator->named_parameters()) {
    p.value().copy_(a.tensor("g.param." + p.key()));
  }
  for (auto& p : m.generator->named_buffers()) {
    p.value().copy_(a.tensor("g.buffer." + p.key()));
  }
  for (auto& p : m.discriminator->named_parameters()) {
    p.value().copy_(a.tensor("d.param." + p.key()));
  }
  for (auto& p : m.discriminator->named_buffers()) {
    p.value().copy_(a.tensor("d.buffer." + p.key()));
  }
  m.generator->eval();
  m.discriminator->eval();
  return m;
}

namespace {

torch::Tensor rand_indices(std::mt19937_64& rng, int64_t n, int count) {
  torch::Tensor idx = torch::empty({count}, torch::kInt64);
  auto acc = idx.accessor<int64_t, 1>();
  std::uniform_int_distribution<int64_t> u(0, n - 1);
  for (int i = 0; i < count; ++i) acc[i] = u(rng);
  return idx;
}

}  // namespace

HalganModel train(const worlds::SnapshotDataset& R,
                  const torch::Tensor& failed_states, int g_steps,
                  const TrainConfig& config,
                  const ConfigNormalizer& normalizer) {
  if (R.items.empty()) throw std::invalid_argument("halgan::train: empty R");
  if (failed_states.numel() == 0 || failed_states.dim() != 4) {
    throw std::invalid_argument("halgan::train: bad failed_states");
  }
  const int config_dim = R.config_dim();
  HalganModel model = make_model(R.image_size, config_dim, config.seed,
                                 normalizer);
  model.weights = config.weights;
  if (g_steps <= 0) return model;

  std::vector<torch::Tensor> imgs;
  torch::Tensor real_configs =
      torch::empty({static_cast<int64_t>(R.items.size()), config_dim},
                   torch::kFloat32);
  auto rc = real_configs.accessor<float, 2>();
  for (size_t i = 0; i < R.items.size(); ++i) {
    imgs.push_back(R.items[i].image);
    rc[i][0] = static_cast<float>(R.items[i].config.forward);
    rc[i][1] = static_cast<float>(R.items[i].config.lateral);
    rc[i][2] = static_cast<float>(R.items[i].config.dyaw);
    if (config_dim == 4) {
      rc[i][3] = R.items[i].config.held.value_or(false) ? 1.0f : 0.0f;
    }
  }
  torch::Tensor real_images = torch::stack(imgs);
  torch::Tensor real_configs_n = normalizer.normalize(real_configs);
  const int64_t n_real = real_images.size(0);
  const int64_t n_failed = failed_states.size(0);
  const int B = config.batch_size;

  torch::manual_seed(config.seed + 0x5eed);
  std::mt19937_64 irng(config.seed + 1);

  auto betas = std::make_tuple(config.adam_beta1, config.adam_beta2);
  torch::optim::Adam opt_g(model.generator->parameters(),
                           torch::optim::AdamOptions(config.lr).betas(betas));
  torch::optim::Adam opt_d(
      model.discriminator->parameters(),
      torch::optim::AdamOptions(config.lr).betas(betas));

  std::ofstream metrics;
  if (!config.metrics_path.empty()) {
    metrics.open(config.metrics_path);
    metrics << "step,l_d,l_gp,l_h,l_a,total\n";
  }

  model.generator->train();
  model.discriminator->train();
  auto critic_fn = [&](const torch::Tensor& x) {
    return model.discriminator->forward_all({{"image", x}}).at("score");
  };

  for (int step = 0; step < g_steps; ++step) {
    double last_ld = 0, last_lgp = 0, last_la = 0;
    for (int dit = 0; dit < config.d_iters_per_g; ++dit) {
      auto ir = rand_indices(irng, n_real, B);
      auto iff = rand_indices(irng, n_failed, B);
      auto ic = rand_indices(irng, n_real, B);
      torch::Tensor real = real_images.index_select(0, ir);
      torch::Tensor cfg_real_n = real_configs_n.index_select(0, ir);
      torch::Tensor cfg_fake_n = real_configs_n.index_select(0, ic);
      torch::Tensor fake;
      {
        torch::NoGradGuard ng;
        torch::Tensor l = sample_latent(B);
        torch::Tensor res =
            model.generator
                ->forward_all({{"config", cfg_fake_n}, {"latent", l}})
                .at("residual");
        fake = apply_residual(failed_states.index_select(0, iff), res);
      }
      auto out_r = model.discriminator->forward_all({{"image", real}});
      auto out_f = model.discriminator->forward_all({{"image", fake}});
      torch::Tensor l_d =
          critic_loss(out_f.at("score"), out_r.at("score"), config.critic_form);
      torch::Tensor l_gp = gradient_penalty(critic_fn, real, fake);
      torch::Tensor target_r =
          cfg_real_n + config.aux_noise_std * torch::randn_like(cfg_real_n);
      torch::Tensor target_f =
          cfg_fake_n + config.aux_noise_std * torch::randn_like(cfg_fake_n);
      // ACGAN-style: the aux head regresses the goal configuration on real
      // snapshots and on hallucinations with their intended configuration,
      // keeping its readings sensitive near the generator's output manifold.
      torch::Tensor l_a = 0.5 * (aux_loss(out_r.at("aux"), target_r) +
                                 aux_loss(out_f.at("aux"), target_f));
      torch::Tensor d_total = l_d + config.weights.alpha * l_gp +
                              config.weights.lambda * l_a;
      opt_d.zero_grad();
      d_total.backward();
      opt_d.step();
      last_ld = l_d.item<double>();
      last_lgp = l_gp.item<double>();
      last_la = l_a.item<double>();
    }

    auto iff = rand_indices(irng, n_failed, B);
    auto ic = rand_indices(irng, n_real, B);
    torch::Tensor cfg_n = real_configs_n.index_select(0, ic);
    torch::Tensor l = sample_latent(B);
    torch::Tensor res =
        model.generator->forward_all({{"config", cfg_n}, {"latent", l}})
            .at("residual");
    torch::Tensor fake =
        apply_residual(failed_states.index_select(0, iff), res);
    auto out = model.discriminator->forward_all({{"image", fake}});
    torch::Tensor l_h = generator_l2(res);
    torch::Tensor l_a_g = aux_loss(out.at("aux"), cfg_n);
    torch::Tensor g_total = -out.at("score").mean() +
                            config.weights.beta * l_h +
                            config.weights.lambda * l_a_g;
    opt_g.zero_grad();
    g_total.backward();
    opt_g.step();

    const double lh = l_h.item<double>();
    const double la = l_a_g.item<double>();
    const double tot = total_loss(last_ld, last_lgp, lh, la, config.weights);
    if (!std::isfinite(tot)) {
      throw std::runtime_error("halgan::train: loss diverged (non-finite)");
    }
    model.train_steps = step + 1;
    if (metrics.is_open() &&
        (step % config.log_every == 0 || step + 1 == g_steps)) {
      metrics << step << ',' << last_ld << ',' << last_lgp << ',' << lh << ','
              << la << ',' << tot << '\n';
    }
    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
        (step + 1) % config.checkpoint_every == 0) {
      model.save(config.checkpoint_path);
    }
  }
  model.generator->eval();
  model.discriminator->eval();
  return model;
}

}  // namespace hallab::halgan
