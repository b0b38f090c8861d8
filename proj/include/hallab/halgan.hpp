#pragma once

#include <torch/torch.h>

#include <functional>
#include <optional>
#include <string>

#include "hallab/netspec.hpp"
#include "hallab/worlds.hpp"

namespace hallab::halgan {

constexpr int kLatentDim = 128;

struct LossWeights {
  double alpha = 10.0;   // gradient penalty
  double beta = 1.0;     // residual L2
  double lambda = 10.0;  // auxiliary regression
};

enum class CriticLossForm { wasserstein, log_form };

// Conditioning configs are fed to the networks in O(1) units: positions
// divided by pos_scale (room half-size), yaw by pi, held untouched.
struct ConfigNormalizer {
  double pos_scale = 3.0;
  double yaw_scale = M_PI;

  torch::Tensor normalize(const torch::Tensor& raw) const;
  torch::Tensor denormalize(const torch::Tensor& normed) const;
};

torch::Tensor sample_latent(int n, std::optional<at::Generator> gen = {});

// Elementwise tanh(s + residual); both in matching shapes.
torch::Tensor apply_residual(const torch::Tensor& s,
                             const torch::Tensor& residual);

torch::Tensor critic_loss(const torch::Tensor& fake_scores,
                          const torch::Tensor& real_scores,
                          CriticLossForm form = CriticLossForm::wasserstein);

// WGAN-GP penalty on uniform interpolates; differentiable w.r.t. the
// critic's parameters (built with create_graph).
torch::Tensor gradient_penalty(
    const std::function<torch::Tensor(const torch::Tensor&)>& critic,
    const torch::Tensor& real_batch, const torch::Tensor& fake_batch,
    std::optional<at::Generator> gen = {});

// Mean over the batch of each residual image's L2 norm.
torch::Tensor generator_l2(const torch::Tensor& residual_batch);

// Mean squared error over batch and components.
torch::Tensor aux_loss(const torch::Tensor& predicted,
                       const torch::Tensor& target);

double total_loss(double l_d, double l_gp, double l_h, double l_a,
                  const LossWeights& w);

struct HalganModel {
  netspec::BuiltNet generator = nullptr;
  netspec::BuiltNet discriminator = nullptr;
  ConfigNormalizer normalizer;
  int image_size = 0;
  int config_dim = 0;
  int64_t train_steps = 0;
  LossWeights weights;

  // Residual for a batch of raw (unnormalized) configs and latents.
  torch::Tensor residual(const torch::Tensor& raw_configs,
                         const torch::Tensor& latents);

  void save(const std::string& path) const;
  static HalganModel load(const std::string& path);
};

HalganModel make_model(int image_size, int config_dim, uint64_t seed,
                       const ConfigNormalizer& normalizer);

// Hallucinates a batch of states per the additive rule.
torch::Tensor hallucinate(HalganModel& model, const torch::Tensor& states,
                          const torch::Tensor& raw_configs,
                          const torch::Tensor& latents);

struct TrainConfig {
  double lr = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  int d_iters_per_g = 5;
  int batch_size = 32;
  double aux_noise_std = 0.05;
  LossWeights weights;
  CriticLossForm critic_form = CriticLossForm::wasserstein;
  uint64_t seed = 0;
  std::string metrics_path;       // optional CSV of per-step losses
  int log_every = 50;
  std::string checkpoint_path;    // optional periodic checkpoint target
  int checkpoint_every = 0;
};

// Alternating WGAN-GP optimization; `failed_states` is an N x 3 x H x W
// batch of goal-free observations. Returns the model after `g_steps`
// generator updates. Throws on non-finite losses.
HalganModel train(const worlds::SnapshotDataset& R,
                  const torch::Tensor& failed_states, int g_steps,
                  const TrainConfig& config,
                  const ConfigNormalizer& normalizer);

}  // namespace hallab::halgan
