#pragma once

#include <torch/torch.h>

#include <random>
#include <string>
#include <vector>

#include "hallab/replay.hpp"

namespace hallab::baselines {

struct VaeConfig {
  int latent_dim = 64;
  double beta = 5.0;
  double lr = 1e-4;
  int batch_size = 32;
  uint64_t seed = 0;
  std::string metrics_path;
  int log_every = 50;
};

class VaeImpl : public torch::nn::Module {
 public:
  VaeImpl(int image_size, int latent_dim);

  std::pair<torch::Tensor, torch::Tensor> encode(const torch::Tensor& x);
  torch::Tensor decode(const torch::Tensor& z);
  // Returns (reconstruction, mu, logvar).
  std::tuple<torch::Tensor, torch::Tensor, torch::Tensor> forward(
      const torch::Tensor& x);

  int image_size() const { return image_size_; }
  int latent_dim() const { return latent_dim_; }

 private:
  int image_size_;
  int latent_dim_;
  torch::nn::Sequential encoder_ = nullptr;
  torch::nn::Linear fc_mu_ = nullptr, fc_logvar_ = nullptr, fc_dec_ = nullptr;
  torch::nn::Sequential decoder_ = nullptr;
};
TORCH_MODULE(Vae);

struct VaeModel {
  Vae net = nullptr;
  int image_size = 0;
  int latent_dim = 0;
  double beta = 5.0;

  void save(const std::string& path) const;
  static VaeModel load(const std::string& path);
};

// Evidence-bound training (MSE reconstruction + beta * KL to unit prior)
// on a mixed stack of near-goal and failed-state images.
VaeModel train_beta_vae(const torch::Tensor& images, int steps,
                        const VaeConfig& config);

// Encoder mean for a single 3xHxW image.
torch::Tensor embed(const VaeModel& v, const torch::Tensor& image);

// -0.02 * L2 distance between the two embeddings.
double rig_reward(const torch::Tensor& state_img, const torch::Tensor& goal_img,
                  const VaeModel& v);

constexpr double kRigRewardScale = 0.02;

struct RelabelThresholds {
  int d_max = 16;
  double pos_tol = 0.4;
  double yaw_tol = 0.3;
};

// Rewards end-of-snippet closeness on failed episodes without touching
// any pixels.
void naive_her_relabel(std::vector<replay::SampledTransition>& batch,
                       const replay::ReplayBuffer& buffer, double p,
                       const RelabelThresholds& th, std::mt19937_64& rng);

// Dense VAE-distance reward against the episode-final image.
void vae_her_relabel(std::vector<replay::SampledTransition>& batch,
                     const replay::ReplayBuffer& buffer, const VaeModel& v,
                     double p, std::mt19937_64& rng);

// Dense VAE-distance reward against a random near-goal image.
void rig_relabel(std::vector<replay::SampledTransition>& batch,
                 const torch::Tensor& goal_images, const VaeModel& v, double p,
                 std::mt19937_64& rng);

}  // namespace hallab::baselines
