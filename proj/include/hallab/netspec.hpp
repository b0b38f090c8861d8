#pragma once

#include <torch/torch.h>

#include <map>
#include <string>
#include <vector>

namespace hallab::netspec {

enum class LayerKind {
  input,
  conv,
  upsample_conv,  // nearest x2 upsample followed by a stride-1 conv
  dense,
  batchnorm,
  reshape,
  multiply,
  concat,
};

enum class Activation { none, leaky_relu, tanh };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::string name;
  // conv / upsample_conv / batchnorm
  int kernel = 0;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  // dense / input / reshape
  int in_features = 0;
  int out_features = 0;
  bool bias = true;
  std::vector<int64_t> shape;  // reshape target (per sample), input shape
  Activation activation = Activation::none;
  std::string from;        // upstream layer name; empty = previous layer
  std::string other;       // second operand (multiply/concat): an input name
  std::string output_name; // non-empty marks a network output
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;
};

// Weight + bias parameters of one layer; batchnorm counts 4 per channel
// (scale, shift and both running statistics).
long param_count(const LayerSpec& layer);
long param_count(const NetworkSpec& spec);

// Fills in conv strides (choosing from {1, 2}) so that the flattened
// feature count at the first dense layer matches its declared in_features.
// Prefers downsampling in the earliest layers. Throws std::runtime_error
// naming the conflicting layers when no assignment works.
NetworkSpec infer_strides(const NetworkSpec& spec, int input_size);

// ---- Reference architectures ----------------------------------------------
NetworkSpec ddqn_spec(int image_size = 64, int n_actions = 4);
NetworkSpec ddpg_actor_spec(int image_size = 64, int n_actions = 2);
// The critic concatenates the action ahead of the first dense layer;
// the published total (33673) includes the 2-d action even though the
// per-row listing omits it from the Dense 1 count.
NetworkSpec ddpg_critic_spec(int image_size = 64, int action_dim = 2);
NetworkSpec generator_spec(int image_size = 64, int config_dim = 3,
                           int latent_dim = 128);
NetworkSpec discriminator_spec(int image_size = 64, int config_dim = 3);

// ---- Built networks -------------------------------------------------------
class BuiltNetImpl : public torch::nn::Module {
 public:
  BuiltNetImpl(NetworkSpec spec, torch::Dtype dtype);

  // Runs the network on named inputs; returns all named outputs.
  std::map<std::string, torch::Tensor> forward_all(
      const std::map<std::string, torch::Tensor>& inputs);

  // Convenience for single-input single-output networks.
  torch::Tensor forward(const torch::Tensor& x);

  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<torch::nn::Linear> linears_;
  std::vector<torch::nn::BatchNorm2d> bns_;
  std::vector<int> mod_index_;  // per layer: index into its module vector
};
TORCH_MODULE(BuiltNet);

// Deterministic build: seeds the global generator, constructs the modules,
// casts to dtype.
BuiltNet build(const NetworkSpec& spec, uint64_t init_seed,
               torch::Dtype dtype = torch::kFloat32);

}  // namespace hallab::netspec
