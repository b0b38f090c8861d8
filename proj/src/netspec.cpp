#include "hallab/netspec.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hallab::netspec {
namespace F = torch::nn::functional;

long param_count(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::conv:
    case LayerKind::upsample_conv:
      return static_cast<long>(layer.kernel) * layer.kernel *
                 layer.in_channels * layer.out_channels +
             (layer.bias ? layer.out_channels : 0);
    case LayerKind::dense:
      return static_cast<long>(layer.in_features) * layer.out_features +
             (layer.bias ? layer.out_features : 0);
    case LayerKind::batchnorm:
      return 4L * layer.out_channels;
    default:
      return 0;
  }
}

long param_count(const NetworkSpec& spec) {
  long total = 0;
  for (const auto& l : spec.layers) total += param_count(l);
  return total;
}

namespace {

struct Shape {
  // Either a feature vector (channels == 0) or a C x H x W map.
  int64_t channels = 0;
  int64_t spatial = 0;
  int64_t features = 0;

  int64_t flat() const {
    return channels > 0 ? channels * spatial * spatial : features;
  }
};

// Walks the layer list under the given strides; returns false when any
// declared dimension conflicts. On success fills `why` with nothing.
bool simulate(const NetworkSpec& spec, std::string* why) {
  std::map<std::string, Shape> shapes;
  Shape prev{};
  bool have_prev = false;
  auto upstream = [&](const LayerSpec& l) -> Shape {
    if (!l.from.empty()) {
      auto it = shapes.find(l.from);
      if (it == shapes.end()) throw std::runtime_error("unknown from: " + l.from);
      return it->second;
    }
    if (!have_prev) throw std::runtime_error("layer has no upstream: " + l.name);
    return prev;
  };
  for (const auto& l : spec.layers) {
    Shape out{};
    switch (l.kind) {
      case LayerKind::input: {
        if (l.shape.size() == 3) {
          out.channels = l.shape[0];
          out.spatial = l.shape[1];
        } else {
          out.features = l.in_features;
        }
        break;
      }
      case LayerKind::conv:
      case LayerKind::upsample_conv: {
        Shape in = upstream(l);
        if (in.channels != l.in_channels) {
          if (why) {
            std::ostringstream os;
            os << l.name << ": expects " << l.in_channels << " channels, got "
               << in.channels;
            *why = os.str();
          }
          return false;
        }
        out.channels = l.out_channels;
        int64_t s = in.spatial;
        if (l.kind == LayerKind::upsample_conv) s *= 2;
        if (l.stride == 2) {
          if (s < 2) {
            if (why) *why = l.name + ": cannot downsample 1x1 map";
            return false;
          }
          s = (s + 1) / 2;
        }
        out.spatial = s;
        break;
      }
      case LayerKind::dense: {
        Shape in = upstream(l);
        if (in.flat() != l.in_features) {
          if (why) {
            std::ostringstream os;
            os << l.name << ": declared in_features " << l.in_features
               << " but upstream provides " << in.flat();
            *why = os.str();
          }
          return false;
        }
        out.features = l.out_features;
        break;
      }
      case LayerKind::batchnorm: {
        out = upstream(l);
        break;
      }
      case LayerKind::reshape: {
        Shape in = upstream(l);
        int64_t n = 1;
        for (auto d : l.shape) n *= d;
        if (in.flat() != n) {
          if (why) *why = l.name + ": reshape element count mismatch";
          return false;
        }
        if (l.shape.size() == 3) {
          out.channels = l.shape[0];
          out.spatial = l.shape[1];
        } else {
          out.features = n;
        }
        break;
      }
      case LayerKind::multiply: {
        Shape in = upstream(l);
        Shape o = shapes.at(l.other);
        if (in.flat() != o.flat()) {
          if (why) *why = l.name + ": operand size mismatch";
          return false;
        }
        out = in;
        break;
      }
      case LayerKind::concat: {
        Shape in = upstream(l);
        Shape o = shapes.at(l.other);
        out.features = in.flat() + o.flat();
        break;
      }
    }
    shapes[l.name] = out;
    prev = out;
    have_prev = true;
  }
  return true;
}

}  // namespace

NetworkSpec infer_strides(const NetworkSpec& spec, int /*input_size*/) {
  std::vector<size_t> conv_idx;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::conv && l.stride == 0) conv_idx.push_back(i);
  }
  if (conv_idx.empty()) {
    std::string why;
    if (!simulate(spec, &why)) throw std::runtime_error("infer_strides: " + why);
    return spec;
  }
  const size_t n = conv_idx.size();
  // Try assignments in descending lexicographic order so downsampling
  // happens as early as possible.
  std::string last_why;
  for (int64_t mask = (1LL << n) - 1; mask >= 0; --mask) {
    NetworkSpec candidate = spec;
    for (size_t j = 0; j < n; ++j) {
      const bool down = (mask >> (n - 1 - j)) & 1;
      candidate.layers[conv_idx[j]].stride = down ? 2 : 1;
    }
    std::string why;
    if (simulate(candidate, &why)) return candidate;
    last_why = why;
  }
  throw std::runtime_error("infer_strides: no consistent stride assignment (" +
                           last_why + ")");
}

// ---- Reference architectures ----------------------------------------------
namespace {

NetworkSpec conv_trunk(const std::string& name, int image_size) {
  NetworkSpec s;
  s.name = name;
  s.layers.push_back({.kind = LayerKind::input,
                      .name = "image",
                      .shape = {3, image_size, image_size}});
  const int chans[4] = {4, 8, 16, 32};
  int in_c = 3;
  for (int i = 0; i < 4; ++i) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.name = "conv" + std::to_string(i + 1);
    l.kernel = 5;
    l.in_channels = in_c;
    l.out_channels = chans[i];
    l.stride = 0;  // inferred
    l.activation = Activation::leaky_relu;
    s.layers.push_back(l);
    in_c = chans[i];
  }
  return s;
}

int trunk_features(int image_size) {
  return 32 * (image_size / 16) * (image_size / 16);
}

void add_dense(NetworkSpec& s, const std::string& name, int in, int out,
               Activation act, const std::string& output_name = "",
               const std::string& from = "", bool bias = true) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.name = name;
  l.in_features = in;
  l.out_features = out;
  l.bias = bias;
  l.activation = act;
  l.from = from;
  l.output_name = output_name;
  s.layers.push_back(l);
}

}  // namespace

NetworkSpec ddqn_spec(int image_size, int n_actions) {
  NetworkSpec s = conv_trunk("ddqn", image_size);
  add_dense(s, "dense1", trunk_features(image_size), 32,
            Activation::leaky_relu);
  add_dense(s, "dense2", 32, n_actions, Activation::none, "q");
  return infer_strides(s, image_size);
}

NetworkSpec ddpg_actor_spec(int image_size, int n_actions) {
  NetworkSpec s = conv_trunk("ddpg_actor", image_size);
  add_dense(s, "dense1", trunk_features(image_size), 32,
            Activation::leaky_relu);
  add_dense(s, "dense2", 32, n_actions, Activation::tanh, "action");
  return infer_strides(s, image_size);
}

NetworkSpec ddpg_critic_spec(int image_size, int action_dim) {
  NetworkSpec s = conv_trunk("ddpg_critic", image_size);
  int dense_in = trunk_features(image_size);
  if (action_dim > 0) {
    s.layers.push_back({.kind = LayerKind::input,
                        .name = "action",
                        .in_features = action_dim});
    LayerSpec cat;
    cat.kind = LayerKind::concat;
    cat.name = "concat";
    cat.from = "conv4";
    cat.other = "action";
    s.layers.push_back(cat);
    dense_in += action_dim;
  }
  add_dense(s, "dense1", dense_in, 32, Activation::leaky_relu);
  add_dense(s, "dense2", 32, 1, Activation::none, "q");
  return infer_strides(s, image_size);
}

NetworkSpec generator_spec(int image_size, int config_dim, int latent_dim) {
  const int n_stages = static_cast<int>(std::lround(std::log2(image_size)));
  const std::vector<int> full = {64, 64, 64, 32, 32, 16};
  if (n_stages < 1 || n_stages > static_cast<int>(full.size())) {
    throw std::invalid_argument("generator_spec: unsupported image size");
  }
  std::vector<int> chans(full.end() - n_stages, full.end());

  NetworkSpec s;
  s.name = "generator";
  s.layers.push_back({.kind = LayerKind::input,
                      .name = "config",
                      .in_features = config_dim});
  // Conditioning projection: no bias, no activation.
  add_dense(s, "conditioning", config_dim, latent_dim, Activation::none, "",
            "", /*bias=*/false);
  s.layers.push_back({.kind = LayerKind::input,
                      .name = "latent",
                      .in_features = latent_dim});
  LayerSpec mul;
  mul.kind = LayerKind::multiply;
  mul.name = "modulated";
  mul.from = "conditioning";
  mul.other = "latent";
  s.layers.push_back(mul);
  LayerSpec rs;
  rs.kind = LayerKind::reshape;
  rs.name = "seed_map";
  rs.shape = {latent_dim, 1, 1};
  s.layers.push_back(rs);

  int in_c = latent_dim;
  for (int i = 0; i < n_stages; ++i) {
    LayerSpec up;
    up.kind = LayerKind::upsample_conv;
    up.name = "up" + std::to_string(i + 1);
    up.kernel = 4;
    up.in_channels = in_c;
    up.out_channels = chans[i];
    up.stride = 1;
    s.layers.push_back(up);
    LayerSpec bn;
    bn.kind = LayerKind::batchnorm;
    bn.name = "bn" + std::to_string(i + 1);
    bn.out_channels = chans[i];
    bn.activation = Activation::leaky_relu;
    s.layers.push_back(bn);
    in_c = chans[i];
  }
  LayerSpec c7;
  c7.kind = LayerKind::conv;
  c7.name = "refine";
  c7.kernel = 4;
  c7.in_channels = in_c;
  c7.out_channels = 8;
  c7.stride = 1;
  s.layers.push_back(c7);
  LayerSpec bn7;
  bn7.kind = LayerKind::batchnorm;
  bn7.name = "refine_bn";
  bn7.out_channels = 8;
  bn7.activation = Activation::leaky_relu;
  s.layers.push_back(bn7);
  LayerSpec c8;
  c8.kind = LayerKind::conv;
  c8.name = "to_rgb";
  c8.kernel = 4;
  c8.in_channels = 8;
  c8.out_channels = 3;
  c8.stride = 1;
  c8.activation = Activation::none;
  c8.output_name = "residual";
  s.layers.push_back(c8);

  std::string why;
  if (!simulate(s, &why)) throw std::runtime_error("generator_spec: " + why);
  return s;
}

NetworkSpec discriminator_spec(int image_size, int config_dim) {
  NetworkSpec s;
  s.name = "discriminator";
  s.layers.push_back({.kind = LayerKind::input,
                      .name = "image",
                      .shape = {3, image_size, image_size}});
  const int chans[7] = {32, 32, 32, 64, 64, 64, 128};
  int in_c = 3;
  for (int i = 0; i < 7; ++i) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.name = "conv" + std::to_string(i + 1);
    l.kernel = 4;
    l.in_channels = in_c;
    l.out_channels = chans[i];
    l.stride = 0;  // inferred
    l.activation = Activation::leaky_relu;
    s.layers.push_back(l);
    in_c = chans[i];
  }
  add_dense(s, "aux_head", 128, config_dim, Activation::none, "aux", "conv7");
  add_dense(s, "score_head", 128, 1, Activation::none, "score", "conv7");
  return infer_strides(s, image_size);
}

// ---- Built networks -------------------------------------------------------

BuiltNetImpl::BuiltNetImpl(NetworkSpec spec, torch::Dtype dtype)
    : spec_(std::move(spec)) {
  std::string why;
  if (!simulate(spec_, &why)) {
    throw std::runtime_error("build(" + spec_.name + "): " + why);
  }
  mod_index_.assign(spec_.layers.size(), -1);
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::upsample_conv: {
        auto conv = torch::nn::Conv2d(
            torch::nn::Conv2dOptions(l.in_channels, l.out_channels, l.kernel)
                .stride(l.kind == LayerKind::conv ? l.stride : 1)
                .bias(l.bias));
        register_module(l.name, conv);
        mod_index_[i] = static_cast<int>(convs_.size());
        convs_.push_back(conv);
        break;
      }
      case LayerKind::dense: {
        auto lin = torch::nn::Linear(
            torch::nn::LinearOptions(l.in_features, l.out_features)
                .bias(l.bias));
        register_module(l.name, lin);
        mod_index_[i] = static_cast<int>(linears_.size());
        linears_.push_back(lin);
        break;
      }
      case LayerKind::batchnorm: {
        auto bn = torch::nn::BatchNorm2d(l.out_channels);
        register_module(l.name, bn);
        mod_index_[i] = static_cast<int>(bns_.size());
        bns_.push_back(bn);
        break;
      }
      default:
        break;
    }
  }
  this->to(dtype);
}

namespace {

torch::Tensor pad_for_conv(const torch::Tensor& x, int kernel, int stride) {
  int pl, pr;
  if (stride == 1) {
    pl = (kernel - 1) / 2;
    pr = kernel - 1 - pl;
  } else {
    pl = pr = (kernel % 2 == 0) ? (kernel - 2) / 2 : (kernel - 1) / 2;
  }
  if (pl == 0 && pr == 0) return x;
  return F::pad(x, F::PadFuncOptions({pl, pr, pl, pr}));
}

torch::Tensor activate(const torch::Tensor& x, Activation a) {
  switch (a) {
    case Activation::leaky_relu:
      return torch::leaky_relu(x, 0.2);
    case Activation::tanh:
      return torch::tanh(x);
    case Activation::none:
      return x;
  }
  return x;
}

}  // namespace

std::map<std::string, torch::Tensor> BuiltNetImpl::forward_all(
    const std::map<std::string, torch::Tensor>& inputs) {
  std::map<std::string, torch::Tensor> values;
  std::map<std::string, torch::Tensor> outputs;
  torch::Tensor prev;
  auto upstream = [&](const LayerSpec& l) {
    if (!l.from.empty()) return values.at(l.from);
    return prev;
  };
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    torch::Tensor out;
    switch (l.kind) {
      case LayerKind::input: {
        auto it = inputs.find(l.name);
        if (it == inputs.end()) {
          throw std::invalid_argument("forward: missing input '" + l.name +
                                      "'");
        }
        out = it->second;
        break;
      }
      case LayerKind::conv: {
        out = convs_[mod_index_[i]](pad_for_conv(upstream(l), l.kernel,
                                                 l.stride));
        break;
      }
      case LayerKind::upsample_conv: {
        auto up = F::interpolate(
            upstream(l),
            F::InterpolateFuncOptions().scale_factor(std::vector<double>{2, 2})
                .mode(torch::kNearest));
        out = convs_[mod_index_[i]](pad_for_conv(up, l.kernel, 1));
        break;
      }
      case LayerKind::dense: {
        out = linears_[mod_index_[i]](upstream(l).flatten(1));
        break;
      }
      case LayerKind::batchnorm: {
        out = bns_[mod_index_[i]](upstream(l));
        break;
      }
      case LayerKind::reshape: {
        auto in = upstream(l);
        std::vector<int64_t> shape = {in.size(0)};
        shape.insert(shape.end(), l.shape.begin(), l.shape.end());
        out = in.reshape(shape);
        break;
      }
      case LayerKind::multiply: {
        out = upstream(l) * values.at(l.other);
        break;
      }
      case LayerKind::concat: {
        out = torch::cat({upstream(l).flatten(1), values.at(l.other).flatten(1)},
                         1);
        break;
      }
    }
    out = activate(out, l.activation);
    values[l.name] = out;
    prev = out;
    if (!l.output_name.empty()) outputs[l.output_name] = out;
  }
  return outputs;
}

torch::Tensor BuiltNetImpl::forward(const torch::Tensor& x) {
  std::string input_name;
  for (const auto& l : spec_.layers) {
    if (l.kind == LayerKind::input) {
      if (!input_name.empty()) {
        throw std::logic_error("forward: network has multiple inputs");
      }
      input_name = l.name;
    }
  }
  auto outs = forward_all({{input_name, x}});
  if (outs.size() != 1) {
    throw std::logic_error("forward: network has multiple outputs");
  }
  return outs.begin()->second;
}

BuiltNet build(const NetworkSpec& spec, uint64_t init_seed,
               torch::Dtype dtype) {
  torch::manual_seed(init_seed);
  return BuiltNet(spec, dtype);
}

}  // namespace hallab::netspec
