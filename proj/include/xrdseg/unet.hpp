#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/nn.hpp>
#include <xrdseg/rng.hpp>
#include <xrdseg/tensor.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace xrdseg {

struct UNetConfig {
  int depth = 4;
  int base_channels = 8;
  double growth_rate = 2.0;
  int in_channels = 1;
  int out_classes = 2;
  std::uint64_t seed = 0;
};

// Feature channels at encoder level `level` (1-indexed): round-half-up of
// base * growth^(level-1). Non-integer growth rates land on the nearest
// channel count.
inline Index unet_level_channels(const UNetConfig& cfg, int level) {
  return static_cast<Index>(
      std::llround(cfg.base_channels * std::pow(cfg.growth_rate, level - 1)));
}

inline void validate_unet_config(const UNetConfig& cfg) {
  if (cfg.depth < 2) throw ConfigError("unet: depth must be >= 2");
  if (cfg.base_channels < 1) throw ConfigError("unet: base_channels must be >= 1");
  if (cfg.growth_rate <= 1.0) throw ConfigError("unet: growth_rate must be > 1");
  if (cfg.in_channels < 1) throw ConfigError("unet: in_channels must be >= 1");
  if (cfg.out_classes < 2) throw ConfigError("unet: out_classes must be >= 2");
  Index prev = 0;
  for (int i = 1; i <= cfg.depth; ++i) {
    const Index c = unet_level_channels(cfg, i);
    if (c <= prev) {
      throw ConfigError("unet: channel counts must increase per level; level " +
                        std::to_string(i) + " resolves to " + std::to_string(c));
    }
    prev = c;
  }
}

// Input tiles must be divisible by 2^(depth-1) to survive the pooling chain.
inline void validate_tile_size(const UNetConfig& cfg, Index side) {
  const Index multiple = Index(1) << (cfg.depth - 1);
  if (side % multiple != 0 || side < multiple) {
    throw ConfigError("unet: tile side " + std::to_string(side) +
                      " must be a positive multiple of " + std::to_string(multiple) +
                      " for depth " + std::to_string(cfg.depth));
  }
}

// Tunable encoder-decoder segmentation network. Each level applies
// [3x3 conv (pad 1) -> batchnorm -> ReLU] twice; levels are joined by 2x2
// max-pools on the way down and biased 2x2 stride-2 transposed convolutions
// (no norm, no activation) on the way up, with channel-wise skip
// concatenation ahead of each decoder level. A biased 1x1 convolution maps
// the last decoder level to class logits.
template <typename Scalar>
class UNetModel {
 public:
  using Storage = typename Tensor<Scalar>::Storage;

  struct Conv {
    Tensor<Scalar> weight, bias;
  };
  struct Norm {
    Tensor<Scalar> gamma, beta;
    Storage running_mean, running_var;
  };
  struct Level {
    Conv conv1;
    Norm norm1;
    Conv conv2;
    Norm norm2;
  };

  UNetConfig config;
  std::vector<Level> encoder;   // levels 1..d
  std::vector<Conv> upsample;   // stage s upscales level d-s to d-s-1
  std::vector<Level> decoder;   // stage s refines level d-s-1 (forward order)
  Conv head;

  // Learnable tensors in registration order (running stats excluded).
  std::vector<Tensor<Scalar>> parameters() const {
    std::vector<Tensor<Scalar>> out;
    const_cast<UNetModel*>(this)->visit_parameters(
        [&out](const std::string&, Tensor<Scalar>& t) { out.push_back(t); });
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    const_cast<UNetModel*>(this)->visit_parameters(
        [&out](const std::string& name, Tensor<Scalar>&) { out.push_back(name); });
    return out;
  }

  template <typename Fn>
  void visit_parameters(Fn&& fn) {
    for (int i = 0; i < config.depth; ++i) {
      const std::string p = "enc" + std::to_string(i + 1);
      visit_level(p, encoder[i], fn);
    }
    for (std::size_t s = 0; s < upsample.size(); ++s) {
      const int target = config.depth - 1 - static_cast<int>(s);
      const std::string up = "up" + std::to_string(target);
      fn(up + ".weight", upsample[s].weight);
      fn(up + ".bias", upsample[s].bias);
      visit_level("dec" + std::to_string(target), decoder[s], fn);
    }
    fn("head.weight", head.weight);
    fn("head.bias", head.bias);
  }

  // Non-learnable running statistics, keyed like the parameters.
  template <typename Fn>
  void visit_buffers(Fn&& fn) {
    auto norm = [&fn](const std::string& p, Norm& n) {
      fn(p + ".running_mean", n.running_mean);
      fn(p + ".running_var", n.running_var);
    };
    for (int i = 0; i < config.depth; ++i) {
      const std::string p = "enc" + std::to_string(i + 1);
      norm(p + ".norm1", encoder[i].norm1);
      norm(p + ".norm2", encoder[i].norm2);
    }
    for (std::size_t s = 0; s < decoder.size(); ++s) {
      const int target = config.depth - 1 - static_cast<int>(s);
      const std::string p = "dec" + std::to_string(target);
      norm(p + ".norm1", decoder[s].norm1);
      norm(p + ".norm2", decoder[s].norm2);
    }
  }

  void zero_grad() {
    visit_parameters([](const std::string&, Tensor<Scalar>& t) { t.zero_grad(); });
  }

 private:
  template <typename Fn>
  void visit_level(const std::string& prefix, Level& level, Fn&& fn) {
    fn(prefix + ".conv1.weight", level.conv1.weight);
    fn(prefix + ".conv1.bias", level.conv1.bias);
    fn(prefix + ".norm1.gamma", level.norm1.gamma);
    fn(prefix + ".norm1.beta", level.norm1.beta);
    fn(prefix + ".conv2.weight", level.conv2.weight);
    fn(prefix + ".conv2.bias", level.conv2.bias);
    fn(prefix + ".norm2.gamma", level.norm2.gamma);
    fn(prefix + ".norm2.beta", level.norm2.beta);
  }
};

namespace detail {

// Kaiming-style fan-in scaling, uniform draw in [-sqrt(6/fan_in), +).
template <typename Scalar>
void kaiming_uniform(Tensor<Scalar>& w, Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  auto& v = w.mutable_values();
  for (Index i = 0; i < v.size(); ++i) {
    v[i] = Scalar(rng.uniform(-bound, bound));
  }
}

template <typename Scalar>
typename UNetModel<Scalar>::Conv make_conv(Index cout, Index cin, Index k,
                                           std::uint64_t seed, std::uint64_t stream) {
  typename UNetModel<Scalar>::Conv conv;
  conv.weight = Tensor<Scalar>::zeros({cout, cin, k, k}, true);
  conv.bias = Tensor<Scalar>::zeros({1, cout, 1, 1}, true);
  Rng rng(derive_seed(seed, stream));
  kaiming_uniform(conv.weight, cin * k * k, rng);
  return conv;
}

// Transposed-conv weight layout is (cin, cout, 2, 2).
template <typename Scalar>
typename UNetModel<Scalar>::Conv make_upsample(Index cin, Index cout,
                                               std::uint64_t seed, std::uint64_t stream) {
  typename UNetModel<Scalar>::Conv conv;
  conv.weight = Tensor<Scalar>::zeros({cin, cout, 2, 2}, true);
  conv.bias = Tensor<Scalar>::zeros({1, cout, 1, 1}, true);
  Rng rng(derive_seed(seed, stream));
  kaiming_uniform(conv.weight, cin * 4, rng);
  return conv;
}

template <typename Scalar>
typename UNetModel<Scalar>::Norm make_norm(Index channels) {
  typename UNetModel<Scalar>::Norm norm;
  norm.gamma = Tensor<Scalar>::full({1, channels, 1, 1}, Scalar(1), true);
  norm.beta = Tensor<Scalar>::zeros({1, channels, 1, 1}, true);
  norm.running_mean = UNetModel<Scalar>::Storage::Zero(channels);
  norm.running_var = UNetModel<Scalar>::Storage::Ones(channels);
  return norm;
}

template <typename Scalar>
typename UNetModel<Scalar>::Level make_level(Index cin, Index cout,
                                             std::uint64_t seed, std::uint64_t& stream) {
  typename UNetModel<Scalar>::Level level;
  level.conv1 = make_conv<Scalar>(cout, cin, 3, seed, stream++);
  level.norm1 = make_norm<Scalar>(cout);
  level.conv2 = make_conv<Scalar>(cout, cout, 3, seed, stream++);
  level.norm2 = make_norm<Scalar>(cout);
  return level;
}

}  // namespace detail

template <typename Scalar>
UNetModel<Scalar> build_unet(const UNetConfig& cfg) {
  validate_unet_config(cfg);
  UNetModel<Scalar> model;
  model.config = cfg;
  std::uint64_t stream = 0;

  Index prev = cfg.in_channels;
  for (int i = 1; i <= cfg.depth; ++i) {
    const Index c = unet_level_channels(cfg, i);
    model.encoder.push_back(detail::make_level<Scalar>(prev, c, cfg.seed, stream));
    prev = c;
  }
  for (int target = cfg.depth - 1; target >= 1; --target) {
    const Index c_lo = unet_level_channels(cfg, target);
    const Index c_hi = unet_level_channels(cfg, target + 1);
    model.upsample.push_back(detail::make_upsample<Scalar>(c_hi, c_lo, cfg.seed, stream));
    ++stream;
    // skip concatenation doubles the channels entering the first conv
    model.decoder.push_back(detail::make_level<Scalar>(2 * c_lo, c_lo, cfg.seed, stream));
  }
  model.head = detail::make_conv<Scalar>(cfg.out_classes, unet_level_channels(cfg, 1),
                                         1, cfg.seed, stream++);
  return model;
}

template <typename Scalar>
Tensor<Scalar> unet_forward(UNetModel<Scalar>& model, const Tensor<Scalar>& batch,
                            bool train) {
  const UNetConfig& cfg = model.config;
  const Shape4 s = batch.shape();
  if (s.c != cfg.in_channels) {
    throw DataError("unet_forward: input has C=" + std::to_string(s.c) +
                    ", model expects " + std::to_string(cfg.in_channels));
  }
  validate_tile_size(cfg, s.h);
  validate_tile_size(cfg, s.w);

  auto block = [train](typename UNetModel<Scalar>::Level& level,
                       const Tensor<Scalar>& in) {
    Tensor<Scalar> h = conv2d(in, level.conv1.weight, level.conv1.bias, 1, 1);
    h = relu(batchnorm2d(h, level.norm1.gamma, level.norm1.beta,
                         level.norm1.running_mean, level.norm1.running_var, train));
    h = conv2d(h, level.conv2.weight, level.conv2.bias, 1, 1);
    return relu(batchnorm2d(h, level.norm2.gamma, level.norm2.beta,
                            level.norm2.running_mean, level.norm2.running_var, train));
  };

  std::vector<Tensor<Scalar>> skips;
  Tensor<Scalar> h = batch;
  for (int i = 0; i < cfg.depth; ++i) {
    if (i > 0) h = maxpool2(h);
    h = block(model.encoder[i], h);
    if (i < cfg.depth - 1) skips.push_back(h);
  }
  for (std::size_t stage = 0; stage < model.upsample.size(); ++stage) {
    h = conv2d_transposed(h, model.upsample[stage].weight, model.upsample[stage].bias);
    h = concat_channels(skips[skips.size() - 1 - stage], h);
    h = block(model.decoder[stage], h);
  }
  return conv2d(h, model.head.weight, model.head.bias, 1, 0);
}

// Eval-mode per-pixel argmax; class 1 marks artifact pixels, ties fall to 0.
template <typename Scalar>
MaskU8 predict_mask(UNetModel<Scalar>& model, const Tensor<Scalar>& tile) {
  const Shape4 s = tile.shape();
  if (s.n != 1) throw DataError("predict_mask: expected a single tile");
  Tensor<Scalar> logits = unet_forward(model, tile, /*train=*/false);
  LabelMap arg = argmax_classes(logits);
  MaskU8 mask(s.h, s.w);
  for (Index r = 0; r < s.h; ++r) {
    for (Index c = 0; c < s.w; ++c) mask(r, c) = arg(0, r, c);
  }
  return mask;
}

template <typename Scalar>
long count_parameters(const UNetModel<Scalar>& model) {
  long total = 0;
  for (const auto& p : model.parameters()) total += static_cast<long>(p.numel());
  return total;
}

}  // namespace xrdseg
