// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/model.hpp"

#include <cmath>

#include "egsf/errors.hpp"

namespace egsf {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("ModelConfig: ") + what);
  };
  require(image_size > 0 && in_channels > 0 && stem_channels > 0, "extents must be positive");
  require(kernel_size % 2 == 1, "kernel_size must be odd");
  require(patch_size > 0 && image_size % patch_size == 0, "image_size must be divisible by patch_size");
  require(token_dim > 0, "token_dim must be positive");
  require(num_classes >= 2, "num_classes must be at least 2");
  require(timesteps >= 1, "timesteps must be at least 1");
  require(attention_blocks >= 1, "at least one attention block is required");
}

EgSpikeFormer::EgSpikeFormer(ModelConfig config, LifParams lif, std::uint64_t seed)
    : config_(config), lif_(lif) {
  config_.validate();
  lif_.validate();
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  const std::size_t C = config_.stem_channels;
  const std::size_t k = config_.kernel_size;
  stem_pointwise = make_param(random_normal({C, config_.in_channels, 1, 1}, rng, 1.0));
  stem_depthwise = make_param(random_normal({C, 1, k, k}, rng, 1.0 / static_cast<double>(k)));
  stem_bn = BatchNormLayer(C, "stem.bn");
  for (std::size_t i = 0; i < config_.conv_blocks; ++i) {
    conv_blocks.emplace_back(C, k, rng, "blocks." + std::to_string(i));
  }
  const std::size_t F = config_.patch_features();
  const std::size_t d = config_.token_dim;
  embed = make_param(random_normal({d, F}, rng, 1.0 / std::sqrt(static_cast<double>(F))));
  embed_bn = BatchNormLayer(d, "tokenizer.bn");
  for (std::size_t i = 0; i < config_.attention_blocks; ++i) {
    attention_blocks.emplace_back(d, rng, "attn." + std::to_string(i));
  }
  head_weight = make_param(
      random_normal({config_.num_classes, d}, rng, 1.0 / std::sqrt(static_cast<double>(d))));
  head_bias = make_param(Tensor({config_.num_classes}, 0.0));
}

void EgSpikeFormer::set_timesteps(std::size_t t) {
  if (t == 0) throw ContractError("timesteps must be at least 1");
  config_.timesteps = t;
}

ModelOutput EgSpikeFormer::forward(Tape& tape, const Var& images, bool training,
                                   std::optional<std::size_t> timesteps) const {
  const std::size_t T = timesteps.value_or(config_.timesteps);
  if (T == 0) throw ContractError("model forward: timesteps must be at least 1");
  const auto& c = config_;
  if (images->rank() != 4 || images->dim(1) != c.in_channels || images->dim(2) != c.image_size ||
      images->dim(3) != c.image_size) {
    throw DimensionError("model forward: expected images [B, " + std::to_string(c.in_channels) +
                         ", " + std::to_string(c.image_size) + ", " + std::to_string(c.image_size) +
                         "], got " + shape_string(images->shape()));
  }
  if (training && fused_) throw ContractError("model forward: a fused model cannot train");

  ModelOutput out;
  ForwardContext ctx{tape, training, T, lif_, &out.firing};

  Var h = conv2d(tape, images, stem_pointwise, {ConvMode::kPointwise, 1, 0});
  h = conv2d(tape, h, stem_depthwise, {ConvMode::kDepthwise, 1, c.kernel_size / 2});
  h = stem_bn.forward(ctx, h, 1);

  Var x = repeat_leading(tape, h, T);
  for (const auto& block : conv_blocks) x = block.forward(ctx, x);

  Var s = spiking(ctx, x, "tokenizer.sn");
  Var tokens = linear(tape, patchify(tape, s, c.patch_size), embed);
  tokens = embed_bn.forward(ctx, tokens, 2);

  Var attention;
  for (const auto& block : attention_blocks) {
    AttentionResult r = block.forward(ctx, tokens);
    tokens = r.x;
    attention = r.attention;
  }

  Var hs = spiking(ctx, tokens, "head.sn");
  Var per_step = linear(tape, mean_axis1(tape, hs), head_weight, head_bias);
  out.logits = mean_leading(tape, per_step, T);
  out.attention = mean_leading(tape, attention, T);
  return out;
}

std::vector<NamedParam> EgSpikeFormer::parameters() const {
  std::vector<NamedParam> params, buffers;
  params.push_back({"stem.pw", stem_pointwise});
  params.push_back({"stem.dw", stem_depthwise});
  stem_bn.collect(params, buffers);
  for (const auto& b : conv_blocks) b.collect(params, buffers);
  params.push_back({"tokenizer.embed", embed});
  embed_bn.collect(params, buffers);
  for (const auto& b : attention_blocks) b.collect(params, buffers);
  params.push_back({"head.weight", head_weight});
  params.push_back({"head.bias", head_bias});
  return params;
}

std::vector<NamedParam> EgSpikeFormer::buffers() const {
  std::vector<NamedParam> params, buffers;
  stem_bn.collect(params, buffers);
  for (const auto& b : conv_blocks) b.collect(params, buffers);
  embed_bn.collect(params, buffers);
  for (const auto& b : attention_blocks) b.collect(params, buffers);
  return buffers;
}

std::vector<NamedParam> EgSpikeFormer::named_tensors() const {
  auto all = parameters();
  auto bufs = buffers();
  all.insert(all.end(), bufs.begin(), bufs.end());
  return all;
}

std::size_t EgSpikeFormer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.var->numel();
  return n;
}

std::vector<LayerDescription> EgSpikeFormer::layer_descriptions() const {
  const auto& c = config_;
  const std::size_t H = c.image_size, C = c.stem_channels, k = c.kernel_size;
  const std::size_t N = c.num_tokens(), d = c.token_dim;
  std::vector<LayerDescription> layers;
  layers.push_back({"stem.pw", ConvLayerShape{c.in_channels, C, H, H, 1, 1}, LayerInput::kStatic, ""});
  layers.push_back({"stem.dw", ConvLayerShape{C, C, H, H, k, C}, LayerInput::kStatic, ""});
  for (const auto& b : conv_blocks) {
    layers.push_back({b.name() + ".dw", ConvLayerShape{C, C, H, H, k, C}, LayerInput::kSpikes,
                      b.spike_name()});
    // Conv_p consumes the real-valued depthwise output.
    layers.push_back({b.name() + ".pw", ConvLayerShape{C, C, H, H, 1, 1}, LayerInput::kDense, ""});
  }
  layers.push_back({"tokenizer.embed", MatmulLayerShape{N, c.patch_features(), d},
                    LayerInput::kSpikes, "tokenizer.sn"});
  for (const auto& b : attention_blocks) {
    const std::string& n = b.name();
    for (const char* proj : {".q", ".k", ".v"}) {
      layers.push_back({n + proj, MatmulLayerShape{N, d, d}, LayerInput::kSpikes, n + ".sn_in"});
    }
    layers.push_back({n + ".qk", MatmulLayerShape{N, d, N}, LayerInput::kSpikes, n + ".sn_q"});
    layers.push_back({n + ".sv", MatmulLayerShape{N, N, d}, LayerInput::kSpikes, n + ".sn_v"});
    layers.push_back({n + ".proj", MatmulLayerShape{N, d, d}, LayerInput::kDense, ""});
  }
  layers.push_back({"head.fc", MatmulLayerShape{1, d, c.num_classes}, LayerInput::kSpikes, "head.sn"});
  return layers;
}

void EgSpikeFormer::fuse() {
  if (fused_) throw ContractError("model is already fused");
  for (auto& b : attention_blocks) b.fuse();
  fused_ = true;
}

SingleImageOutput model_forward(const EgSpikeFormer& model, const Tensor& image,
                                std::size_t timesteps) {
  if (image.rank() != 3) {
    throw DimensionError("model_forward: expected [C, H, W], got " + shape_string(image.shape()));
  }
  Shape batched{1};
  batched.insert(batched.end(), image.shape().begin(), image.shape().end());
  Tape tape(false);
  ModelOutput out = model.forward(tape, make_var(image.reshaped(batched)), false, timesteps);
  const std::size_t N = model.config().num_tokens();
  return {out.logits->reshaped({model.config().num_classes}), out.attention->reshaped({N, N}),
          std::move(out.firing)};
}

}  // namespace egsf
