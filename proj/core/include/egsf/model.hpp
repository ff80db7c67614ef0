// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "egsf/blocks.hpp"
#include "egsf/layer_shape.hpp"

namespace egsf {

/// Architecture dimensions. Defaults are the desk-scale configuration.
struct ModelConfig {
  std::size_t image_size = 32;
  std::size_t in_channels = 1;
  std::size_t stem_channels = 16;
  std::size_t kernel_size = 3;
  std::size_t conv_blocks = 2;
  std::size_t patch_size = 4;
  std::size_t token_dim = 32;
  std::size_t attention_blocks = 2;
  std::size_t num_classes = 2;
  std::size_t timesteps = 4;

  void validate() const;
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_tokens() const { return grid() * grid(); }
  std::size_t patch_features() const { return stem_channels * patch_size * patch_size; }

  bool operator==(const ModelConfig&) const = default;
};

struct ModelOutput {
  Var logits;     ///< [B, num_classes], mean over timesteps
  Var attention;  ///< [B, N, N], last attention block, mean over timesteps
  FiringStats firing;
};

/// Gaze-guidable spiking transformer classifier.
///
/// stem (Conv_p -> Conv_d -> BN, run once on the static image)
///   -> ConvSnnBlock x conv_blocks
///   -> SN -> patchify -> linear embed -> BN
///   -> SpikeAttentionBlock x attention_blocks
///   -> SN -> token mean -> linear head
class EgSpikeFormer {
 public:
  EgSpikeFormer(ModelConfig config, LifParams lif, std::uint64_t seed);

  /// images: [B, in_channels, H, W]. Uses config().timesteps unless
  /// `timesteps` is given. LIF membranes start at zero for every call.
  ModelOutput forward(Tape& tape, const Var& images, bool training,
                      std::optional<std::size_t> timesteps = std::nullopt) const;

  std::vector<NamedParam> parameters() const;
  std::vector<NamedParam> buffers() const;
  /// Parameters followed by buffers, in a stable order.
  std::vector<NamedParam> named_tensors() const;
  std::size_t parameter_count() const;

  /// Weighted layers in execution order, for operation counting.
  std::vector<LayerDescription> layer_descriptions() const;

  /// Fuses every RepConv for inference.
  void fuse();
  bool fused() const { return fused_; }

  const ModelConfig& config() const { return config_; }
  const LifParams& lif() const { return lif_; }
  void set_timesteps(std::size_t t);

  Var stem_pointwise;  ///< [stem_channels, in_channels, 1, 1]
  Var stem_depthwise;  ///< [stem_channels, 1, k, k]
  BatchNormLayer stem_bn;
  std::vector<ConvSnnBlock> conv_blocks;
  Var embed;  ///< [token_dim, patch_features]
  BatchNormLayer embed_bn;
  std::vector<SpikeAttentionBlock> attention_blocks;
  Var head_weight;  ///< [num_classes, token_dim]
  Var head_bias;    ///< [num_classes]

 private:
  ModelConfig config_;
  LifParams lif_;
  bool fused_ = false;
};

struct SingleImageOutput {
  Tensor logits;     ///< [num_classes]
  Tensor attention;  ///< [N, N]
  FiringStats firing;
};

/// Inference on one [C, H, W] image with `timesteps` steps of static coding.
SingleImageOutput model_forward(const EgSpikeFormer& model, const Tensor& image,
                                std::size_t timesteps);

}  // namespace egsf
