#pragma once

#include <torch/torch.h>

#include <utility>
#include <vector>

#include "bradcn/config.hpp"
#include "bradcn/types.hpp"

namespace bradcn {

/// Returns a group count that divides `channels` (at most 8).
int64_t norm_groups(int64_t channels);

/// Convolutional feature extractor. One 2x downsampling stage per entry of
/// backbone_channels, each followed by a residual unit with GroupNorm, so the
/// default four-stage profile outputs stride-16 features. A shallow stand-in
/// for the full-scale residual backbone with the same stride contract.
struct BackboneImpl : torch::nn::Module {
  explicit BackboneImpl(const ModelConfig& cfg);

  torch::Tensor forward(const ImageTensor& img);

  int64_t out_channels() const { return out_channels_; }
  int64_t stride() const { return stride_; }

  std::vector<torch::nn::Conv2d> down;
  std::vector<torch::nn::GroupNorm> down_norm;
  std::vector<torch::nn::Conv2d> res_a, res_b;
  std::vector<torch::nn::GroupNorm> res_a_norm, res_b_norm;

 private:
  int64_t out_channels_ = 0;
  int64_t stride_ = 1;
};
TORCH_MODULE(Backbone);

/// Splits a feature raster into non-overlapping patches, flattens them into
/// tokens, prepends a learned class token, and adds positional embeddings.
/// Positional embeddings are stored on a fixed base grid and resized to the
/// runtime grid by area interpolation, so any stride-divisible input works.
struct TokenizerImpl : torch::nn::Module {
  TokenizerImpl(int64_t in_channels, const ModelConfig& cfg);

  TokenSequence forward(const torch::Tensor& features);

  /// Patch tokens only, before class token and positional add. Row-major
  /// patch order.
  torch::Tensor embed_patches(const torch::Tensor& features);

  torch::nn::Conv2d patch_proj{nullptr};
  torch::Tensor class_token;  // (1, 1, embed_dim)
  torch::Tensor pos_embed;    // (1, kPosBase*kPosBase + 1, embed_dim)

  static constexpr int64_t kPosBase = 16;

 private:
  int64_t patch_size_;
  int64_t embed_dim_;
};
TORCH_MODULE(Tokenizer);

/// Pre-norm multi-head self-attention + MLP block with residual connections.
struct TransformerBlockImpl : torch::nn::Module {
  TransformerBlockImpl(int64_t dim, int64_t heads);

  torch::Tensor forward(const torch::Tensor& tokens);

  /// Forward pass that also returns the attention probabilities,
  /// shape (batch, heads, N, N). Rows sum to 1.
  std::pair<torch::Tensor, torch::Tensor> forward_with_attention(const torch::Tensor& tokens);

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear qkv{nullptr}, out_proj{nullptr}, fc1{nullptr}, fc2{nullptr};

 private:
  int64_t heads_;
  int64_t head_dim_;
};
TORCH_MODULE(TransformerBlock);

/// Drops the class token, folds patch tokens back into a raster at the token
/// stride, and resamples to each configured stride: transposed conv for
/// upscaling, strided conv for downscaling, 1x1 projection to fusion_channels
/// first.
struct ReassembleImpl : torch::nn::Module {
  explicit ReassembleImpl(const ModelConfig& cfg);

  MultiScaleFeatures forward(const TokenSequence& t);

  std::vector<torch::nn::Conv2d> proj;                 // embed -> fusion, 1x1
  std::vector<torch::nn::ConvTranspose2d> upsample;    // per level needing upscale
  std::vector<torch::nn::Conv2d> downsample;           // per level needing downscale

 private:
  std::vector<int64_t> strides_;
  int64_t token_stride_;
  std::vector<int64_t> up_index_, down_index_;  // -1 where unused
};
TORCH_MODULE(Reassemble);

/// Progressive decoder: the coarsest level is upsampled 2x and merged with the
/// next-finer level through a residual conv unit, repeated down to the finest
/// level. Conv units are bias-free, so all-zero features stay all-zero.
struct FusionDecoderImpl : torch::nn::Module {
  explicit FusionDecoderImpl(const ModelConfig& cfg);

  torch::Tensor forward(const MultiScaleFeatures& ms);

  std::vector<torch::nn::Conv2d> rcu_a, rcu_b;
};
TORCH_MODULE(FusionDecoder);

/// Bilinear upsample to the target resolution, 3x3 conv to 3 channels,
/// sigmoid into [0, 1].
struct RenderHeadImpl : torch::nn::Module {
  explicit RenderHeadImpl(const ModelConfig& cfg);

  ImageTensor forward(const torch::Tensor& features, std::pair<int64_t, int64_t> target_hw);

  torch::nn::Conv2d out_conv{nullptr};
};
TORCH_MODULE(RenderHead);

/// The full render path: backbone -> tokens -> transformer stack ->
/// multi-scale reassembly (the encoder output E_o) -> fusion decoder ->
/// conv head. encode/decode are exposed separately so the hybrid wiring can
/// inject adapted depth and error features between them.
struct RenderNetImpl : torch::nn::Module {
  explicit RenderNetImpl(const ModelConfig& cfg);

  /// Encoder output E_o for a validated, stride-divisible image.
  MultiScaleFeatures encode(const ImageTensor& img);

  /// Fusion decoder + head on (possibly fused) multi-scale features.
  ImageTensor decode(const MultiScaleFeatures& features, std::pair<int64_t, int64_t> target_hw);

  /// Pure render path at fixed resolution: decode(encode(img)) at input dims.
  ImageTensor forward(const ImageTensor& img);

  Backbone backbone{nullptr};
  Tokenizer tokenizer{nullptr};
  std::vector<TransformerBlock> blocks;
  Reassemble reassemble{nullptr};
  FusionDecoder fusion{nullptr};
  RenderHead head{nullptr};
};
TORCH_MODULE(RenderNet);

}  // namespace bradcn
