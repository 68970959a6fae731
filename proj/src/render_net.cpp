#include "bradcn/render_net.hpp"

#include <cmath>
#include <sstream>

namespace bradcn {

namespace F = torch::nn::functional;

int64_t norm_groups(int64_t channels) {
  for (int64_t g = 8; g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Backbone

BackboneImpl::BackboneImpl(const ModelConfig& cfg) {
  int64_t in = 3;
  for (size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
    const int64_t out = cfg.backbone_channels[i];
    down.push_back(register_module(
        "down" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1))));
    down_norm.push_back(register_module("down_norm" + std::to_string(i),
                                        torch::nn::GroupNorm(norm_groups(out), out)));
    res_a.push_back(register_module(
        "res_a" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(out, out, 3).padding(1))));
    res_a_norm.push_back(register_module("res_a_norm" + std::to_string(i),
                                         torch::nn::GroupNorm(norm_groups(out), out)));
    res_b.push_back(register_module(
        "res_b" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(out, out, 3).padding(1))));
    res_b_norm.push_back(register_module("res_b_norm" + std::to_string(i),
                                         torch::nn::GroupNorm(norm_groups(out), out)));
    in = out;
    stride_ *= 2;
  }
  out_channels_ = in;
}

torch::Tensor BackboneImpl::forward(const ImageTensor& img) {
  if (img.height() % stride_ != 0 || img.width() % stride_ != 0) {
    std::ostringstream msg;
    msg << "backbone input " << img.height() << "x" << img.width()
        << " not divisible by stride " << stride_;
    throw ShapeError(msg.str());
  }
  torch::Tensor x = img.data;
  for (size_t i = 0; i < down.size(); ++i) {
    x = torch::relu(down_norm[i](down[i](x)));
    auto r = torch::relu(res_a_norm[i](res_a[i](x)));
    r = res_b_norm[i](res_b[i](r));
    x = torch::relu(x + r);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Tokenizer

TokenizerImpl::TokenizerImpl(int64_t in_channels, const ModelConfig& cfg)
    : patch_size_(cfg.patch_size), embed_dim_(cfg.embed_dim) {
  patch_proj = register_module(
      "patch_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, embed_dim_, patch_size_)
                                          .stride(patch_size_)));
  class_token = register_parameter("class_token", torch::zeros({1, 1, embed_dim_}));
  pos_embed = register_parameter(
      "pos_embed", torch::randn({1, kPosBase * kPosBase + 1, embed_dim_}) * 0.02);
}

torch::Tensor TokenizerImpl::embed_patches(const torch::Tensor& features) {
  if (features.dim() != 4 || features.numel() == 0) {
    throw ShapeError("tokenizer expects a nonempty (B, C, H, W) raster");
  }
  if (features.size(2) % patch_size_ != 0 || features.size(3) % patch_size_ != 0) {
    throw ShapeError("feature raster dims must be divisible by patch_size");
  }
  auto x = patch_proj(features);              // (B, D, h, w)
  return x.flatten(2).transpose(1, 2);        // (B, h*w, D), row-major patches
}

TokenSequence TokenizerImpl::forward(const torch::Tensor& features) {
  auto patches = embed_patches(features);
  const int64_t grid_h = features.size(2) / patch_size_;
  const int64_t grid_w = features.size(3) / patch_size_;
  const int64_t b = features.size(0);

  auto cls = class_token.expand({b, 1, embed_dim_});
  auto tokens = torch::cat({cls, patches}, 1);

  // Resize the base positional grid to the runtime grid. Area interpolation
  // keeps every base cell contributing for both up- and downscaling.
  auto grid = pos_embed.index({torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None)})
                  .transpose(1, 2)
                  .reshape({1, embed_dim_, kPosBase, kPosBase});
  auto resized = F::adaptive_avg_pool2d(grid, F::AdaptiveAvgPool2dFuncOptions({grid_h, grid_w}));
  auto pos_patches = resized.flatten(2).transpose(1, 2);  // (1, h*w, D)
  auto pos_cls = pos_embed.index({torch::indexing::Slice(), torch::indexing::Slice(0, 1)});
  auto pos = torch::cat({pos_cls, pos_patches}, 1);

  TokenSequence seq;
  seq.tokens = tokens + pos;
  seq.grid_h = grid_h;
  seq.grid_w = grid_w;
  return seq;
}

// ---------------------------------------------------------------------------
// Transformer block

TransformerBlockImpl::TransformerBlockImpl(int64_t dim, int64_t heads)
    : heads_(heads), head_dim_(dim / heads) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  qkv = register_module("qkv", torch::nn::Linear(dim, dim * 3));
  out_proj = register_module("out_proj", torch::nn::Linear(dim, dim));
  fc1 = register_module("fc1", torch::nn::Linear(dim, dim * 4));
  fc2 = register_module("fc2", torch::nn::Linear(dim * 4, dim));
}

std::pair<torch::Tensor, torch::Tensor> TransformerBlockImpl::forward_with_attention(
    const torch::Tensor& tokens) {
  const int64_t b = tokens.size(0);
  const int64_t n = tokens.size(1);

  auto h = norm1(tokens);
  auto qkv_out = qkv(h).reshape({b, n, 3, heads_, head_dim_}).permute({2, 0, 3, 1, 4});
  auto q = qkv_out[0];  // (B, heads, N, head_dim)
  auto k = qkv_out[1];
  auto v = qkv_out[2];

  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim_));
  auto attn = torch::softmax(scores, -1);
  auto mixed = torch::matmul(attn, v)                       // (B, heads, N, head_dim)
                   .transpose(1, 2)
                   .reshape({b, n, heads_ * head_dim_});
  auto x = tokens + out_proj(mixed);

  auto m = norm2(x);
  x = x + fc2(torch::gelu(fc1(m)));
  return {x, attn};
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& tokens) {
  return forward_with_attention(tokens).first;
}

// ---------------------------------------------------------------------------
// Reassemble

ReassembleImpl::ReassembleImpl(const ModelConfig& cfg)
    : strides_(cfg.reassemble_strides), token_stride_(cfg.token_stride()) {
  for (size_t i = 0; i < strides_.size(); ++i) {
    proj.push_back(register_module(
        "proj" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.embed_dim, cfg.fusion_channels, 1))));
    const int64_t s = strides_[i];
    if (s < token_stride_) {
      if (token_stride_ % s != 0) throw ConfigError("reassemble stride must divide token stride");
      const int64_t f = token_stride_ / s;
      up_index_.push_back(static_cast<int64_t>(upsample.size()));
      down_index_.push_back(-1);
      upsample.push_back(register_module(
          "up" + std::to_string(i),
          torch::nn::ConvTranspose2d(
              torch::nn::ConvTranspose2dOptions(cfg.fusion_channels, cfg.fusion_channels, f)
                  .stride(f))));
    } else if (s > token_stride_) {
      if (s % token_stride_ != 0) throw ConfigError("token stride must divide reassemble stride");
      const int64_t f = s / token_stride_;
      up_index_.push_back(-1);
      down_index_.push_back(static_cast<int64_t>(downsample.size()));
      downsample.push_back(register_module(
          "down" + std::to_string(i),
          torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.fusion_channels, cfg.fusion_channels, f)
                               .stride(f))));
    } else {
      up_index_.push_back(-1);
      down_index_.push_back(-1);
    }
  }
}

MultiScaleFeatures ReassembleImpl::forward(const TokenSequence& t) {
  if (t.tokens.dim() != 3 || t.count() != t.grid_h * t.grid_w + 1) {
    throw ShapeError("token sequence inconsistent with its patch grid");
  }
  using torch::indexing::Slice;
  // Class token dropped: it has no decoding role here.
  auto patches = t.tokens.index({Slice(), Slice(1, torch::indexing::None)});
  auto raster = patches.transpose(1, 2).reshape({t.batch(), t.dim(), t.grid_h, t.grid_w});

  MultiScaleFeatures out;
  out.strides = strides_;
  for (size_t i = 0; i < strides_.size(); ++i) {
    auto x = proj[i](raster);
    if (up_index_[i] >= 0) x = upsample[up_index_[i]](x);
    if (down_index_[i] >= 0) x = downsample[down_index_[i]](x);
    out.levels.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fusion decoder

FusionDecoderImpl::FusionDecoderImpl(const ModelConfig& cfg) {
  const int64_t c = cfg.fusion_channels;
  const size_t merges = cfg.reassemble_strides.size() > 0 ? cfg.reassemble_strides.size() - 1 : 0;
  for (size_t i = 0; i < merges; ++i) {
    rcu_a.push_back(register_module(
        "rcu_a" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 3).padding(1).bias(false))));
    rcu_b.push_back(register_module(
        "rcu_b" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 3).padding(1).bias(false))));
  }
}

torch::Tensor FusionDecoderImpl::forward(const MultiScaleFeatures& ms) {
  if (ms.levels.empty()) throw ShapeError("fusion decoder needs at least one level");
  torch::Tensor x = ms.levels.back();
  for (int64_t i = static_cast<int64_t>(ms.levels.size()) - 2; i >= 0; --i) {
    const auto& finer = ms.levels[i];
    auto up = F::interpolate(x, F::InterpolateFuncOptions()
                                    .scale_factor(std::vector<double>{2.0, 2.0})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
    if (up.size(2) != finer.size(2) || up.size(3) != finer.size(3)) {
      std::ostringstream msg;
      msg << "fusion level " << i << " has shape " << finer.sizes()
          << " but upsampled coarser level has " << up.sizes();
      throw ShapeError(msg.str());
    }
    auto merged = up + finer;
    auto r = rcu_b[i](torch::relu(rcu_a[i](torch::relu(merged))));
    x = merged + r;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Render head

RenderHeadImpl::RenderHeadImpl(const ModelConfig& cfg) {
  out_conv = register_module(
      "out_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.fusion_channels, 3, 3).padding(1)));
}

ImageTensor RenderHeadImpl::forward(const torch::Tensor& features,
                                    std::pair<int64_t, int64_t> target_hw) {
  auto x = F::interpolate(features, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{target_hw.first, target_hw.second})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
  return ImageTensor(torch::sigmoid(out_conv(x)));
}

// ---------------------------------------------------------------------------
// RenderNet

RenderNetImpl::RenderNetImpl(const ModelConfig& cfg) {
  cfg.validate();
  backbone = register_module("backbone", Backbone(cfg));
  tokenizer = register_module("tokenizer", Tokenizer(backbone->out_channels(), cfg));
  for (int64_t i = 0; i < cfg.num_transformer_blocks; ++i) {
    blocks.push_back(register_module("block" + std::to_string(i),
                                     TransformerBlock(cfg.embed_dim, cfg.num_heads)));
  }
  reassemble = register_module("reassemble", Reassemble(cfg));
  fusion = register_module("fusion", FusionDecoder(cfg));
  head = register_module("head", RenderHead(cfg));
}

MultiScaleFeatures RenderNetImpl::encode(const ImageTensor& img) {
  auto features = backbone->forward(img);
  auto tokens = tokenizer->forward(features);
  for (auto& block : blocks) tokens.tokens = block->forward(tokens.tokens);
  return reassemble->forward(tokens);
}

ImageTensor RenderNetImpl::decode(const MultiScaleFeatures& features,
                                  std::pair<int64_t, int64_t> target_hw) {
  return head->forward(fusion->forward(features), target_hw);
}

ImageTensor RenderNetImpl::forward(const ImageTensor& img) {
  return decode(encode(img), {img.height(), img.width()});
}

}  // namespace bradcn
