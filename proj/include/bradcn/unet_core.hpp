#pragma once

#include <torch/torch.h>

#include <vector>

namespace bradcn {

/// Small encoder/decoder with skip connections: `depth` stride-2 stages that
/// double channels from `base_channels`, mirrored upsampling stages, and a
/// softplus head when `nonnegative` is set. Inputs of any size are padded
/// reflectively to a 2^depth multiple and the output is cropped back, so
/// output spatial dims always equal input dims.
struct UNetCoreImpl : torch::nn::Module {
  UNetCoreImpl(int64_t in_channels, int64_t base_channels, int64_t depth, int64_t out_channels,
               bool nonnegative);

  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d stem{nullptr};
  torch::nn::GroupNorm stem_norm{nullptr};
  std::vector<torch::nn::Conv2d> enc_down, enc_conv;
  std::vector<torch::nn::GroupNorm> enc_down_norm, enc_conv_norm;
  std::vector<torch::nn::Conv2d> dec_conv, dec_refine;
  std::vector<torch::nn::GroupNorm> dec_conv_norm, dec_refine_norm;
  torch::nn::Conv2d head{nullptr};

  int64_t depth() const { return depth_; }

 private:
  int64_t depth_;
  bool nonnegative_;
};
TORCH_MODULE(UNetCore);

}  // namespace bradcn
