#include "bradcn/unet_core.hpp"

#include "bradcn/render_net.hpp"  // norm_groups
#include "bradcn/types.hpp"

namespace bradcn {

namespace F = torch::nn::functional;

UNetCoreImpl::UNetCoreImpl(int64_t in_channels, int64_t base_channels, int64_t depth,
                           int64_t out_channels, bool nonnegative)
    : depth_(depth), nonnegative_(nonnegative) {
  stem = register_module(
      "stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, base_channels, 3).padding(1)));
  stem_norm = register_module("stem_norm",
                              torch::nn::GroupNorm(norm_groups(base_channels), base_channels));
  int64_t c = base_channels;
  for (int64_t i = 0; i < depth; ++i) {
    const int64_t next = c * 2;
    enc_down.push_back(register_module(
        "enc_down" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c, next, 3).stride(2).padding(1))));
    enc_down_norm.push_back(
        register_module("enc_down_norm" + std::to_string(i),
                        torch::nn::GroupNorm(norm_groups(next), next)));
    enc_conv.push_back(register_module(
        "enc_conv" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(next, next, 3).padding(1))));
    enc_conv_norm.push_back(
        register_module("enc_conv_norm" + std::to_string(i),
                        torch::nn::GroupNorm(norm_groups(next), next)));
    c = next;
  }
  for (int64_t i = 0; i < depth; ++i) {
    const int64_t skip = c / 2;
    dec_conv.push_back(register_module(
        "dec_conv" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c + skip, skip, 3).padding(1))));
    dec_conv_norm.push_back(register_module("dec_conv_norm" + std::to_string(i),
                                            torch::nn::GroupNorm(norm_groups(skip), skip)));
    dec_refine.push_back(register_module(
        "dec_refine" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(skip, skip, 3).padding(1))));
    dec_refine_norm.push_back(register_module("dec_refine_norm" + std::to_string(i),
                                              torch::nn::GroupNorm(norm_groups(skip), skip)));
    c = skip;
  }
  head = register_module("head",
                         torch::nn::Conv2d(torch::nn::Conv2dOptions(c, out_channels, 3).padding(1)));
}

torch::Tensor UNetCoreImpl::forward(const torch::Tensor& input) {
  auto [x, rec] = pad_raster_to_stride(input, int64_t{1} << depth_);

  std::vector<torch::Tensor> skips;
  x = torch::relu(stem_norm(stem(x)));
  skips.push_back(x);
  for (int64_t i = 0; i < depth_; ++i) {
    x = torch::relu(enc_down_norm[i](enc_down[i](x)));
    x = torch::relu(enc_conv_norm[i](enc_conv[i](x)));
    if (i + 1 < depth_) skips.push_back(x);
  }
  for (int64_t i = 0; i < depth_; ++i) {
    auto up = F::interpolate(x, F::InterpolateFuncOptions()
                                    .scale_factor(std::vector<double>{2.0, 2.0})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
    auto skip = skips[skips.size() - 1 - static_cast<size_t>(i)];
    x = torch::cat({up, skip}, 1);
    x = torch::relu(dec_conv_norm[i](dec_conv[i](x)));
    x = torch::relu(dec_refine_norm[i](dec_refine[i](x)));
  }
  auto out = head(x);
  if (nonnegative_) out = torch::softplus(out);
  return crop_pad(out, rec);
}

}  // namespace bradcn
