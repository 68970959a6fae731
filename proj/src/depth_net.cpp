#include "bradcn/depth_net.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "bradcn/errors.hpp"
#include "bradcn/image_io.hpp"

namespace bradcn {

namespace F = torch::nn::functional;
namespace fs = std::filesystem;

DepthMap ConstantDepthPredictor::predict(const ImageTensor& img) {
  return DepthMap(torch::full({img.batch(), 1, img.height(), img.width()}, value_,
                              img.data.options()));
}

FallbackDepthPredictor::FallbackDepthPredictor() {
  net = UNetCore(3, 16, 3, 1, /*nonnegative=*/true);
}

DepthMap FallbackDepthPredictor::predict(const ImageTensor& img) {
  return DepthMap(net->forward(img.data));
}

DepthMap ExternalDepthPredictor::predict(const ImageTensor& img) {
  static std::atomic<uint64_t> invocation{0};
  const auto dir = fs::temp_directory_path();
  const auto tag = std::to_string(reinterpret_cast<uintptr_t>(this)) + "_" +
                   std::to_string(invocation.fetch_add(1));
  const auto in_path = dir / ("bradcn_depth_in_" + tag + ".png");
  const auto out_path = dir / ("bradcn_depth_out_" + tag + ".png");

  std::vector<torch::Tensor> slices;
  try {
    for (int64_t b = 0; b < img.batch(); ++b) {
      write_image_rgb8(ImageTensor(img.data.index({torch::indexing::Slice(b, b + 1)})), in_path);
      const std::string cmd = command_ + " \"" + in_path.string() + "\" \"" + out_path.string() + "\"";
      if (std::system(cmd.c_str()) != 0) {
        throw PredictorError("external depth command failed: " + command_);
      }
      auto depth = read_depth_png16(out_path);
      if (depth.size(2) != img.height() || depth.size(3) != img.width()) {
        std::ostringstream msg;
        msg << "external depth output dims " << depth.size(2) << "x" << depth.size(3)
            << " do not match input " << img.height() << "x" << img.width();
        throw PredictorError(msg.str());
      }
      slices.push_back(depth);
    }
  } catch (const PredictorError&) {
    fs::remove(in_path);
    fs::remove(out_path);
    throw;
  } catch (const Error& e) {
    fs::remove(in_path);
    fs::remove(out_path);
    throw PredictorError(std::string("external depth adapter: ") + e.what());
  }
  fs::remove(in_path);
  fs::remove(out_path);
  return DepthMap(torch::cat(slices, 0));
}

AdaptiveNetImpl::AdaptiveNetImpl(const ModelConfig& cfg) : strides_(cfg.reassemble_strides) {
  adapt = register_module(
      "adapt", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 3, 3).stride(1).padding(1)));
  for (size_t i = 0; i < strides_.size(); ++i) {
    auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(3, cfg.fusion_channels, 1));
    {
      torch::NoGradGuard no_grad;
      conv->weight.zero_();
      conv->bias.zero_();
    }
    scale_proj.push_back(register_module("scale_proj" + std::to_string(i), conv));
  }
}

torch::Tensor AdaptiveNetImpl::adapt_full_res(const torch::Tensor& map) {
  if (map.dim() != 4 || map.size(1) != 1) {
    throw ShapeError("adaptive net expects a (B, 1, H, W) map");
  }
  return adapt(map);
}

MultiScaleFeatures AdaptiveNetImpl::forward(const torch::Tensor& map) {
  auto full = adapt_full_res(map);
  const int64_t h = full.size(2);
  const int64_t w = full.size(3);
  MultiScaleFeatures out;
  out.strides = strides_;
  for (size_t i = 0; i < strides_.size(); ++i) {
    const int64_t s = strides_[i];
    if (h % s != 0 || w % s != 0) {
      std::ostringstream msg;
      msg << "map dims " << h << "x" << w << " not divisible by reassemble stride " << s;
      throw ShapeError(msg.str());
    }
    auto pooled = F::avg_pool2d(full, F::AvgPool2dFuncOptions(s).stride(s));
    out.levels.push_back(scale_proj[i](pooled));
  }
  return out;
}

DepthMap predict_depth(DepthPredictor& p, const ImageTensor& img) {
  DepthMap raw;
  try {
    raw = p.predict(img);
  } catch (const PredictorError&) {
    throw;
  } catch (const std::exception& e) {
    throw PredictorError(std::string("depth predictor '") + p.name() + "' failed: " + e.what());
  }
  if (raw.data.dim() != 4 || raw.data.size(1) != 1 || raw.height() != img.height() ||
      raw.width() != img.width() || raw.batch() != img.batch()) {
    throw PredictorError("depth predictor '" + p.name() + "' returned mismatched dims");
  }
  if (!torch::isfinite(raw.data).all().item<bool>()) {
    throw PredictorError("depth predictor '" + p.name() + "' returned non-finite values");
  }

  auto lo = raw.data.amin({1, 2, 3}, /*keepdim=*/true);
  auto hi = raw.data.amax({1, 2, 3}, /*keepdim=*/true);
  auto span = torch::clamp_min(hi - lo, 1e-12);
  return DepthMap((raw.data - lo) / span);
}

MultiScaleFeatures adapt_depth(AdaptiveNet& a, const DepthMap& d, const ModelConfig& cfg) {
  (void)cfg;
  return a->forward(d.data);
}

}  // namespace bradcn
