#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

#include "bradcn/config.hpp"
#include "bradcn/types.hpp"
#include "bradcn/unet_core.hpp"

namespace bradcn {

/// Pluggable monocular depth predictor. Implementations must return a raw
/// (pre-normalization) nonnegative depth map with the input's spatial dims
/// and must be safe for concurrent read-only prediction.
class DepthPredictor {
 public:
  virtual ~DepthPredictor() = default;

  virtual DepthMap predict(const ImageTensor& img) = 0;
  virtual bool trainable() const = 0;
  virtual std::string name() const = 0;

  /// Torch module backing this predictor, or nullptr for parameterless /
  /// external predictors. Registered by the hybrid model so trainable
  /// predictors are checkpointed and optimized with everything else.
  virtual std::shared_ptr<torch::nn::Module> torch_module() { return nullptr; }
};

/// Returns the same depth everywhere. Baseline for oracle tests.
class ConstantDepthPredictor : public DepthPredictor {
 public:
  explicit ConstantDepthPredictor(double value = 0.5) : value_(value) {}

  DepthMap predict(const ImageTensor& img) override;
  bool trainable() const override { return false; }
  std::string name() const override { return "constant"; }

 private:
  double value_;
};

/// Small trainable depth regressor (3-level encoder/decoder). Keeps the full
/// pipeline trainable and testable without any external pretrained model.
class FallbackDepthPredictor : public DepthPredictor {
 public:
  FallbackDepthPredictor();

  DepthMap predict(const ImageTensor& img) override;
  bool trainable() const override { return true; }
  std::string name() const override { return "fallback_unet"; }
  std::shared_ptr<torch::nn::Module> torch_module() override { return net.ptr(); }

  UNetCore net{nullptr};
};

/// Adapter for an external monocular depth model run as a subprocess. The
/// command is invoked as `<command> <input.png> <output.png>` and must write a
/// single-channel 16-bit grayscale PNG of identical dimensions. Any failure
/// (nonzero exit, unreadable output, wrong dims or bit depth) surfaces as
/// PredictorError.
class ExternalDepthPredictor : public DepthPredictor {
 public:
  explicit ExternalDepthPredictor(std::string command, bool trainable = false)
      : command_(std::move(command)), trainable_(trainable) {}

  DepthMap predict(const ImageTensor& img) override;
  bool trainable() const override { return trainable_; }
  std::string name() const override { return "external"; }

 private:
  std::string command_;
  bool trainable_;
};

/// Bridges a single-channel map into encoder feature space: the 3-channel
/// 3x3 stride-1 pad-1 convolution, average-pool resampling to each reassemble
/// stride, and a zero-initialized 1x1 projection per scale so training starts
/// from the pure render path.
struct AdaptiveNetImpl : torch::nn::Module {
  explicit AdaptiveNetImpl(const ModelConfig& cfg);

  MultiScaleFeatures forward(const torch::Tensor& map);

  /// The 3-channel full-resolution output of the adaptive conv alone.
  torch::Tensor adapt_full_res(const torch::Tensor& map);

  torch::nn::Conv2d adapt{nullptr};              // 1 -> 3, k3 s1 p1
  std::vector<torch::nn::Conv2d> scale_proj;     // 3 -> fusion_channels, 1x1, zero-init

 private:
  std::vector<int64_t> strides_;
};
TORCH_MODULE(AdaptiveNet);

/// Runs the predictor and min-max normalizes the result to [0, 1] per image.
/// Backend failures are wrapped in PredictorError. The normalization keeps
/// the autograd graph, so trainable predictors receive gradients downstream.
DepthMap predict_depth(DepthPredictor& p, const ImageTensor& img);

/// Eq.-style depth bridge: adaptive conv, per-stride average pooling,
/// per-scale projection. Output levels are shape-compatible with the render
/// encoder's features.
MultiScaleFeatures adapt_depth(AdaptiveNet& a, const DepthMap& d, const ModelConfig& cfg);

}  // namespace bradcn
