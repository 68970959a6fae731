#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

#include "bradcn/adcn.hpp"
#include "bradcn/config.hpp"
#include "bradcn/depth_net.hpp"
#include "bradcn/render_net.hpp"
#include "bradcn/types.hpp"

namespace bradcn {

/// Ablation configurations: pure render path, render + adapted depth, or the
/// full model with the calibration branch.
enum class HybridMode { RenderOnly, RenderPlusDepth, Full };

std::string to_string(HybridMode mode);
HybridMode parse_hybrid_mode(const std::string& text);  // render_only / render_depth / full
const std::vector<HybridMode>& all_hybrid_modes();

/// Decoder input after the depth bridge: D_i[k] = e_o[k] + adapted_depth[k].
MultiScaleFeatures fuse_depth(const MultiScaleFeatures& e_o, const MultiScaleFeatures& adapted_depth);

/// Decoder input after the error bridge: D_I[k] = d_i[k] + adapted_error[k].
MultiScaleFeatures fuse_error(const MultiScaleFeatures& d_i, const MultiScaleFeatures& adapted_error);

/// Parameter groups exposed to training plans.
inline const std::vector<std::string>& parameter_group_names() {
  static const std::vector<std::string> names = {"render", "depth_adapter", "error_adapter",
                                                 "adcn", "depth_predictor"};
  return names;
}

/// The full hybrid model: render net, pluggable depth predictor with its
/// adaptive bridge, and the calibration net with its own bridge. Forward
/// validates and pads internally, so any input with H, W >= 32 works; on
/// stride-divisible inputs the padding is a no-op.
struct BradcnModelImpl : torch::nn::Module {
  BradcnModelImpl(const ModelConfig& cfg, std::shared_ptr<DepthPredictor> predictor);

  ImageTensor forward(const ImageTensor& img, HybridMode mode);

  /// Forward at native resolution followed by bilinear 2x upsampling.
  /// Runs without gradients; output dims are exactly (2H, 2W).
  ImageTensor infer_highres(const ImageTensor& img, HybridMode mode);

  /// Named parameter group (see parameter_group_names).
  std::vector<torch::Tensor> parameter_group(const std::string& name);

  /// Sets requires_grad for one group.
  void set_group_trainable(const std::string& name, bool trainable);

  ModelConfig cfg;
  RenderNet render{nullptr};
  AdaptiveNet depth_adapter{nullptr};
  AdaptiveNet error_adapter{nullptr};
  AdcnNet adcn{nullptr};
  std::shared_ptr<DepthPredictor> depth_predictor;

  // Wiring instrumentation: how often each branch actually ran.
  int64_t depth_invocations = 0;
  int64_t adcn_invocations = 0;
};
TORCH_MODULE(BradcnModel);

/// Model with the desk-scale fallback depth predictor.
BradcnModel make_model(const ModelConfig& cfg);

}  // namespace bradcn
