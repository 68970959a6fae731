#pragma once

#include <torch/torch.h>

#include "bradcn/config.hpp"
#include "bradcn/depth_net.hpp"
#include "bradcn/types.hpp"
#include "bradcn/unet_core.hpp"

namespace bradcn {

/// Depth calibration network: an encoder/decoder with skip connections that
/// predicts the per-pixel depth-error map from the RGB image concatenated
/// with the predicted depth (4 input channels). Output is nonnegative and has
/// the input's spatial dims.
struct AdcnNetImpl : torch::nn::Module {
  explicit AdcnNetImpl(const ModelConfig& cfg);

  ErrorMap forward(const ImageTensor& img, const DepthMap& d_o);

  UNetCore core{nullptr};
};
TORCH_MODULE(AdcnNet);

/// Supervision target: elementwise |d_o - d_gt|. Exact (no tolerance) and
/// symmetric in its arguments. Throws ShapeError on mismatched shapes.
ErrorMap build_error_target(const DepthMap& d_o, const DepthMap& d_gt);

/// Error-map bridge into encoder feature space. Same structure as
/// adapt_depth but with independent parameters.
MultiScaleFeatures adapt_error(AdaptiveNet& a, const ErrorMap& e, const ModelConfig& cfg);

}  // namespace bradcn
