#include "bradcn/adcn.hpp"

#include "bradcn/errors.hpp"

namespace bradcn {

AdcnNetImpl::AdcnNetImpl(const ModelConfig& cfg) {
  core = register_module("core", UNetCore(4, cfg.adcn_base_channels, cfg.adcn_depth, 1,
                                          /*nonnegative=*/true));
}

ErrorMap AdcnNetImpl::forward(const ImageTensor& img, const DepthMap& d_o) {
  if (img.batch() != d_o.batch() || img.height() != d_o.height() || img.width() != d_o.width()) {
    throw ShapeError("adcn: image and depth map are not spatially aligned");
  }
  auto x = torch::cat({img.data, d_o.data}, 1);
  return ErrorMap(core->forward(x));
}

ErrorMap build_error_target(const DepthMap& d_o, const DepthMap& d_gt) {
  require_same_shape(d_o.data, d_gt.data, "build_error_target");
  return ErrorMap(torch::abs(d_o.data - d_gt.data));
}

MultiScaleFeatures adapt_error(AdaptiveNet& a, const ErrorMap& e, const ModelConfig& cfg) {
  (void)cfg;
  return a->forward(e.data);
}

}  // namespace bradcn
