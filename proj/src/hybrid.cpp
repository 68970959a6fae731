#include "bradcn/hybrid.hpp"

#include <sstream>

#include "bradcn/errors.hpp"

namespace bradcn {

namespace F = torch::nn::functional;

std::string to_string(HybridMode mode) {
  switch (mode) {
    case HybridMode::RenderOnly: return "RenderOnly";
    case HybridMode::RenderPlusDepth: return "RenderPlusDepth";
    case HybridMode::Full: return "Full";
  }
  return "unknown";
}

HybridMode parse_hybrid_mode(const std::string& text) {
  if (text == "render_only" || text == "RenderOnly") return HybridMode::RenderOnly;
  if (text == "render_depth" || text == "RenderPlusDepth") return HybridMode::RenderPlusDepth;
  if (text == "full" || text == "Full") return HybridMode::Full;
  throw ConfigError("unknown mode '" + text + "' (expected render_only, render_depth or full)");
}

const std::vector<HybridMode>& all_hybrid_modes() {
  static const std::vector<HybridMode> modes = {HybridMode::RenderOnly, HybridMode::RenderPlusDepth,
                                                HybridMode::Full};
  return modes;
}

namespace {
MultiScaleFeatures add_levels(const MultiScaleFeatures& a, const MultiScaleFeatures& b,
                              const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": level count mismatch");
  }
  MultiScaleFeatures out;
  out.strides = a.strides;
  for (size_t k = 0; k < a.size(); ++k) {
    require_same_shape(a.levels[k], b.levels[k], what);
    out.levels.push_back(a.levels[k] + b.levels[k]);
  }
  return out;
}
}  // namespace

MultiScaleFeatures fuse_depth(const MultiScaleFeatures& e_o,
                              const MultiScaleFeatures& adapted_depth) {
  return add_levels(e_o, adapted_depth, "fuse_depth");
}

MultiScaleFeatures fuse_error(const MultiScaleFeatures& d_i,
                              const MultiScaleFeatures& adapted_error) {
  return add_levels(d_i, adapted_error, "fuse_error");
}

BradcnModelImpl::BradcnModelImpl(const ModelConfig& config, std::shared_ptr<DepthPredictor> predictor)
    : cfg(config), depth_predictor(std::move(predictor)) {
  cfg.validate();
  render = register_module("render", RenderNet(cfg));
  depth_adapter = register_module("depth_adapter", AdaptiveNet(cfg));
  error_adapter = register_module("error_adapter", AdaptiveNet(cfg));
  adcn = register_module("adcn", AdcnNet(cfg));
  if (auto mod = depth_predictor->torch_module()) {
    register_module("depth_predictor", mod);
  }
}

ImageTensor BradcnModelImpl::forward(const ImageTensor& img, HybridMode mode) {
  validate_image(img);
  auto [padded, rec] = pad_to_stride(img, cfg.input_stride());

  auto features = render->encode(padded);

  if (mode != HybridMode::RenderOnly) {
    ++depth_invocations;
    auto d_o = predict_depth(*depth_predictor, padded);
    features = fuse_depth(features, adapt_depth(depth_adapter, d_o, cfg));
    if (mode == HybridMode::Full) {
      ++adcn_invocations;
      auto e = adcn->forward(padded, d_o);
      features = fuse_error(features, adapt_error(error_adapter, e, cfg));
    }
  }

  auto out = render->decode(features, {padded.height(), padded.width()});
  return crop_pad(out, rec);
}

ImageTensor BradcnModelImpl::infer_highres(const ImageTensor& img, HybridMode mode) {
  torch::NoGradGuard no_grad;
  auto rendered = forward(img, mode);
  auto up = F::interpolate(rendered.data,
                           F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{2 * img.height(), 2 * img.width()})
                               .mode(torch::kBilinear)
                               .align_corners(false));
  return ImageTensor(up);
}

std::vector<torch::Tensor> BradcnModelImpl::parameter_group(const std::string& name) {
  if (name == "render") return render->parameters();
  if (name == "depth_adapter") return depth_adapter->parameters();
  if (name == "error_adapter") return error_adapter->parameters();
  if (name == "adcn") return adcn->parameters();
  if (name == "depth_predictor") {
    if (auto mod = depth_predictor->torch_module()) return mod->parameters();
    return {};
  }
  throw ConfigError("unknown parameter group '" + name + "'");
}

void BradcnModelImpl::set_group_trainable(const std::string& name, bool trainable) {
  for (auto& p : parameter_group(name)) p.set_requires_grad(trainable);
}

BradcnModel make_model(const ModelConfig& cfg) {
  return BradcnModel(cfg, std::make_shared<FallbackDepthPredictor>());
}

}  // namespace bradcn
