#include "bradcn/losses.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>

#include "bradcn/errors.hpp"

namespace bradcn {

namespace F = torch::nn::functional;

namespace {

constexpr int64_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (0.01 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::atomic<int64_t> g_ms_ssim_evals{0};

torch::Tensor gaussian_kernel(int64_t channels, const torch::TensorOptions& opts) {
  auto coords = torch::arange(kWindow, opts) - (kWindow - 1) / 2.0;
  auto g = torch::exp(-coords.pow(2) / (2.0 * kSigma * kSigma));
  g = g / g.sum();
  auto window = torch::outer(g, g).reshape({1, 1, kWindow, kWindow});
  return window.expand({channels, 1, kWindow, kWindow}).contiguous();
}

struct SsimMaps {
  torch::Tensor ssim_map;
  torch::Tensor cs_map;
};

SsimMaps ssim_maps(const torch::Tensor& a, const torch::Tensor& b) {
  const int64_t c = a.size(1);
  auto w = gaussian_kernel(c, a.options());
  auto conv = [&](const torch::Tensor& x) {
    return F::conv2d(x, w, F::Conv2dFuncOptions().groups(c));
  };
  auto mu1 = conv(a);
  auto mu2 = conv(b);
  auto mu1_sq = mu1 * mu1;
  auto mu2_sq = mu2 * mu2;
  auto mu12 = mu1 * mu2;
  auto sigma1_sq = conv(a * a) - mu1_sq;
  auto sigma2_sq = conv(b * b) - mu2_sq;
  auto sigma12 = conv(a * b) - mu12;

  auto cs = (2.0 * sigma12 + kC2) / (sigma1_sq + sigma2_sq + kC2);
  auto lum = (2.0 * mu12 + kC1) / (mu1_sq + mu2_sq + kC1);
  return {lum * cs, cs};
}

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.dim() != 4 || b.dim() != 4) throw ShapeError("loss inputs must be (B, C, H, W)");
  require_same_shape(a, b, "loss inputs");
}

const std::vector<double>& ms_weights() {
  static const std::vector<double> w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  return w;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::L1: return "l1";
    case LossKind::MS_SSIM: return "ms_ssim";
    case LossKind::L1_plus_MS_SSIM: return "l1_plus_ms_ssim";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "l1") return LossKind::L1;
  if (text == "ms_ssim") return LossKind::MS_SSIM;
  if (text == "l1_plus_ms_ssim") return LossKind::L1_plus_MS_SSIM;
  throw ConfigError("unknown loss kind '" + text + "'");
}

torch::Tensor l1_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_pair(pred, gt);
  return torch::mean(torch::abs(pred - gt));
}

torch::Tensor ssim(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_pair(pred, gt);
  if (pred.size(2) < kWindow || pred.size(3) < kWindow) {
    throw TooSmallError("ssim requires H, W >= 11");
  }
  return ssim_maps(pred, gt).ssim_map.mean();
}

int64_t max_ms_ssim_scales(int64_t h, int64_t w) {
  const int64_t m = std::min(h, w);
  int64_t scales = 0;
  while (m >= kWindow * (int64_t{1} << scales)) ++scales;
  return scales;
}

int64_t auto_ms_ssim_scales(int64_t h, int64_t w) {
  const int64_t max_scales = max_ms_ssim_scales(h, w);
  if (max_scales >= 5) return 5;
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "[bradcn] ms-ssim: input " << h << "x" << w << " only supports " << max_scales
              << " scale(s), reducing from 5\n";
  }
  return max_scales;
}

torch::Tensor ms_ssim(const torch::Tensor& pred, const torch::Tensor& gt, int64_t scales) {
  check_pair(pred, gt);
  const int64_t admissible = max_ms_ssim_scales(pred.size(2), pred.size(3));
  if (scales < 1 || scales > admissible) {
    std::ostringstream msg;
    msg << "ms_ssim: " << scales << " scales requested but input " << pred.size(2) << "x"
        << pred.size(3) << " admits at most " << admissible;
    throw TooSmallError(msg.str());
  }
  ++g_ms_ssim_evals;

  std::vector<double> weights(ms_weights().begin(), ms_weights().begin() + scales);
  double total = 0.0;
  for (double v : weights) total += v;
  for (double& v : weights) v /= total;

  torch::Tensor a = pred;
  torch::Tensor b = gt;
  torch::Tensor result;
  for (int64_t j = 0; j < scales; ++j) {
    auto maps = ssim_maps(a, b);
    torch::Tensor term;
    if (j + 1 < scales) {
      term = torch::relu(maps.cs_map.mean());
      a = F::avg_pool2d(a, F::AvgPool2dFuncOptions(2));
      b = F::avg_pool2d(b, F::AvgPool2dFuncOptions(2));
    } else {
      term = torch::relu(maps.ssim_map.mean());
    }
    auto factor = term.pow(weights[static_cast<size_t>(j)]);
    result = result.defined() ? result * factor : factor;
  }
  return result;
}

int64_t ms_ssim_eval_count() { return g_ms_ssim_evals.load(); }

torch::Tensor combined_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                            const LossSpec& spec) {
  const double alpha = spec.mix_alpha;
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("mix_alpha must lie in [0, 1]");
  auto l1 = l1_loss(pred, gt);
  if (alpha == 0.0) return l1;
  auto ms = ms_ssim(pred, gt, auto_ms_ssim_scales(pred.size(2), pred.size(3)));
  return (1.0 - alpha) * l1 + alpha * (1.0 - ms);
}

torch::Tensor loss_value(const torch::Tensor& pred, const torch::Tensor& gt,
                         const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::L1:
      return l1_loss(pred, gt);
    case LossKind::MS_SSIM:
      return 1.0 - ms_ssim(pred, gt, auto_ms_ssim_scales(pred.size(2), pred.size(3)));
    case LossKind::L1_plus_MS_SSIM:
      return combined_loss(pred, gt, spec);
  }
  throw ConfigError("invalid loss kind");
}

}  // namespace bradcn
