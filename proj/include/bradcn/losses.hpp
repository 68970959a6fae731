#pragma once

#include <torch/torch.h>

#include "bradcn/types.hpp"

namespace bradcn {

enum class LossKind { L1, MS_SSIM, L1_plus_MS_SSIM };

/// Training-loss selection. mix_alpha is the weight of the (1 - MS-SSIM) term
/// and is only consulted by the combined kind.
struct LossSpec {
  LossKind kind = LossKind::L1;
  double mix_alpha = 0.16;
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Mean absolute difference. Differentiable. Throws ShapeError on mismatch.
torch::Tensor l1_loss(const torch::Tensor& pred, const torch::Tensor& gt);

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), valid windows
/// only, C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1, averaged over batch,
/// channels and space. Requires H, W >= 11 (TooSmallError otherwise).
torch::Tensor ssim(const torch::Tensor& pred, const torch::Tensor& gt);

/// Multi-scale SSIM: contrast-structure means at every scale (2x average-pool
/// between scales), full SSIM mean at the final scale, combined as a weighted
/// geometric mean with the standard five-scale exponents (renormalized when
/// fewer scales are used). scales = 1 reduces to ssim. Differentiable; the
/// loss form is 1 - ms_ssim. Throws TooSmallError naming the maximum
/// admissible scale count when the input is too small.
torch::Tensor ms_ssim(const torch::Tensor& pred, const torch::Tensor& gt, int64_t scales);

/// Largest admissible MS-SSIM scale count for an HxW input (0 if even plain
/// SSIM does not fit).
int64_t max_ms_ssim_scales(int64_t h, int64_t w);

/// Picks min(5, max admissible) scales, warning once when reduced below 5.
int64_t auto_ms_ssim_scales(int64_t h, int64_t w);

/// (1 - alpha) * L1 + alpha * (1 - MS-SSIM) at auto-selected scales.
torch::Tensor combined_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                            const LossSpec& spec);

/// Dispatches on spec.kind: L1, 1 - MS-SSIM, or the combined loss.
torch::Tensor loss_value(const torch::Tensor& pred, const torch::Tensor& gt, const LossSpec& spec);

inline torch::Tensor l1_loss(const ImageTensor& a, const ImageTensor& b) {
  return l1_loss(a.data, b.data);
}
inline torch::Tensor ssim(const ImageTensor& a, const ImageTensor& b) {
  return ssim(a.data, b.data);
}
inline torch::Tensor ms_ssim(const ImageTensor& a, const ImageTensor& b, int64_t scales) {
  return ms_ssim(a.data, b.data, scales);
}

/// Number of times any MS-SSIM value has been computed in this process.
/// Lets tests assert that L1-only training stages never touch the term.
int64_t ms_ssim_eval_count();

}  // namespace bradcn
