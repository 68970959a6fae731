#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <utility>
#include <vector>

#include "bradcn/errors.hpp"

namespace bradcn {

/// Batched RGB raster, layout (batch, 3, H, W), values in [0, 1].
/// A thin value wrapper over torch::Tensor; invariants are enforced by
/// validate_image and by the builders that produce instances.
struct ImageTensor {
  torch::Tensor data;

  ImageTensor() = default;
  explicit ImageTensor(torch::Tensor t) : data(std::move(t)) {}

  int64_t batch() const { return data.size(0); }
  int64_t channels() const { return data.size(1); }
  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

/// Batched single-channel raster (batch, 1, H, W), nonnegative. Houses both
/// predicted and ground-truth relative depth (unitless after normalization).
struct DepthMap {
  torch::Tensor data;

  DepthMap() = default;
  explicit DepthMap(torch::Tensor t) : data(std::move(t)) {}

  int64_t batch() const { return data.size(0); }
  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

/// Per-pixel absolute depth error |D_o - D_gt|, same layout as DepthMap.
struct ErrorMap {
  torch::Tensor data;

  ErrorMap() = default;
  explicit ErrorMap(torch::Tensor t) : data(std::move(t)) {}

  int64_t batch() const { return data.size(0); }
  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

/// Flattened patch embeddings with the class token prepended at index 0,
/// positional embeddings already added. grid_h x grid_w is the patch grid the
/// patch tokens came from (needed to reassemble them into rasters).
struct TokenSequence {
  torch::Tensor tokens;  // (batch, N_patches + 1, embed_dim)
  int64_t grid_h = 0;
  int64_t grid_w = 0;

  int64_t batch() const { return tokens.size(0); }
  int64_t count() const { return tokens.size(1); }
  int64_t dim() const { return tokens.size(2); }
};

/// Ordered feature rasters, level i at strides[i] relative to the network
/// input, each with the same channel count.
struct MultiScaleFeatures {
  std::vector<torch::Tensor> levels;
  std::vector<int64_t> strides;

  size_t size() const { return levels.size(); }
};

/// Bottom/right padding applied by pad_to_stride; allows exact cropping back.
struct PadRecord {
  int64_t pad_h = 0;
  int64_t pad_w = 0;

  bool empty() const { return pad_h == 0 && pad_w == 0; }
};

/// Checks the ImageTensor invariants and returns the input unchanged.
/// Throws ShapeError (rank != 4, channels != 3, or H/W < 32), NonFiniteError,
/// or RangeError (value outside [0, 1]). Never clamps.
const ImageTensor& validate_image(const ImageTensor& t);

/// Pads H and W up to the next multiples of `stride` with reflective padding
/// on the bottom/right edges. Idempotent on already-divisible inputs.
/// Throws ShapeError if either spatial dim is smaller than one stride.
std::pair<ImageTensor, PadRecord> pad_to_stride(const ImageTensor& t, int64_t stride);

/// Same padding rule for any (B, C, H, W) raster (depth maps ride along with
/// their paired image).
std::pair<torch::Tensor, PadRecord> pad_raster_to_stride(const torch::Tensor& t, int64_t stride);

/// Exact inverse of pad_to_stride.
ImageTensor crop_pad(const ImageTensor& t, const PadRecord& rec);
torch::Tensor crop_pad(const torch::Tensor& t, const PadRecord& rec);

/// Throws ShapeError unless both tensors have identical sizes.
void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what);

}  // namespace bradcn
