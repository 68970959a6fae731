#include "bradcn/types.hpp"

#include <sstream>

namespace bradcn {

namespace F = torch::nn::functional;

const ImageTensor& validate_image(const ImageTensor& t) {
  if (!t.data.defined() || t.data.dim() != 4) {
    throw ShapeError("image tensor must have layout (batch, 3, H, W)");
  }
  if (t.channels() != 3) {
    std::ostringstream msg;
    msg << "image tensor must have 3 channels, got " << t.channels();
    throw ShapeError(msg.str());
  }
  if (t.height() < 32 || t.width() < 32) {
    std::ostringstream msg;
    msg << "image spatial dims must be >= 32, got " << t.height() << "x" << t.width();
    throw ShapeError(msg.str());
  }
  if (!torch::isfinite(t.data).all().item<bool>()) {
    throw NonFiniteError("image tensor contains NaN or Inf");
  }
  const double lo = t.data.min().item<double>();
  const double hi = t.data.max().item<double>();
  if (lo < 0.0 || hi > 1.0) {
    std::ostringstream msg;
    msg << "image values must lie in [0, 1], observed range [" << lo << ", " << hi << "]";
    throw RangeError(msg.str());
  }
  return t;
}

std::pair<torch::Tensor, PadRecord> pad_raster_to_stride(const torch::Tensor& t, int64_t stride) {
  if (stride < 1) throw ShapeError("stride must be >= 1");
  if (t.dim() != 4) throw ShapeError("pad_to_stride expects a (B, C, H, W) raster");
  const int64_t h = t.size(2);
  const int64_t w = t.size(3);
  if (h < stride || w < stride) {
    std::ostringstream msg;
    msg << "input " << h << "x" << w << " is smaller than one stride (" << stride << ")";
    throw ShapeError(msg.str());
  }
  PadRecord rec;
  rec.pad_h = (stride - h % stride) % stride;
  rec.pad_w = (stride - w % stride) % stride;
  if (rec.empty()) return {t, rec};
  auto padded = F::pad(t, F::PadFuncOptions({0, rec.pad_w, 0, rec.pad_h}).mode(torch::kReflect));
  return {padded, rec};
}

std::pair<ImageTensor, PadRecord> pad_to_stride(const ImageTensor& t, int64_t stride) {
  auto [padded, rec] = pad_raster_to_stride(t.data, stride);
  return {ImageTensor(std::move(padded)), rec};
}

torch::Tensor crop_pad(const torch::Tensor& t, const PadRecord& rec) {
  if (rec.empty()) return t;
  using torch::indexing::Slice;
  return t.index({Slice(), Slice(), Slice(0, t.size(2) - rec.pad_h), Slice(0, t.size(3) - rec.pad_w)});
}

ImageTensor crop_pad(const ImageTensor& t, const PadRecord& rec) {
  return ImageTensor(crop_pad(t.data, rec));
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw ShapeError(msg.str());
  }
}

}  // namespace bradcn
