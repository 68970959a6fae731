#include "bradcn/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "bradcn/errors.hpp"

namespace bradcn {

ImageTensor read_image_rgb8(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DecodeError("cannot decode image: " + path.string());
  if (bgr.depth() != CV_8U) throw DecodeError("expected 8-bit image: " + path.string());

  auto hwc = torch::from_blob(bgr.data, {bgr.rows, bgr.cols, 3}, torch::kUInt8).clone();
  auto chw = hwc.permute({2, 0, 1});
  auto rgb = chw.flip(0);  // BGR -> RGB
  return ImageTensor(rgb.to(torch::kFloat32).div_(255.0).unsqueeze(0).contiguous());
}

void write_image_rgb8(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.data.dim() != 4 || img.batch() != 1 || img.channels() != 3) {
    throw ShapeError("write_image_rgb8 expects a single (1, 3, H, W) image");
  }
  auto bytes = img.data.squeeze(0).mul(255.0).round().clamp(0, 255).to(torch::kUInt8);
  auto bgr_hwc = bytes.flip(0).permute({1, 2, 0}).contiguous();  // RGB -> BGR
  cv::Mat bgr(static_cast<int>(img.height()), static_cast<int>(img.width()), CV_8UC3,
              bgr_hwc.data_ptr<uint8_t>());
  if (!cv::imwrite(path.string(), bgr)) {
    throw DecodeError("cannot write image: " + path.string());
  }
}

torch::Tensor read_depth_png16(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DecodeError("cannot decode depth image: " + path.string());
  if (raw.channels() != 1) {
    throw DecodeError("depth image must be single-channel: " + path.string());
  }
  if (raw.depth() != CV_16U) {
    throw DecodeError("depth image must be 16-bit: " + path.string());
  }
  cv::Mat cont = raw.isContinuous() ? raw : raw.clone();
  auto t = torch::from_blob(cont.data, {cont.rows, cont.cols},
                            torch::TensorOptions().dtype(torch::kInt16))
               .clone();
  // reinterpret int16 bits as unsigned before widening
  auto u16 = t.to(torch::kInt32).bitwise_and(0xffff).to(torch::kFloat32);
  return u16.unsqueeze(0).unsqueeze(0).contiguous();
}

void write_depth_png16(const torch::Tensor& depth, const std::filesystem::path& path) {
  torch::Tensor d = depth;
  if (d.dim() == 4) d = d.squeeze(0).squeeze(0);
  if (d.dim() != 2) throw ShapeError("write_depth_png16 expects a single-channel map");
  auto vals = d.round().clamp(0, 65535).to(torch::kInt32).contiguous();
  cv::Mat out(static_cast<int>(d.size(0)), static_cast<int>(d.size(1)), CV_16UC1);
  const auto* src = vals.data_ptr<int32_t>();
  auto* dst = reinterpret_cast<uint16_t*>(out.data);
  for (int64_t i = 0; i < vals.numel(); ++i) dst[i] = static_cast<uint16_t>(src[i]);
  if (!cv::imwrite(path.string(), out)) {
    throw DecodeError("cannot write depth image: " + path.string());
  }
}

}  // namespace bradcn
