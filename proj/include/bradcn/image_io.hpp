#pragma once

#include <torch/torch.h>

#include <filesystem>

#include "bradcn/types.hpp"

namespace bradcn {

/// Decodes an 8-bit RGB PNG/JPEG into a (1, 3, H, W) float tensor in [0, 1]
/// (value = byte / 255). Throws DecodeError on unreadable files or non-8-bit
/// inputs.
ImageTensor read_image_rgb8(const std::filesystem::path& path);

/// Quantizes to 8 bits (round(v * 255)) and writes a PNG. The decode/encode
/// pair is bitwise stable on quantized values.
void write_image_rgb8(const ImageTensor& img, const std::filesystem::path& path);

/// Decodes a single-channel 16-bit PNG (integer millimeters) into a
/// (1, 1, H, W) float tensor of raw values. Throws DecodeError if the file is
/// not 16-bit single-channel.
torch::Tensor read_depth_png16(const std::filesystem::path& path);

/// Writes raw values rounded to uint16 as a single-channel 16-bit PNG.
void write_depth_png16(const torch::Tensor& depth, const std::filesystem::path& path);

}  // namespace bradcn
