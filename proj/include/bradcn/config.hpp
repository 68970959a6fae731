#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bradcn {

/// Architecture hyperparameters. Defaults are the desk-scale profile: small
/// enough to train and test on a CPU while keeping the full structure
/// (backbone -> tokens -> transformer -> reassemble -> fusion, plus the depth
/// and calibration branches). Full-scale values are expressible through the
/// same fields.
struct ModelConfig {
  int64_t patch_size = 1;  // patch edge on backbone features
  int64_t embed_dim = 128;
  int64_t num_transformer_blocks = 4;
  int64_t num_heads = 4;
  std::vector<int64_t> reassemble_strides = {4, 8, 16, 32};
  int64_t fusion_channels = 64;
  int64_t adcn_base_channels = 16;
  int64_t adcn_depth = 3;
  std::vector<int64_t> backbone_channels = {32, 64, 96, 128};
  uint64_t seed = 1234;

  /// Throws ConfigError if any invariant is violated (embed_dim divisible by
  /// num_heads, strictly increasing strides, positive values).
  void validate() const;

  /// Total stride of the backbone: one 2x downsampling stage per entry of
  /// backbone_channels.
  int64_t backbone_stride() const { return int64_t{1} << backbone_channels.size(); }

  /// Stride of the token grid relative to the input image.
  int64_t token_stride() const { return backbone_stride() * patch_size; }

  /// Smallest stride every model input must be padded to: the least common
  /// multiple of the token stride and the coarsest reassemble stride.
  int64_t input_stride() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Flat `key = value` config file. Lists are comma-separated. Lines starting
/// with '#' are comments. Unknown keys are a hard error (ConfigError).
ModelConfig load_model_config(const std::filesystem::path& path);
void save_model_config(const ModelConfig& cfg, const std::filesystem::path& path);

/// Applies one `key=value` override in the same syntax as the config file.
void apply_override(ModelConfig& cfg, const std::string& assignment);

std::string to_config_text(const ModelConfig& cfg);

}  // namespace bradcn
