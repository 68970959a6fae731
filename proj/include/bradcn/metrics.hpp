#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bradcn/types.hpp"

namespace bradcn {

/// Cap reported when MSE is zero (or the value would exceed it); keeps
/// reports finite and sortable.
constexpr double kPsnrCapDb = 99.0;

/// 10 log10(L^2 / MSE) with L = 1, computed in double precision.
double psnr_db(const torch::Tensor& pred, const torch::Tensor& gt);
inline double psnr_db(const ImageTensor& a, const ImageTensor& b) {
  return psnr_db(a.data, b.data);
}

/// External perceptual-distance backend. The artifact never fabricates a
/// perceptual score: without a provider the metric is reported as missing.
class LpipsProvider {
 public:
  virtual ~LpipsProvider() = default;
  virtual double distance(const ImageTensor& pred, const ImageTensor& gt) = 0;
  virtual std::string name() const = 0;
};

/// Provider's distance, or std::nullopt when provider is null. Provider
/// failures are wrapped in ProviderError.
std::optional<double> lpips_plugin(const ImageTensor& pred, const ImageTensor& gt,
                                   LpipsProvider* provider);

/// Per-image quality row. All fields computed over the same image pair.
struct MetricReport {
  std::string image_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
  std::optional<double> lpips;
};

/// Computes PSNR / SSIM / MS-SSIM (auto scale count) and optionally LPIPS
/// for one pair.
MetricReport compute_metrics(const std::string& image_id, const ImageTensor& pred,
                             const ImageTensor& gt, LpipsProvider* lpips = nullptr);

/// Arithmetic means of every column; lpips mean only when every row has one.
MetricReport mean_report(const std::vector<MetricReport>& rows);

/// CSV with header image_id,psnr_db,ssim,ms_ssim,lpips; missing lpips cells
/// are empty. Appends a `mean` row.
void write_metric_csv(const std::vector<MetricReport>& rows, const std::filesystem::path& path);

/// Same rows as a JSON array; missing lpips serializes as null.
void write_metric_json(const std::vector<MetricReport>& rows, const std::filesystem::path& path);

}  // namespace bradcn
