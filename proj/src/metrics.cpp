#include "bradcn/metrics.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bradcn/errors.hpp"
#include "bradcn/losses.hpp"

namespace bradcn {

double psnr_db(const torch::Tensor& pred, const torch::Tensor& gt) {
  require_same_shape(pred, gt, "psnr");
  const double mse = (pred.to(torch::kDouble) - gt.to(torch::kDouble)).pow(2).mean().item<double>();
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

std::optional<double> lpips_plugin(const ImageTensor& pred, const ImageTensor& gt,
                                   LpipsProvider* provider) {
  if (provider == nullptr) return std::nullopt;
  try {
    return provider->distance(pred, gt);
  } catch (const std::exception& e) {
    throw ProviderError("lpips provider '" + provider->name() + "' failed: " + e.what());
  }
}

MetricReport compute_metrics(const std::string& image_id, const ImageTensor& pred,
                             const ImageTensor& gt, LpipsProvider* lpips) {
  MetricReport r;
  r.image_id = image_id;
  r.psnr_db = psnr_db(pred, gt);
  r.ssim = ssim(pred, gt).item<double>();
  r.ms_ssim =
      ms_ssim(pred, gt, auto_ms_ssim_scales(pred.height(), pred.width())).item<double>();
  r.lpips = lpips_plugin(pred, gt, lpips);
  return r;
}

MetricReport mean_report(const std::vector<MetricReport>& rows) {
  MetricReport mean;
  mean.image_id = "mean";
  if (rows.empty()) return mean;
  double lpips_sum = 0.0;
  bool lpips_complete = true;
  for (const auto& r : rows) {
    mean.psnr_db += r.psnr_db;
    mean.ssim += r.ssim;
    mean.ms_ssim += r.ms_ssim;
    if (r.lpips) lpips_sum += *r.lpips;
    else lpips_complete = false;
  }
  const auto n = static_cast<double>(rows.size());
  mean.psnr_db /= n;
  mean.ssim /= n;
  mean.ms_ssim /= n;
  if (lpips_complete) mean.lpips = lpips_sum / n;
  return mean;
}

void write_metric_csv(const std::vector<MetricReport>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metric csv: " + path.string());
  out << "image_id,psnr_db,ssim,ms_ssim,lpips\n";
  auto emit = [&](const MetricReport& r) {
    out << r.image_id << "," << r.psnr_db << "," << r.ssim << "," << r.ms_ssim << ",";
    if (r.lpips) out << *r.lpips;
    out << "\n";
  };
  for (const auto& r : rows) emit(r);
  emit(mean_report(rows));
}

void write_metric_json(const std::vector<MetricReport>& rows, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = {{"image_id", r.image_id},
                          {"psnr_db", r.psnr_db},
                          {"ssim", r.ssim},
                          {"ms_ssim", r.ms_ssim}};
    row["lpips"] = r.lpips ? nlohmann::json(*r.lpips) : nlohmann::json(nullptr);
    arr.push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metric json: " + path.string());
  out << arr.dump(2) << "\n";
}

}  // namespace bradcn
