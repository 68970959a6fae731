#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bradcn/config.hpp"
#include "bradcn/data.hpp"
#include "bradcn/hybrid.hpp"
#include "bradcn/losses.hpp"
#include "bradcn/metrics.hpp"

namespace bradcn {

enum class TrainStage { AdcnPretrain, HybridL1, HybridCombined };

std::string to_string(TrainStage stage);

/// One declarative training stage: loss mix, schedule, learning rate, which
/// parameter groups move, and the training resolution.
struct TrainPlan {
  TrainStage stage = TrainStage::AdcnPretrain;
  int64_t epochs = 1;
  double lr = 1e-4;
  int64_t batch_size = 1;
  LossSpec loss;
  std::map<std::string, bool> trainable_sets;
  std::pair<int64_t, int64_t> input_hw = {768, 512};

  void validate() const;  // epochs >= 1, lr > 0, batch_size >= 1
};

/// Calibration pretraining defaults: 50 epochs of L1 at lr 1e-4, batch 1,
/// 768x512 inputs; only the calibration net moves.
TrainPlan default_adcn_pretrain_plan();

/// Hybrid defaults: 30 epochs of L1 then 30 epochs of L1 + MS-SSIM, both at
/// lr 5e-5, batch 1, 768x512 inputs; calibration net frozen.
std::vector<TrainPlan> default_hybrid_plans();

struct StepLogEntry {
  std::string stage;
  int64_t epoch = 0;
  int64_t step = 0;  // global optimizer-step counter
  std::string loss_name;
  double value = 0.0;
};
using LossLog = std::vector<StepLogEntry>;

void write_loss_log_csv(const LossLog& log, const std::filesystem::path& path);

/// Position inside a plan sequence; stage_index == number of plans means the
/// run completed.
struct TrainProgress {
  int64_t stage_index = 0;
  int64_t epoch = 0;
  int64_t step_in_epoch = 0;
  int64_t global_step = 0;
};

constexpr int64_t kCheckpointSchemaVersion = 1;

/// Single-file training snapshot. Reloading reproduces bitwise-identical
/// forward outputs and resumes the identical trajectory.
struct Checkpoint {
  int64_t schema_version = kCheckpointSchemaVersion;
  ModelConfig config;
  std::map<std::string, torch::Tensor> parameters;
  std::string optimizer_state;  // serialized archive, empty when absent
  TrainProgress progress;
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Captures the model (and optionally optimizer/progress) into a checkpoint.
Checkpoint snapshot_model(BradcnModel& model, const torch::optim::Optimizer* optimizer = nullptr,
                          const TrainProgress& progress = {});

/// Restores every named parameter. Throws CheckpointError on config or
/// parameter-name/shape mismatches.
void apply_checkpoint(BradcnModel& model, const Checkpoint& ckpt);

/// Restores only parameters whose names start with one of the prefixes
/// (e.g. "adcn." for the calibration handoff).
void adopt_groups(BradcnModel& model, const Checkpoint& ckpt,
                  const std::vector<std::string>& group_prefixes);

/// Builds a model for the checkpoint's config (with the desk fallback depth
/// predictor) and applies the parameters.
BradcnModel model_from_checkpoint(const Checkpoint& ckpt);

/// Desk-scale overrides for a training call: cap on optimizer steps taken in
/// this call (0 = run the plan to completion).
struct RunLimits {
  int64_t max_steps = 0;
};

/// Trains the model's calibration net against |D_o - D_gt| targets built on
/// the fly from predictor outputs. Logs per-step train loss and per-epoch
/// validation loss (plus one validation entry before training).
/// Throws DataError on an empty corpus.
Checkpoint pretrain_adcn(BradcnModel model, const TrainPlan& plan,
                         const std::vector<RgbdSample>& corpus, LossLog& log,
                         const RunLimits& limits = {},
                         const std::optional<Checkpoint>& resume = {});

/// Runs the ordered hybrid stages. The calibration net and any trained depth
/// predictor are adopted from `adcn_ckpt` and the calibration net stays
/// frozen unless a plan's trainable_sets says otherwise. `mode` selects the
/// wiring being trained (Full for the real model; ablations train the same
/// way with reduced wiring).
Checkpoint train_hybrid(BradcnModel model, const std::vector<TrainPlan>& plans,
                        const std::vector<PairedSample>& corpus,
                        const std::optional<Checkpoint>& adcn_ckpt, LossLog& log,
                        HybridMode mode = HybridMode::Full, const RunLimits& limits = {},
                        const std::optional<Checkpoint>& resume = {});

/// Supervised warmup for a trainable depth predictor: L1 regression of the
/// predictor's raw output against ground-truth depth. Returns the final
/// training loss. No-op (returns 0) for non-trainable predictors.
double train_depth_fallback(BradcnModel model, const std::vector<RgbdSample>& corpus,
                            int64_t steps, double lr);

struct EvalOptions {
  std::optional<std::pair<int64_t, int64_t>> input_hw;  // default: native pair size
  LpipsProvider* lpips = nullptr;
};

/// Renders every pair with infer_highres and scores it against the target.
/// The prediction is at twice the input resolution; the reference is the
/// bokeh target, resized to match when its native dims differ.
std::vector<MetricReport> evaluate(BradcnModel model, const std::vector<PairedSample>& corpus,
                                   HybridMode mode, const EvalOptions& options = {});

/// Runs evaluate for all three wiring modes.
std::vector<std::pair<std::string, std::vector<MetricReport>>> run_ablation(
    BradcnModel model, const std::vector<PairedSample>& corpus, const EvalOptions& options = {});

/// Three-row comparison (RenderOnly, RenderPlusDepth, Full), one row per
/// mode with that mode's mean metrics.
void write_ablation_csv(
    const std::vector<std::pair<std::string, std::vector<MetricReport>>>& ablation,
    const std::filesystem::path& path);

}  // namespace bradcn
