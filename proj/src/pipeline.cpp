#include "bradcn/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bradcn/errors.hpp"
#include "bradcn/rng.hpp"

namespace bradcn {

namespace F = torch::nn::functional;

std::string to_string(TrainStage stage) {
  switch (stage) {
    case TrainStage::AdcnPretrain: return "adcn_pretrain";
    case TrainStage::HybridL1: return "hybrid_l1";
    case TrainStage::HybridCombined: return "hybrid_combined";
  }
  return "unknown";
}

void TrainPlan::validate() const {
  if (epochs < 1) throw ConfigError("train plan: epochs must be >= 1");
  if (lr <= 0.0) throw ConfigError("train plan: lr must be positive");
  if (batch_size < 1) throw ConfigError("train plan: batch_size must be >= 1");
  if (input_hw.first < 32 || input_hw.second < 32) {
    throw ConfigError("train plan: input_hw must be at least 32x32");
  }
}

TrainPlan default_adcn_pretrain_plan() {
  TrainPlan plan;
  plan.stage = TrainStage::AdcnPretrain;
  plan.epochs = 50;
  plan.lr = 1e-4;
  plan.batch_size = 1;
  plan.loss = {LossKind::L1, 0.0};
  plan.trainable_sets = {{"render", false},
                         {"depth_adapter", false},
                         {"error_adapter", false},
                         {"adcn", true},
                         {"depth_predictor", false}};
  plan.input_hw = {768, 512};
  return plan;
}

std::vector<TrainPlan> default_hybrid_plans() {
  TrainPlan l1;
  l1.stage = TrainStage::HybridL1;
  l1.epochs = 30;
  l1.lr = 5e-5;
  l1.batch_size = 1;
  l1.loss = {LossKind::L1, 0.0};
  l1.trainable_sets = {{"render", true},
                       {"depth_adapter", true},
                       {"error_adapter", true},
                       {"adcn", false},
                       {"depth_predictor", true}};
  l1.input_hw = {768, 512};

  TrainPlan combined = l1;
  combined.stage = TrainStage::HybridCombined;
  combined.loss = {LossKind::L1_plus_MS_SSIM, 0.16};
  return {l1, combined};
}

void write_loss_log_csv(const LossLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write loss log: " + path.string());
  out << "stage,epoch,step,loss_name,value\n";
  for (const auto& e : log) {
    out << e.stage << "," << e.epoch << "," << e.step << "," << e.loss_name << "," << e.value
        << "\n";
  }
}

namespace {

torch::Tensor resize_bilinear(const torch::Tensor& t, std::pair<int64_t, int64_t> hw) {
  if (t.size(2) == hw.first && t.size(3) == hw.second) return t;
  return F::interpolate(t, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{hw.first, hw.second})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

/// 5% of ids (at least one) held out for validation, seed-pinned; the rest
/// train. A single-sample corpus validates on its only sample.
std::pair<std::vector<size_t>, std::vector<size_t>> train_val_indices(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed, {0x7a11u}));
  rng.shuffle(order);
  size_t val_count = std::max<size_t>(1, n / 20);
  if (val_count >= n) val_count = n == 1 ? 1 : 1;
  std::vector<size_t> val(order.begin(), order.begin() + val_count);
  std::vector<size_t> train;
  if (n == 1) {
    train = val;  // degenerate desk corpus: overfit checks look at train loss
  } else {
    train.assign(order.begin() + val_count, order.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

std::vector<size_t> epoch_order(const std::vector<size_t>& train, uint64_t seed,
                                int64_t stage_index, int64_t epoch) {
  auto order = train;
  Rng rng(mix_seed(seed, {0xe90c4u, static_cast<uint64_t>(stage_index),
                          static_cast<uint64_t>(epoch)}));
  rng.shuffle(order);
  return order;
}

std::vector<torch::Tensor> trainable_params(BradcnModel& model, const TrainPlan& plan) {
  std::vector<torch::Tensor> params;
  for (const auto& name : parameter_group_names()) {
    bool on = false;
    auto it = plan.trainable_sets.find(name);
    if (it != plan.trainable_sets.end()) on = it->second;
    if (name == "depth_predictor") on = on && model->depth_predictor->trainable();
    model->set_group_trainable(name, on);
    if (on) {
      auto group = model->parameter_group(name);
      params.insert(params.end(), group.begin(), group.end());
    }
  }
  if (params.empty()) throw ConfigError("train plan enables no parameter group");
  return params;
}

void load_optimizer_state(torch::optim::Adam& optimizer, const std::string& bytes) {
  if (bytes.empty()) return;
  torch::serialize::InputArchive archive;
  archive.load_from(bytes.data(), bytes.size());
  optimizer.load(archive);
}

struct Sampler {
  virtual ~Sampler() = default;
  virtual size_t size() const = 0;
  // returns (input batch, target batch) at plan resolution
  virtual std::pair<torch::Tensor, torch::Tensor> fetch(const std::vector<size_t>& idx) const = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Calibration pretraining

Checkpoint pretrain_adcn(BradcnModel model, const TrainPlan& plan,
                         const std::vector<RgbdSample>& corpus, LossLog& log,
                         const RunLimits& limits, const std::optional<Checkpoint>& resume) {
  plan.validate();
  if (plan.stage != TrainStage::AdcnPretrain) {
    throw ConfigError("pretrain_adcn expects an AdcnPretrain plan");
  }
  if (corpus.empty()) throw DataError("calibration pretraining corpus is empty");

  const auto hw = plan.input_hw;
  auto prep = [&](const RgbdSample& s) {
    auto img = resize_bilinear(s.rgb.data, hw);
    auto depth = resize_bilinear(s.depth_gt.data, hw);
    return std::make_pair(img, depth);
  };

  // D_o comes from the (frozen) predictor; targets are built on the fly.
  auto make_target = [&](const torch::Tensor& img, const torch::Tensor& depth_gt) {
    torch::NoGradGuard no_grad;
    auto d_o = predict_depth(*model->depth_predictor, ImageTensor(img));
    auto target = build_error_target(d_o, DepthMap(depth_gt));
    return std::make_pair(d_o.data.detach(), target.data.detach());
  };

  auto params = trainable_params(model, plan);
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(plan.lr));

  TrainProgress progress;
  if (resume) {
    apply_checkpoint(model, *resume);
    load_optimizer_state(optimizer, resume->optimizer_state);
    progress = resume->progress;
  }

  const auto [train_idx, val_idx] = train_val_indices(corpus.size(), model->cfg.seed);

  auto val_loss = [&]() {
    torch::NoGradGuard no_grad;
    double total = 0.0;
    for (size_t i : val_idx) {
      auto [img, depth_gt] = prep(corpus[i]);
      auto [d_o, target] = make_target(img, depth_gt);
      auto pred = model->adcn->forward(ImageTensor(img), DepthMap(d_o));
      total += l1_loss(pred.data, target).item<double>();
    }
    return total / static_cast<double>(val_idx.size());
  };

  const std::string stage_name = to_string(plan.stage);
  if (progress.global_step == 0) {
    log.push_back({stage_name, 0, 0, "val_l1", val_loss()});
  }

  int64_t steps_this_call = 0;
  for (int64_t epoch = progress.epoch; epoch < plan.epochs; ++epoch) {
    const auto order = epoch_order(train_idx, model->cfg.seed, 0, epoch);
    size_t cursor = (epoch == progress.epoch) ? static_cast<size_t>(progress.step_in_epoch) : 0;
    for (; cursor + 0 < order.size(); cursor += static_cast<size_t>(plan.batch_size)) {
      std::vector<torch::Tensor> imgs, d_os, targets;
      for (size_t b = 0; b < static_cast<size_t>(plan.batch_size) && cursor + b < order.size();
           ++b) {
        auto [img, depth_gt] = prep(corpus[order[cursor + b]]);
        auto [d_o, target] = make_target(img, depth_gt);
        imgs.push_back(img);
        d_os.push_back(d_o);
        targets.push_back(target);
      }
      auto img_batch = torch::cat(imgs, 0);
      auto d_o_batch = torch::cat(d_os, 0);
      auto target_batch = torch::cat(targets, 0);

      optimizer.zero_grad();
      auto pred = model->adcn->forward(ImageTensor(img_batch), DepthMap(d_o_batch));
      auto loss = l1_loss(pred.data, target_batch);
      loss.backward();
      optimizer.step();

      ++progress.global_step;
      ++steps_this_call;
      log.push_back({stage_name, epoch, progress.global_step, "train_l1", loss.item<double>()});

      if (limits.max_steps > 0 && steps_this_call >= limits.max_steps) {
        progress.epoch = epoch;
        progress.step_in_epoch = static_cast<int64_t>(cursor) + plan.batch_size;
        if (progress.step_in_epoch >= static_cast<int64_t>(order.size())) {
          progress.epoch = epoch + 1;
          progress.step_in_epoch = 0;
        }
        log.push_back({stage_name, epoch, progress.global_step, "val_l1", val_loss()});
        return snapshot_model(model, &optimizer, progress);
      }
    }
    progress.step_in_epoch = 0;
    log.push_back({stage_name, epoch, progress.global_step, "val_l1", val_loss()});
  }

  progress.stage_index = 1;  // single-plan sequence complete
  progress.epoch = plan.epochs;
  progress.step_in_epoch = 0;
  return snapshot_model(model, &optimizer, progress);
}

// ---------------------------------------------------------------------------
// Hybrid training

Checkpoint train_hybrid(BradcnModel model, const std::vector<TrainPlan>& plans,
                        const std::vector<PairedSample>& corpus,
                        const std::optional<Checkpoint>& adcn_ckpt, LossLog& log,
                        HybridMode mode, const RunLimits& limits,
                        const std::optional<Checkpoint>& resume) {
  if (plans.empty()) throw ConfigError("train_hybrid needs at least one plan");
  for (const auto& plan : plans) {
    plan.validate();
    if (plan.stage == TrainStage::AdcnPretrain) {
      throw ConfigError("train_hybrid received a pretraining plan");
    }
  }
  if (corpus.empty()) throw DataError("hybrid training corpus is empty");

  if (adcn_ckpt) {
    // Hand-off from the calibration stage: calibration net plus any trained
    // depth predictor come in; everything else starts fresh.
    adopt_groups(model, *adcn_ckpt, {"adcn.", "depth_predictor."});
  }

  TrainProgress progress;
  if (resume) progress = resume->progress;

  const auto [train_idx, val_idx] = train_val_indices(corpus.size(), model->cfg.seed);

  auto prep = [&](const PairedSample& s, std::pair<int64_t, int64_t> hw) {
    return std::make_pair(resize_bilinear(s.sharp.data, hw), resize_bilinear(s.bokeh.data, hw));
  };

  int64_t steps_this_call = 0;

  for (int64_t stage_index = progress.stage_index;
       stage_index < static_cast<int64_t>(plans.size()); ++stage_index) {
    const auto& plan = plans[static_cast<size_t>(stage_index)];
    const std::string stage_name = to_string(plan.stage);

    auto params = trainable_params(model, plan);
    torch::optim::Adam optimizer(params, torch::optim::AdamOptions(plan.lr));
    if (resume && stage_index == resume->progress.stage_index) {
      apply_checkpoint(model, *resume);
      load_optimizer_state(optimizer, resume->optimizer_state);
    }

    auto val_loss = [&]() {
      torch::NoGradGuard no_grad;
      double total = 0.0;
      for (size_t i : val_idx) {
        auto [sharp, bokeh] = prep(corpus[i], plan.input_hw);
        auto out = model->forward(ImageTensor(sharp), mode);
        total += l1_loss(out.data, bokeh).item<double>();
      }
      return total / static_cast<double>(val_idx.size());
    };

    const int64_t start_epoch = (stage_index == progress.stage_index) ? progress.epoch : 0;
    if (progress.global_step == 0) {
      log.push_back({stage_name, 0, 0, "val_l1", val_loss()});
    }

    for (int64_t epoch = start_epoch; epoch < plan.epochs; ++epoch) {
      const auto order = epoch_order(train_idx, model->cfg.seed, stage_index, epoch);
      size_t cursor = (stage_index == progress.stage_index && epoch == progress.epoch)
                          ? static_cast<size_t>(progress.step_in_epoch)
                          : 0;
      for (; cursor < order.size(); cursor += static_cast<size_t>(plan.batch_size)) {
        std::vector<torch::Tensor> ins, outs;
        for (size_t b = 0; b < static_cast<size_t>(plan.batch_size) && cursor + b < order.size();
             ++b) {
          auto [sharp, bokeh] = prep(corpus[order[cursor + b]], plan.input_hw);
          ins.push_back(sharp);
          outs.push_back(bokeh);
        }
        auto in_batch = torch::cat(ins, 0);
        auto target_batch = torch::cat(outs, 0);

        optimizer.zero_grad();
        auto rendered = model->forward(ImageTensor(in_batch), mode);
        auto loss = loss_value(rendered.data, target_batch, plan.loss);
        loss.backward();
        optimizer.step();

        ++progress.global_step;
        ++steps_this_call;
        log.push_back({stage_name, epoch, progress.global_step,
                       "train_" + to_string(plan.loss.kind), loss.item<double>()});

        if (limits.max_steps > 0 && steps_this_call >= limits.max_steps) {
          TrainProgress at;
          at.stage_index = stage_index;
          at.epoch = epoch;
          at.step_in_epoch = static_cast<int64_t>(cursor) + plan.batch_size;
          at.global_step = progress.global_step;
          if (at.step_in_epoch >= static_cast<int64_t>(order.size())) {
            at.epoch = epoch + 1;
            at.step_in_epoch = 0;
          }
          if (at.epoch >= plan.epochs) {
            at.stage_index = stage_index + 1;
            at.epoch = 0;
            at.step_in_epoch = 0;
          }
          log.push_back({stage_name, epoch, progress.global_step, "val_l1", val_loss()});
          return snapshot_model(model, &optimizer, at);
        }
      }
      log.push_back({stage_name, epoch, progress.global_step, "val_l1", val_loss()});
    }
    // next stage starts from its own epoch 0
    progress.stage_index = stage_index + 1;
    progress.epoch = 0;
    progress.step_in_epoch = 0;
  }

  TrainProgress done;
  done.stage_index = static_cast<int64_t>(plans.size());
  done.global_step = progress.global_step;
  return snapshot_model(model, nullptr, done);
}

double train_depth_fallback(BradcnModel model, const std::vector<RgbdSample>& corpus,
                            int64_t steps, double lr) {
  if (corpus.empty()) throw DataError("depth warmup corpus is empty");
  if (!model->depth_predictor->trainable()) return 0.0;
  auto module = model->depth_predictor->torch_module();
  if (!module) return 0.0;

  for (auto& p : module->parameters()) p.set_requires_grad(true);
  torch::optim::Adam optimizer(module->parameters(), torch::optim::AdamOptions(lr));

  double last = 0.0;
  for (int64_t step = 0; step < steps; ++step) {
    const auto& s = corpus[static_cast<size_t>(step) % corpus.size()];
    optimizer.zero_grad();
    auto raw = model->depth_predictor->predict(s.rgb);
    auto loss = l1_loss(raw.data, s.depth_gt.data);
    loss.backward();
    optimizer.step();
    last = loss.item<double>();
  }
  return last;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<MetricReport> evaluate(BradcnModel model, const std::vector<PairedSample>& corpus,
                                   HybridMode mode, const EvalOptions& options) {
  if (corpus.empty()) throw DataError("evaluation corpus is empty");
  std::vector<MetricReport> rows;
  rows.reserve(corpus.size());
  for (const auto& s : corpus) {
    const auto hw = options.input_hw.value_or(std::make_pair(s.sharp.height(), s.sharp.width()));
    auto input = ImageTensor(resize_bilinear(s.sharp.data, hw));
    auto pred = model->infer_highres(input, mode);
    auto ref = ImageTensor(resize_bilinear(s.bokeh.data, {pred.height(), pred.width()}));
    rows.push_back(compute_metrics(s.id, pred, ref, options.lpips));
  }
  return rows;
}

std::vector<std::pair<std::string, std::vector<MetricReport>>> run_ablation(
    BradcnModel model, const std::vector<PairedSample>& corpus, const EvalOptions& options) {
  std::vector<std::pair<std::string, std::vector<MetricReport>>> out;
  for (auto mode : all_hybrid_modes()) {
    out.emplace_back(to_string(mode), evaluate(model, corpus, mode, options));
  }
  return out;
}

void write_ablation_csv(
    const std::vector<std::pair<std::string, std::vector<MetricReport>>>& ablation,
    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ablation csv: " + path.string());
  out << "method,psnr_db,ssim,ms_ssim,lpips\n";
  for (const auto& [name, rows] : ablation) {
    const auto mean = mean_report(rows);
    out << name << "," << mean.psnr_db << "," << mean.ssim << "," << mean.ms_ssim << ",";
    if (mean.lpips) out << *mean.lpips;
    out << "\n";
  }
}

}  // namespace bradcn
